#ifndef SPG_SPG_H
#define SPG_SPG_H

/*
 * C interface to the softmax policy gradient lab: instance specs, runs,
 * verification reports and sweeps behind opaque handles.
 *
 * Every function returning spg_status leaves a message in spg_last_error() on
 * failure (thread-local, valid until the next call on the same thread).
 * Output handles are only written on SPG_OK.
 */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define SPG_API __attribute__((visibility("default")))
#else
#define SPG_API
#endif

typedef enum spg_status {
    SPG_OK = 0,
    SPG_INVALID_ARGUMENT = 1,
    SPG_DIMENSION_MISMATCH = 2,
    SPG_NON_CONVERGENCE = 3,
    SPG_SIZING = 4,
    SPG_REGIME = 5,
    SPG_NON_FINITE = 6,
    SPG_PARSE = 7,
    SPG_IO = 8,
    SPG_COLLAPSE = 9,
    SPG_INTERNAL = 99
} spg_status;

typedef enum spg_check_status { SPG_CHECK_PASS = 0, SPG_CHECK_FAIL = 1, SPG_CHECK_SKIPPED = 2 } spg_check_status;

typedef struct spg_spec spg_spec;
typedef struct spg_run spg_run;
typedef struct spg_reports spg_reports;

SPG_API const char* spg_last_error(void);
SPG_API const char* spg_status_name(spg_status status);

/* Experiment spec: instance constants plus run and sweep settings (key=value). */
SPG_API spg_status spg_spec_default(spg_spec** out);
SPG_API spg_status spg_spec_load(const char* path, spg_spec** out);
SPG_API spg_status spg_spec_set(spg_spec* spec, const char* key, const char* value);
SPG_API spg_status spg_spec_write(const spg_spec* spec, const char* path);
SPG_API void spg_spec_free(spg_spec* spec);

/* mdp.txt, layout.csv and params.txt for the full instance. */
SPG_API spg_status spg_build_write(const spg_spec* spec, const char* dir);

typedef struct spg_run_info {
    int algorithm;            /* 0 = pg, 1 = npg */
    int stop_reason;          /* 0 sup, 1 mean, 2 max_iter, 3 crossing target */
    size_t total_iterations;
    size_t num_states;        /* states iterated on */
    double full_size;         /* states represented */
    double eta;
    double gamma;
    double final_sup_error;
    double final_mean_error;
    double wall_seconds;
    int hard;                 /* 1 when the run is on a hard instance */
    int horizon;              /* H of the hard instance, 0 otherwise */
} spg_run_info;

SPG_API const char* spg_stop_reason_name(int stop_reason);

SPG_API spg_status spg_run_execute(const spg_spec* spec, spg_run** out);
SPG_API spg_status spg_run_write(const spg_run* run, const char* dir);
SPG_API spg_status spg_run_load(const char* dir, spg_run** out);
SPG_API spg_status spg_run_summary(const spg_run* run, spg_run_info* out);
/*
 * Crossing time of chain state s (adjoint != 0: its adjoint) at the named
 * threshold (tau, gamma_tau, vstar_quarter, half). *determined is 0 when the
 * crossing was monitored but never happened; SPG_INVALID_ARGUMENT when it was
 * not monitored.
 */
SPG_API spg_status spg_run_crossing_time(const spg_run* run, int s, int adjoint, const char* threshold,
                                         size_t* t, int* determined);
SPG_API void spg_run_free(spg_run* run);

SPG_API spg_status spg_verify_run(const spg_run* run, spg_reports** out);
SPG_API spg_status spg_verify_instance(const spg_spec* spec, spg_reports** out);
/* Scaling of buffer crossing times over runs that differ only in |S| and eta. */
SPG_API spg_status spg_check_scaling(const spg_run* const* runs, size_t count, spg_reports** out);
/*
 * Runs the sweep axes of the spec into dir with up to `jobs` workers (0 picks
 * the number of logical cores). *fits receives the fitted scaling and blow-up
 * reports; *failed_points counts points that errored (they are recorded in
 * aggregate.csv and do not make the call fail).
 */
SPG_API spg_status spg_sweep(const spg_spec* spec, const char* dir, unsigned jobs, spg_reports** fits,
                             size_t* failed_points);

/* Concatenates two report lists into a new one. */
SPG_API spg_status spg_reports_merge(const spg_reports* a, const spg_reports* b, spg_reports** out);
SPG_API size_t spg_reports_count(const spg_reports* reports);
SPG_API int spg_reports_any_failed(const spg_reports* reports);
SPG_API spg_status spg_reports_get(const spg_reports* reports, size_t index, const char** name,
                                   spg_check_status* status, double* margin);
SPG_API spg_status spg_reports_write_json(const spg_reports* reports, const char* path);
/*
 * Human-readable table. Writes at most `capacity` bytes including the
 * terminating NUL; *required receives the full size including the NUL.
 */
SPG_API spg_status spg_reports_table(const spg_reports* reports, char* buffer, size_t capacity, size_t* required);
SPG_API void spg_reports_free(spg_reports* reports);

#ifdef __cplusplus
}
#endif

#endif
