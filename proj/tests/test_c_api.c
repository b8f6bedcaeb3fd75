/* Exercises the C interface from plain C. */

#include "spg/spg.h"

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static int failures = 0;

#define EXPECT(cond)                                                         \
    do {                                                                     \
        if (!(cond)) {                                                       \
            fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
            ++failures;                                                      \
        }                                                                    \
    } while (0)

#define OK(call) EXPECT((call) == SPG_OK)

static void test_spec_errors(void) {
    spg_spec* spec = NULL;
    OK(spg_spec_default(&spec));
    EXPECT(spg_spec_set(spec, "gamma", "abc") == SPG_PARSE);
    EXPECT(strstr(spg_last_error(), "gamma") != NULL);
    EXPECT(spg_spec_set(spec, "unknown_key", "1") == SPG_PARSE);
    EXPECT(spg_spec_set(spec, NULL, "1") == SPG_INVALID_ARGUMENT);
    OK(spg_spec_set(spec, "size", "20"));
    EXPECT(spg_build_write(spec, "/tmp/spg_c_api_small") == SPG_SIZING);
    EXPECT(strstr(spg_last_error(), "minimum feasible size") != NULL);
    spg_spec_free(spec);

    spg_spec* missing = NULL;
    EXPECT(spg_spec_load("/nonexistent/params.txt", &missing) == SPG_IO);
    EXPECT(missing == NULL);
    EXPECT(strcmp(spg_status_name(SPG_SIZING), "sizing") == 0);
}

static void test_run_cycle(void) {
    spg_spec* spec = NULL;
    OK(spg_spec_default(&spec));
    OK(spg_spec_set(spec, "algo", "npg"));
    OK(spg_spec_set(spec, "max_iter", "20000"));
    OK(spg_spec_set(spec, "stop_mean", "off"));

    spg_run* run = NULL;
    OK(spg_run_execute(spec, &run));
    spg_run_info info;
    OK(spg_run_summary(run, &info));
    EXPECT(info.algorithm == 1);
    EXPECT(strcmp(spg_stop_reason_name(info.stop_reason), "sup-threshold") == 0);
    EXPECT(info.final_sup_error <= 0.15);
    EXPECT(info.hard == 1 && info.horizon == 6);
    EXPECT(info.full_size == 2000.0);

    size_t t3 = 0, t3bar = 0;
    int det = 0, det_bar = 0;
    OK(spg_run_crossing_time(run, 3, 0, "tau", &t3, &det));
    OK(spg_run_crossing_time(run, 3, 1, "gamma_tau", &t3bar, &det_bar));
    EXPECT(det && det_bar && t3 == t3bar);
    EXPECT(spg_run_crossing_time(run, 3, 0, "gamma_tau", &t3, &det) == SPG_INVALID_ARGUMENT);

    OK(spg_run_write(run, "/tmp/spg_c_api_run"));
    spg_run* back = NULL;
    OK(spg_run_load("/tmp/spg_c_api_run", &back));
    spg_run_info info2;
    OK(spg_run_summary(back, &info2));
    EXPECT(info2.total_iterations == info.total_iterations);

    spg_reports* reports = NULL;
    OK(spg_verify_run(back, &reports));
    EXPECT(spg_reports_count(reports) > 5);
    EXPECT(!spg_reports_any_failed(reports));
    const char* name = NULL;
    spg_check_status status;
    double margin;
    OK(spg_reports_get(reports, 0, &name, &status, &margin));
    EXPECT(name != NULL && strlen(name) > 0);
    EXPECT(spg_reports_get(reports, 1000, &name, &status, &margin) == SPG_INVALID_ARGUMENT);

    size_t need = 0;
    OK(spg_reports_table(reports, NULL, 0, &need));
    EXPECT(need > 1);
    char small[8];
    OK(spg_reports_table(reports, small, sizeof small, &need));
    EXPECT(strlen(small) == sizeof small - 1);
    char* text = malloc(need);
    OK(spg_reports_table(reports, text, need, &need));
    EXPECT(strlen(text) == need - 1);
    free(text);
    OK(spg_reports_write_json(reports, "/tmp/spg_c_api_run/report.json"));

    spg_reports* inst = NULL;
    OK(spg_spec_set(spec, "policies", "5"));
    OK(spg_verify_instance(spec, &inst));
    spg_reports* merged = NULL;
    OK(spg_reports_merge(inst, reports, &merged));
    EXPECT(spg_reports_count(merged) == spg_reports_count(inst) + spg_reports_count(reports));

    const spg_run* runs[1] = {run};
    spg_reports* scaling = NULL;
    EXPECT(spg_check_scaling(runs, 1, &scaling) != SPG_OK);
    EXPECT(scaling == NULL);

    spg_reports_free(merged);
    spg_reports_free(inst);
    spg_reports_free(reports);
    spg_run_free(back);
    spg_run_free(run);
    spg_spec_free(spec);

    spg_run* corrupt = NULL;
    FILE* f = fopen("/tmp/spg_c_api_run/trace.csv", "w");
    fputs("garbage\n", f);
    fclose(f);
    EXPECT(spg_run_load("/tmp/spg_c_api_run", &corrupt) == SPG_PARSE);
    EXPECT(corrupt == NULL);
}

static void test_sweep(void) {
    spg_spec* spec = NULL;
    OK(spg_spec_default(&spec));
    OK(spg_spec_set(spec, "algo", "npg"));
    OK(spg_spec_set(spec, "stop_after", "1,2"));
    OK(spg_spec_set(spec, "sizes", "20,1000,2000"));
    spg_reports* fits = NULL;
    size_t failed = 0;
    OK(spg_sweep(spec, "/tmp/spg_c_api_sweep", 0, &fits, &failed));
    EXPECT(failed == 1);
    EXPECT(spg_reports_count(fits) >= 1);
    spg_reports_free(fits);
    spg_spec_free(spec);
}

int main(void) {
    test_spec_errors();
    test_run_cycle();
    test_sweep();
    spg_spec_free(NULL);
    spg_run_free(NULL);
    spg_reports_free(NULL);
    if (failures) {
        fprintf(stderr, "%d expectation(s) failed\n", failures);
        return 1;
    }
    printf("c api: all expectations met\n");
    return 0;
}
