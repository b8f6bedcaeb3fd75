#include "spg/spg.h"

#include "spg/experiment.hpp"
#include "spg/trace_io.hpp"

#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>
#include <thread>

struct spg_spec {
    spg::ExperimentSpec spec;
};

struct spg_run {
    spg::RunResult run;
};

struct spg_reports {
    std::vector<spg::CheckReport> reports;
};

namespace {

thread_local std::string last_error;

spg_status fail(spg_status s, const std::string& what) {
    last_error = what;
    return s;
}

template <class F>
spg_status guarded(F&& f) {
    try {
        last_error.clear();
        f();
        return SPG_OK;
    } catch (const spg::Error& e) {
        return fail(static_cast<spg_status>(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(SPG_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(SPG_INTERNAL, e.what());
    }
}

#define SPG_REQUIRE(cond, what) \
    if (!(cond)) return fail(SPG_INVALID_ARGUMENT, what)

} // namespace

extern "C" {

const char* spg_last_error(void) { return last_error.c_str(); }

const char* spg_status_name(spg_status status) {
    switch (status) {
    case SPG_OK: return "ok";
    case SPG_INVALID_ARGUMENT: return "invalid argument";
    case SPG_DIMENSION_MISMATCH: return "dimension mismatch";
    case SPG_NON_CONVERGENCE: return "non-convergence";
    case SPG_SIZING: return "sizing";
    case SPG_REGIME: return "regime";
    case SPG_NON_FINITE: return "non-finite";
    case SPG_PARSE: return "parse";
    case SPG_IO: return "io";
    case SPG_COLLAPSE: return "collapse";
    case SPG_INTERNAL: return "internal";
    }
    return "unknown";
}

spg_status spg_spec_default(spg_spec** out) {
    SPG_REQUIRE(out, "null output handle");
    return guarded([&] { *out = new spg_spec{}; });
}

spg_status spg_spec_load(const char* path, spg_spec** out) {
    SPG_REQUIRE(path && out, "null argument");
    return guarded([&] { *out = new spg_spec{spg::read_experiment_file(path)}; });
}

spg_status spg_spec_set(spg_spec* spec, const char* key, const char* value) {
    SPG_REQUIRE(spec && key && value, "null argument");
    return guarded([&] {
        spg::ExperimentSpec copy = spec->spec;
        spg::set_experiment_key(copy, key, value);
        spec->spec = std::move(copy);
    });
}

spg_status spg_spec_write(const spg_spec* spec, const char* path) {
    SPG_REQUIRE(spec && path, "null argument");
    return guarded([&] {
        std::ofstream out(path);
        if (!out) throw spg::Error(spg::ErrorCode::io, std::string("cannot write ") + path);
        spg::write_experiment(out, spec->spec);
    });
}

void spg_spec_free(spg_spec* spec) { delete spec; }

spg_status spg_build_write(const spg_spec* spec, const char* dir) {
    SPG_REQUIRE(spec && dir, "null argument");
    return guarded([&] { spg::write_build(dir, spec->spec); });
}

const char* spg_stop_reason_name(int stop_reason) {
    switch (stop_reason) {
    case 0: return "sup-threshold";
    case 1: return "mean-threshold";
    case 2: return "max_iter";
    case 3: return "crossing-target";
    }
    return "unknown";
}

spg_status spg_run_execute(const spg_spec* spec, spg_run** out) {
    SPG_REQUIRE(spec && out, "null argument");
    return guarded([&] { *out = new spg_run{spg::run_experiment(spec->spec)}; });
}

spg_status spg_run_write(const spg_run* run, const char* dir) {
    SPG_REQUIRE(run && dir, "null argument");
    return guarded([&] { spg::write_run(dir, run->run); });
}

spg_status spg_run_load(const char* dir, spg_run** out) {
    SPG_REQUIRE(dir && out, "null argument");
    return guarded([&] { *out = new spg_run{spg::read_run(dir)}; });
}

spg_status spg_run_summary(const spg_run* run, spg_run_info* out) {
    SPG_REQUIRE(run && out, "null argument");
    return guarded([&] {
        const spg::RunResult& r = run->run;
        spg_run_info info{};
        info.algorithm = r.algorithm == spg::Algorithm::npg ? 1 : 0;
        info.stop_reason = static_cast<int>(r.stop_reason);
        info.total_iterations = r.total_iterations;
        info.num_states = r.num_states;
        info.full_size = r.full_size;
        info.eta = r.eta;
        info.gamma = r.gamma;
        info.final_sup_error = r.final_sup_error;
        info.final_mean_error = r.final_mean_error;
        info.wall_seconds = r.wall_seconds;
        info.hard = r.hard ? 1 : 0;
        info.horizon = r.hard ? spg::class_sizes(*r.hard).h : 0;
        *out = info;
    });
}

spg_status spg_run_crossing_time(const spg_run* run, int s, int adjoint, const char* threshold, size_t* t,
                                 int* determined) {
    SPG_REQUIRE(run && threshold && t && determined, "null argument");
    const spg::RunResult& r = run->run;
    for (std::size_t i = 0; i < r.monitored_labels.size(); ++i) {
        const spg::StateLabel& l = r.monitored_labels[i];
        const bool match = adjoint ? l.cls == spg::StateClass::adjoint
                                   : (l.cls == spg::StateClass::primary || l.cls == spg::StateClass::buffer);
        if (!match || l.index != s) continue;
        const spg::CrossingRecord* c = r.find_crossing(r.monitored_states[i], threshold);
        if (!c) break;
        *determined = c->t ? 1 : 0;
        *t = c->t.value_or(0);
        return SPG_OK;
    }
    return fail(SPG_INVALID_ARGUMENT, "no monitored crossing for that state and threshold");
}

void spg_run_free(spg_run* run) { delete run; }

spg_status spg_verify_run(const spg_run* run, spg_reports** out) {
    SPG_REQUIRE(run && out, "null argument");
    return guarded([&] { *out = new spg_reports{spg::verify_run(run->run)}; });
}

spg_status spg_verify_instance(const spg_spec* spec, spg_reports** out) {
    SPG_REQUIRE(spec && out, "null argument");
    return guarded([&] { *out = new spg_reports{spg::verify_instance(spec->spec)}; });
}

spg_status spg_check_scaling(const spg_run* const* runs, size_t count, spg_reports** out) {
    SPG_REQUIRE(out && (runs || count == 0), "null argument");
    return guarded([&] {
        std::vector<spg::RunResult> rs;
        for (size_t i = 0; i < count; ++i) {
            if (!runs[i]) throw spg::Error(spg::ErrorCode::invalid_argument, "null run handle");
            rs.push_back(runs[i]->run);
        }
        *out = new spg_reports{{spg::check_scaling_t1(rs)}};
    });
}

spg_status spg_sweep(const spg_spec* spec, const char* dir, unsigned jobs, spg_reports** fits, size_t* failed_points) {
    SPG_REQUIRE(spec && dir && fits, "null argument");
    return guarded([&] {
        if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
        spg::SweepResult res = spg::run_sweep(spec->spec, dir, jobs);
        size_t failed = 0;
        for (const auto& p : res.points) failed += p.ok ? 0 : 1;
        if (failed_points) *failed_points = failed;
        *fits = new spg_reports{std::move(res.fits)};
    });
}

spg_status spg_reports_merge(const spg_reports* a, const spg_reports* b, spg_reports** out) {
    SPG_REQUIRE(a && b && out, "null argument");
    return guarded([&] {
        auto merged = std::make_unique<spg_reports>(*a);
        merged->reports.insert(merged->reports.end(), b->reports.begin(), b->reports.end());
        *out = merged.release();
    });
}

size_t spg_reports_count(const spg_reports* reports) { return reports ? reports->reports.size() : 0; }

int spg_reports_any_failed(const spg_reports* reports) { return reports && spg::any_failed(reports->reports) ? 1 : 0; }

spg_status spg_reports_get(const spg_reports* reports, size_t index, const char** name, spg_check_status* status,
                           double* margin) {
    SPG_REQUIRE(reports, "null argument");
    SPG_REQUIRE(index < reports->reports.size(), "report index out of range");
    const spg::CheckReport& r = reports->reports[index];
    if (name) *name = r.name.c_str();
    if (status) *status = static_cast<spg_check_status>(r.status);
    if (margin) *margin = r.margin;
    return SPG_OK;
}

spg_status spg_reports_write_json(const spg_reports* reports, const char* path) {
    SPG_REQUIRE(reports && path, "null argument");
    return guarded([&] {
        std::ofstream out(path);
        if (!out) throw spg::Error(spg::ErrorCode::io, std::string("cannot write ") + path);
        spg::write_reports_json(out, reports->reports);
    });
}

spg_status spg_reports_table(const spg_reports* reports, char* buffer, size_t capacity, size_t* required) {
    SPG_REQUIRE(reports && required && (buffer || capacity == 0), "null argument");
    return guarded([&] {
        std::ostringstream out;
        spg::write_reports_table(out, reports->reports);
        const std::string text = out.str();
        *required = text.size() + 1;
        if (capacity == 0) return;
        const size_t n = std::min(text.size(), capacity - 1);
        std::memcpy(buffer, text.data(), n);
        buffer[n] = '\0';
    });
}

void spg_reports_free(spg_reports* reports) { delete reports; }

} // extern "C"
