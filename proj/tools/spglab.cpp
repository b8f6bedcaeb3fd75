// spglab: build hard instances, run PG / NPG, verify runs and sweep constants.

#include "spg/spg.h"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace {

struct SpecDeleter {
    void operator()(spg_spec* p) const { spg_spec_free(p); }
};
struct RunDeleter {
    void operator()(spg_run* p) const { spg_run_free(p); }
};
struct ReportsDeleter {
    void operator()(spg_reports* p) const { spg_reports_free(p); }
};
using SpecPtr = std::unique_ptr<spg_spec, SpecDeleter>;
using RunPtr = std::unique_ptr<spg_run, RunDeleter>;
using ReportsPtr = std::unique_ptr<spg_reports, ReportsDeleter>;

// Exit codes: 0 ok, 1 a verification check failed, 2 usage, 3 internal, otherwise 10 + status.
constexpr int kCheckFailed = 1;

struct CliError {
    spg_status status;
    std::string what;
};

void check(spg_status s, const std::string& context) {
    if (s != SPG_OK) throw CliError{s, context + ": " + spg_last_error()};
}

struct Options {
    std::string params;
    std::string out;
    std::optional<std::string> algo;
    std::optional<std::string> max_iter;
    std::optional<std::string> eta;
    std::optional<std::string> collapse;
    std::optional<std::string> variant;
    std::vector<std::string> set;
    unsigned jobs = 0;
    std::string run_dir;
};

SpecPtr load_spec(const Options& o) {
    spg_spec* raw = nullptr;
    if (o.params.empty()) {
        check(spg_spec_default(&raw), "default spec");
    } else {
        check(spg_spec_load(o.params.c_str(), &raw), o.params);
    }
    SpecPtr spec(raw);
    auto apply = [&](const char* key, const std::optional<std::string>& v) {
        if (v) check(spg_spec_set(spec.get(), key, v->c_str()), std::string("--") + key);
    };
    apply("algo", o.algo);
    apply("max_iter", o.max_iter);
    apply("eta", o.eta);
    apply("collapse", o.collapse);
    apply("variant", o.variant);
    for (const std::string& kv : o.set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw CliError{SPG_INVALID_ARGUMENT, "--set expects key=value, got '" + kv + "'"};
        check(spg_spec_set(spec.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()), "--set " + kv);
    }
    return spec;
}

void print_table(const spg_reports* reports) {
    size_t need = 0;
    check(spg_reports_table(reports, nullptr, 0, &need), "report table");
    std::string text(need, '\0');
    check(spg_reports_table(reports, text.data(), text.size(), &need), "report table");
    std::fputs(text.c_str(), stdout);
}

int cmd_build(const Options& o) {
    SpecPtr spec = load_spec(o);
    check(spg_build_write(spec.get(), o.out.c_str()), "build");
    std::printf("wrote mdp.txt, layout.csv, params.txt to %s\n", o.out.c_str());
    return 0;
}

int cmd_run(const Options& o) {
    SpecPtr spec = load_spec(o);
    spg_run* raw = nullptr;
    check(spg_run_execute(spec.get(), &raw), "run");
    RunPtr run(raw);
    check(spg_run_write(run.get(), o.out.c_str()), "write run");
    check(spg_spec_write(spec.get(), (std::filesystem::path(o.out) / "params.txt").c_str()), "write params");
    spg_run_info info{};
    check(spg_run_summary(run.get(), &info), "summary");
    std::printf("%s eta=%.6g  stop=%s after %zu iterations  sup_err=%.6g mean_err=%.6g  (%.2fs)\n",
                info.algorithm ? "npg" : "pg", info.eta, spg_stop_reason_name(info.stop_reason),
                info.total_iterations, info.final_sup_error, info.final_mean_error, info.wall_seconds);
    for (int s = 1; s <= info.horizon; ++s) {
        size_t t = 0;
        int determined = 0;
        if (spg_run_crossing_time(run.get(), s, 0, "tau", &t, &determined) != SPG_OK) continue;
        if (determined) {
            std::printf("  t_%d(tau_%d) = %zu\n", s, s, t);
        } else {
            std::printf("  t_%d(tau_%d) not reached\n", s, s);
        }
    }
    return 0;
}

int cmd_verify(const Options& o) {
    namespace fs = std::filesystem;
    ReportsPtr all;
    if (!o.run_dir.empty()) {
        spg_run* raw = nullptr;
        check(spg_run_load(o.run_dir.c_str(), &raw), "load " + o.run_dir);
        RunPtr run(raw);
        spg_reports* rep = nullptr;
        check(spg_verify_run(run.get(), &rep), "verify run");
        all.reset(rep);
    }
    // Instance checks need the constants: --params, or params.txt next to the run.
    Options inst = o;
    if (inst.params.empty() && !o.run_dir.empty() && fs::exists(fs::path(o.run_dir) / "params.txt")) {
        inst.params = (fs::path(o.run_dir) / "params.txt").string();
    }
    if (!inst.params.empty() || o.run_dir.empty()) {
        SpecPtr spec = load_spec(inst);
        spg_reports* rep = nullptr;
        check(spg_verify_instance(spec.get(), &rep), "verify instance");
        ReportsPtr instance(rep);
        if (all) {
            spg_reports* merged = nullptr;
            check(spg_reports_merge(instance.get(), all.get(), &merged), "merge reports");
            all.reset(merged);
        } else {
            all = std::move(instance);
        }
    }
    const std::string out = !o.out.empty() ? o.out : o.run_dir;
    if (!out.empty()) {
        fs::create_directories(out);
        check(spg_reports_write_json(all.get(), (fs::path(out) / "report.json").c_str()), "write report");
    }
    print_table(all.get());
    return spg_reports_any_failed(all.get()) ? kCheckFailed : 0;
}

int cmd_sweep(const Options& o) {
    SpecPtr spec = load_spec(o);
    spg_reports* raw = nullptr;
    size_t failed = 0;
    check(spg_sweep(spec.get(), o.out.c_str(), o.jobs, &raw, &failed), "sweep");
    ReportsPtr fits(raw);
    print_table(fits.get());
    if (failed) std::fprintf(stderr, "%zu sweep point(s) failed; see aggregate.csv\n", failed);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Softmax policy gradient lab on exponential-time hard instances"};
    app.require_subcommand(1);
    Options o;
    o.jobs = std::max(1u, std::thread::hardware_concurrency());

    auto common = [&](CLI::App* sub, bool out_required) {
        sub->add_option("--params", o.params, "key=value parameter file")->check(CLI::ExistingFile);
        auto* out = sub->add_option("--out", o.out, "output directory");
        if (out_required) out->required();
        sub->add_option("--algo", o.algo, "pg|npg");
        sub->add_option("--max-iter", o.max_iter, "iteration budget");
        sub->add_option("--eta", o.eta, "stepsize");
        sub->add_option("--collapse", o.collapse, "on|off");
        sub->add_option("--variant", o.variant, "base|modified");
        sub->add_option("--set", o.set, "extra key=value overrides (repeatable)");
    };
    auto* build = app.add_subcommand("build", "write the instance (MDP text, layout CSV, params echo)");
    common(build, true);
    auto* run = app.add_subcommand("run", "run PG or NPG and write trace, crossings and summary");
    common(run, true);
    auto* verify = app.add_subcommand("verify", "check a run directory and/or an instance");
    common(verify, false);
    verify->add_option("run_dir", o.run_dir, "run directory")->check(CLI::ExistingDirectory);
    auto* sweep = app.add_subcommand("sweep", "run the sizes/gammas/etas axes and fit crossing times");
    common(sweep, true);
    sweep->add_option("--jobs", o.jobs, "parallel points (default: logical cores)")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (build->parsed()) return cmd_build(o);
        if (run->parsed()) return cmd_run(o);
        if (verify->parsed()) return cmd_verify(o);
        return cmd_sweep(o);
    } catch (const CliError& e) {
        std::fprintf(stderr, "spglab: %s\n", e.what.c_str());
        return e.status == SPG_INTERNAL ? 3 : 10 + static_cast<int>(e.status);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "spglab: %s\n", e.what());
        return 3;
    }
}
