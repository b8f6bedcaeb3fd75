#pragma once

#include "spg/hard_instance.hpp"
#include "spg/pg_engine.hpp"
#include "spg/verify.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace spg {

/**
 * Everything needed to reproduce a build, run or sweep. Read from the same flat
 * key=value file as the instance constants; recognised run keys are
 *
 *   algo, eta, max_iter, stop_sup, stop_mean (a number or "off"), eval_tol,
 *   snapshot_stride, stop_after (comma list of chain indices), seed,
 *   policies (random policies for instance checks), sizes, gammas, etas
 *   (comma lists; sweep axes).
 *
 * An absent eta means (1-gamma)^2/10 for PG and (1-gamma)^2/5 for NPG.
 */
struct ExperimentSpec {
    InstanceSpec instance;
    Algorithm algorithm = Algorithm::pg;
    std::optional<double> eta;
    std::size_t max_iter = 100000;
    std::optional<double> stop_sup_error = 0.15;
    std::optional<double> stop_mean_error = 0.07;
    double eval_tol = 1e-12;
    std::size_t snapshot_stride = 0;
    std::vector<int> stop_after;
    std::uint64_t seed = 7;
    std::size_t policies = 100;
    std::vector<std::size_t> sizes;
    std::vector<double> gammas;
    std::vector<double> etas;

    double effective_eta() const;
};

ExperimentSpec read_experiment(std::istream& in);
ExperimentSpec read_experiment_file(const std::filesystem::path& path);
void write_experiment(std::ostream& out, const ExperimentSpec& spec);
/// Applies one key=value override with the same parsing rules as the file.
void set_experiment_key(ExperimentSpec& spec, const std::string& key, const std::string& value);

PgConfig make_config(const ExperimentSpec& spec, const PgProblem& problem);
PgProblem make_problem(const ExperimentSpec& spec);
RunResult run_experiment(const ExperimentSpec& spec);

/// mdp.txt, layout.csv and params.txt for the instance (full state space).
void write_build(const std::filesystem::path& dir, const ExperimentSpec& spec);

/// Instance-level checks: optimal values, visitation lower bounds over random
/// policies and Q structure under the uniform and random policies. Instances
/// above `max_full_size` states are reported as skipped.
std::vector<CheckReport> verify_instance(const ExperimentSpec& spec, std::size_t max_full_size = 200000);
/// Run-level checks: invariants, blow-up and pre-crossing visitation bounds.
std::vector<CheckReport> verify_run(const RunResult& run);

struct SweepPoint {
    std::size_t size = 0;
    double gamma = 0.0;
    double eta = 0.0;
    std::string dir;        // relative to the sweep directory
    bool ok = false;
    std::string error;
    std::optional<RunResult> run;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    std::vector<CheckReport> fits;
};

/// Runs the Cartesian product of the sweep axes (an empty axis keeps the base
/// value), each point in its own directory, up to `jobs` at a time. Writes
/// aggregate.csv, fit.csv and fits.json. Failed points are recorded, not fatal.
SweepResult run_sweep(const ExperimentSpec& spec, const std::filesystem::path& dir, unsigned jobs);

} // namespace spg
