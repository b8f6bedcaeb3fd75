#pragma once

#include "spg/hard_instance.hpp"
#include "spg/mdp.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spg {

/**
 * Everything a run needs besides its configuration: the MDP that is actually
 * iterated on, the initial distribution over its states, and how many
 * exchangeable full-instance copies each state stands for. In full mode every
 * multiplicity is 1; in collapsed mode a buffer representative carries |S1| etc.
 * Labels and key parameters are present for hard instances and empty otherwise.
 */
struct PgProblem {
    TabularMdp mdp;
    StateDist mu;
    std::vector<double> multiplicity;
    std::vector<StateLabel> labels;
    std::optional<KeyParams> keys;
    std::optional<HardMdpParams> hard;
    Variant variant = Variant::base;
    bool collapsed = false;

    double full_size() const;
};

PgProblem make_problem(const TabularMdp& mdp, const StateDist& mu);
PgProblem make_problem(const HardMdp& instance);
PgProblem make_problem(const HardMdp& instance, const CollapsedInstance& collapsed);
/// Full or collapsed problem for a hard instance under uniform mu and zero logits.
PgProblem make_problem(const HardMdp& instance, bool collapsed);
/// Collapsed problem built straight from the constants (no full state space).
PgProblem make_collapsed_problem(const HardMdpParams& params, Variant variant = Variant::base);

enum class Algorithm { pg, npg };
std::string algorithm_name(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

struct PgConfig {
    double eta = 1e-4;
    std::size_t max_iter = 1000;
    std::optional<double> stop_sup_error = 0.15;
    std::optional<double> stop_mean_error = 0.07;
    /// States whose dynamics are recorded. Empty selects the chain and adjoint
    /// states of a hard instance, or every state (up to 64) of a plain MDP.
    std::vector<StateId> monitor_states;
    /// 0 selects the default schedule: every iteration below 1000, then ×1.2 spacing.
    std::size_t snapshot_stride = 0;
    double eval_tol = 1e-12;
    bool enforce_regime = false;
    /// Initial logits; zero (uniform policy) when absent.
    std::optional<PolicyLogits> theta0;
    /// Stop as soon as every listed state has crossed its tau threshold.
    std::vector<StateId> stop_after_crossing;
    /// Runs abort once any |theta| exceeds this.
    double logit_limit = 1e6;
    /// Applied to each gradient before the update (fault injection in tests).
    std::function<void(std::span<double>)> gradient_hook;
};

/// Largest stepsize for which pointwise monotone improvement is guaranteed: (1-gamma)^2/5.
double monotone_step_limit(double gamma);
/// Default NPG stepsize (1-gamma)^2/5, chosen for comparability with PG.
double default_npg_eta(double gamma);

struct StateSnapshot {
    StateId state = 0;
    double v = 0.0;
    std::array<double, 3> theta{};  // by action id; NaN when the action is absent
    std::array<double, 3> pi_hat{}; // exp(theta - max theta); NaN when absent
    double pi_a1 = 0.0;             // NaN when a1 is absent
    double d = 0.0;                 // visitation per exchangeable copy
};

struct IterationSnapshot {
    std::size_t iter = 0;
    double sup_error = 0.0;
    double mean_error = 0.0;
    std::vector<StateSnapshot> states;
};

struct CrossingRecord {
    StateId state = 0;
    std::string threshold_name; // tau, gamma_tau, vstar_quarter, half
    double threshold = 0.0;
    std::optional<std::size_t> t;
    double pi_a1 = 0.0; // pi(a1|state) at the crossing; NaN if undetermined or a1 absent
    double v = 0.0;     // V(state) at the crossing (may sit up to 10 eval_tol below threshold); NaN if undetermined
};

/// Worst value of a monitored quantity together with where it happened.
struct Extremum {
    double value = 0.0;
    std::size_t iter = 0;
    StateId state = 0;
    std::optional<ActionId> action;
};

/// Minimum of the initial-stage ordering margin
/// min(theta(a0) - theta(a2), theta(a2), -theta(a1)) of one primary state s, taken
/// over iterations up to and including the tau crossing of chain state s - 2
/// (or the whole run when that crossing never happens).
struct OrderingTrace {
    StateId state = 0;
    int chain_index = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    std::size_t min_iter = 0;
    std::optional<std::size_t> window_end; // crossing time that closed the window
};

struct InvariantMonitor {
    Extremum min_delta_v{std::numeric_limits<double>::infinity(), 0, 0, std::nullopt};
    Extremum min_delta_q{std::numeric_limits<double>::infinity(), 0, 0, std::nullopt};
    Extremum min_v{std::numeric_limits<double>::infinity(), 0, 0, std::nullopt};
    Extremum max_logit_sum{0.0, 0, 0, std::nullopt};
    std::vector<OrderingTrace> ordering;
};

enum class StopReason { sup_threshold, mean_threshold, max_iter, crossing_target };
std::string stop_reason_name(StopReason r);
StopReason parse_stop_reason(std::string_view name);

struct RunResult {
    Algorithm algorithm = Algorithm::pg;
    double eta = 0.0;
    double gamma = 0.0;
    double eval_tol = 0.0;
    bool uniform_init = true;
    bool collapsed = false;
    std::size_t num_states = 0;  // states iterated on
    double full_size = 0.0;      // states represented
    std::optional<HardMdpParams> hard;
    Variant variant = Variant::base;

    std::vector<StateLabel> monitored_labels; // parallel to snapshot state lists
    std::vector<StateId> monitored_states;
    std::vector<IterationSnapshot> snapshots;
    std::vector<CrossingRecord> crossings;
    InvariantMonitor monitor;

    // Stop settings the run was made with.
    std::optional<double> stop_sup_error;
    std::optional<double> stop_mean_error;
    std::size_t max_iter = 0;

    StopReason stop_reason = StopReason::max_iter;
    std::size_t total_iterations = 0;
    double wall_seconds = 0.0;
    double final_sup_error = 0.0;
    double final_mean_error = 0.0;
    std::vector<double> final_v;

    /// Crossing time of `state` at the named threshold, if recorded and determined.
    std::optional<std::size_t> crossing_time(StateId state, std::string_view threshold_name) const;
    const CrossingRecord* find_crossing(StateId state, std::string_view threshold_name) const;
};

/// d(s) pi(a|s) A(s,a) / (1 - gamma) with d taken per exchangeable copy.
std::vector<double> pg_gradient(const TabularMdp& mdp, const PolicyLogits& theta, const StateDist& mu,
                                double eval_tol, std::span<const double> multiplicity = {});

/// theta + eta * gradient. Throws spg::Error(non_finite) if any entry is not finite.
PolicyLogits pg_step(const PolicyLogits& theta, std::span<const double> gradient, double eta);

/// theta + eta_npg / (1 - gamma) * A^{pi_theta}.
PolicyLogits npg_step(const TabularMdp& mdp, const PolicyLogits& theta, double eta_npg, double eval_tol);

/// Central differences of V^{pi_theta}(mu), evaluated in extended precision. When
/// `coords` is non-empty only those pair indices are differenced (others are 0).
std::vector<double> finite_difference_value(const TabularMdp& mdp, const PolicyLogits& theta, const StateDist& mu,
                                            double h, std::span<const std::size_t> coords = {});

/// Runs PG or NPG from theta0 (zero by default) until a stop condition fires.
RunResult run(const PgProblem& problem, const PgConfig& config, Algorithm algorithm = Algorithm::pg);

enum class SequenceMode {
    lower_decay, // x_t >= 1 / (2 c t + 1/x_0)
    upper_decay, // x_t <= 1 / (c t + 1/x_0)
    hit_upper,   // first t0 with x >= c_x obeys t0 <= (1 + c c_x) / (c x_0)
    hit_lower,   // every t0 obeys t0 >= (1/x_0 - 1/x_t0) / c
};

struct SequenceReport {
    bool consistent = true;
    std::optional<std::size_t> first_violation;
    bool hypothesis_holds = true;
    std::optional<std::size_t> hypothesis_break;
    std::string detail;
};

/// Numerically checks the conclusions of the recursive-sequence bounds on `x`.
/// The hypothesis of the chosen mode is evaluated and reported separately.
SequenceReport sequence_bound_check(std::span<const double> x, SequenceMode mode, double c, double c_x = 0.0);

} // namespace spg
