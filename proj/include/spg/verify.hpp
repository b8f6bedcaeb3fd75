#pragma once

#include "spg/hard_instance.hpp"
#include "spg/pg_engine.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace spg {

enum class CheckStatus { pass, fail, skipped };
std::string status_name(CheckStatus s);

/// Where a failing check was caught. `iter` doubles as the policy index for
/// checks that sweep over a list of policies.
struct Witness {
    std::optional<StateId> state;
    std::optional<ActionId> action;
    std::optional<std::size_t> iter;
    std::string detail;
};

struct CheckReport {
    std::string name;
    std::string property; // short tag of the structural property being checked
    CheckStatus status = CheckStatus::pass;
    std::string reason;   // failing condition, or the regime condition behind a skip
    double margin = std::numeric_limits<double>::quiet_NaN(); // worst slack; negative on failure
    std::optional<Witness> witness;
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<std::string> notes;

    bool failed() const { return status == CheckStatus::fail; }
};

/// Softmax policies with logits drawn uniformly from [-scale, scale].
std::vector<Policy> random_policies(const TabularMdp& mdp, std::size_t count, std::uint64_t seed, double scale = 4.0);

struct OptimalValueOptions {
    std::size_t random_policies = 50;
    std::uint64_t seed = 7;
    double tol = 1e-9;
    /// When false the closed form is compared even outside gamma^{2H} >= 2/3.
    bool gate_regime = true;
};

/// Value iteration against the closed-form optimal values, greedy action a1 at
/// every non-absorbing non-padding state, and Q >= -gamma^2 over random policies.
CheckReport check_optimal_values(const HardMdp& instance, const OptimalValueOptions& options = {});

/// Universal lower bounds on the discounted visitation of chain, adjoint and
/// buffer states, with the booster and buffer constants taken from the realised
/// class sizes. The metric "min_relative_slack" is min d / bound - 1.
CheckReport check_visitation_bounds(const HardMdp& instance, std::span<const Policy> policies);

/// Pre-crossing upper bounds along a recorded run (snapshots only). Skipped
/// unless every constant condition of the lower-bound regime holds.
CheckReport check_visitation_upper_bounds(const RunResult& run);

/// Exact Q identities of chain, adjoint and buffer states under `pi`, the
/// a0 / a2 bounds (when gamma^{2H} >= 1/2 and c_p <= 1/6) and the a0 - a2 gap.
CheckReport check_q_structure(const HardMdp& instance, const Policy& pi, double tol = 1e-10);

/// Monotone improvement, non-negativity, zero-sum logits, crossing order,
/// adjoint equivalence, pi(a1) at crossings, initial-stage logit ordering,
/// threshold monotonicity and stop-reason consistency.
std::vector<CheckReport> check_run_invariants(const RunResult& run);

/// Super-linear growth of chain crossing times: rho_s = t_s / t_{s-2} > 1 and
/// strictly increasing, plus the fitted exponent alpha of t_s ~ c t_{s-2}^alpha.
CheckReport check_blowup(const RunResult& run);

struct ScalingPoint {
    double size = 0.0;
    double eta = 0.0;
    std::optional<std::size_t> t1;
    std::optional<std::size_t> t2;
};

/// Log-log slope of t1 (and t2 when determined everywhere) against |S|/eta must
/// lie in [0.8, 1.2]; every pair with equal |S| and eta ratio 2 must show a t1
/// ratio in [1.5, 2.5]. Needs at least three distinct sizes at a common eta.
CheckReport check_scaling_points(std::span<const ScalingPoint> points);
/// Same, from runs; throws spg::Error(invalid_argument) when the runs differ in
/// anything besides |S| and eta.
CheckReport check_scaling_t1(std::span<const RunResult> runs);
ScalingPoint scaling_point(const RunResult& run);

void write_reports_json(std::ostream& out, std::span<const CheckReport> reports);
void write_reports_table(std::ostream& out, std::span<const CheckReport> reports);
bool any_failed(std::span<const CheckReport> reports);

} // namespace spg
