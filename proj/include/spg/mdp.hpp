#pragma once

#include "spg/error.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spg {

using StateId = std::size_t;
/// Action label. The hard instance uses 0, 1, 2 for a0, a1, a2.
using ActionId = int;

struct Transition {
    StateId next;
    double prob;
};

struct ActionSpec {
    ActionId id;
    double reward;
    std::vector<Transition> next;
};

/**
 * Finite discounted MDP with per-state action sets and sparse transitions.
 *
 * State-action pairs are stored contiguously per state; a "pair index" runs
 * over [0, num_pairs()) and every per-(s,a) quantity in this library (logits,
 * probabilities, Q, advantages, gradients) is a flat vector over pair indices.
 * The object is immutable after construction, so it can be shared read-only
 * across threads.
 */
class TabularMdp {
public:
    TabularMdp() = default;
    /// Throws spg::Error on structural problems (successor out of range, duplicate
    /// action ids). Numerical invariants are reported by validate_mdp instead.
    TabularMdp(std::vector<std::vector<ActionSpec>> states, double gamma);

    std::size_t num_states() const noexcept { return state_offsets_.empty() ? 0 : state_offsets_.size() - 1; }
    std::size_t num_pairs() const noexcept { return action_ids_.size(); }
    double gamma() const noexcept { return gamma_; }

    std::size_t pair_begin(StateId s) const { return state_offsets_[s]; }
    std::size_t pair_end(StateId s) const { return state_offsets_[s + 1]; }
    std::size_t num_actions(StateId s) const { return pair_end(s) - pair_begin(s); }
    StateId state_of(std::size_t pair) const;

    ActionId action_id(std::size_t pair) const { return action_ids_[pair]; }
    double reward(std::size_t pair) const { return rewards_[pair]; }
    std::span<const Transition> transitions(std::size_t pair) const {
        return {transitions_.data() + transition_offsets_[pair],
                transitions_.data() + transition_offsets_[pair + 1]};
    }
    std::optional<std::size_t> find_pair(StateId s, ActionId a) const;

    /// Order in which every non-self-loop edge s -> s' has s before s'. Empty
    /// when the structural graph (union over actions) has a cycle longer than one.
    const std::optional<std::vector<StateId>>& topological_order() const noexcept { return topo_; }

    std::vector<std::vector<ActionSpec>> to_specs() const;

private:
    void compute_topological_order();

    double gamma_ = 0.0;
    std::vector<std::size_t> state_offsets_;
    std::vector<ActionId> action_ids_;
    std::vector<double> rewards_;
    std::vector<std::size_t> transition_offsets_;
    std::vector<Transition> transitions_;
    std::optional<std::vector<StateId>> topo_;
};

/// Per-(s,a) logits theta(s, a), indexed by pair.
struct PolicyLogits {
    std::vector<double> values;
};

/// Per-(s,a) action probabilities pi(a|s), indexed by pair.
struct Policy {
    std::vector<double> values;
};

/// Probability vector over states.
struct StateDist {
    std::vector<double> values;
};

struct Violation {
    StateId state;
    std::optional<ActionId> action;
    std::string rule; // "row-sum", "negative-prob", "reward-range", "no-actions", "gamma-range", "non-finite"
    std::string detail;
};

using ValidationReport = std::vector<Violation>;

ValidationReport validate_mdp(const TabularMdp& mdp);

PolicyLogits zero_logits(const TabularMdp& mdp);
StateDist uniform_dist(std::size_t num_states);

/// Max-shifted softmax per state. Throws on non-finite logits or size mismatch.
Policy softmax_policy(const TabularMdp& mdp, const PolicyLogits& theta);

struct EvalResult {
    std::vector<double> v;   // per state
    std::vector<double> q;   // per pair
    std::vector<double> adv; // per pair, q - v(state)
    StateDist visitation;    // discounted visitation d_mu^pi
    double residual = 0.0;   // max Bellman residual over the V and d systems
};

enum class EvalMethod {
    automatic,   // topological when available, otherwise iterative
    iterative,   // Jacobi sweeps until the residual drops below tol
    topological, // direct substitution; throws if the MDP has no topological order
};

EvalResult policy_evaluation(const TabularMdp& mdp, const Policy& pi, const StateDist& mu, double tol,
                             EvalMethod method = EvalMethod::automatic);

/// V^{pi_theta}(mu) evaluated in extended precision. Used by the finite-difference
/// oracle, where double rounding would swamp the difference quotient.
long double objective_extended(const TabularMdp& mdp, const PolicyLogits& theta, const StateDist& mu);

struct OptimalSolution {
    std::vector<double> v_star;
    std::vector<double> q_star;
    std::vector<ActionId> greedy; // per state, lowest action id among maximisers
    double residual = 0.0;
};

/// Throws NonConvergence if max_iter sweeps do not bring the residual below tol.
OptimalSolution value_iteration(const TabularMdp& mdp, double tol, std::size_t max_iter = 1000000);

/// Line-oriented text: "states N gamma G", then "r s a value" and "t s a s' p" lines.
void write_mdp_text(std::ostream& out, const TabularMdp& mdp);
TabularMdp read_mdp_text(std::istream& in);

/// "%.17g" rendering shared by every text and CSV emitter.
std::string format_real(double x);
/// Strict parse of a full token; throws spg::Error(parse) on junk.
double parse_real(std::string_view token);
std::size_t parse_count(std::string_view token);

} // namespace spg
