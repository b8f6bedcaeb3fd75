#pragma once

#include "spg/mdp.hpp"

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace spg {

/// Construction constants of the chain-like hard instance.
struct HardMdpParams {
    double gamma = 0.96;
    std::size_t target_size = 2000;
    double c_h = 0.25;
    double c_b1 = 0.1;
    double c_b2 = 7.2;
    double c_m = 0.9;
    double c_p = 0.1;
    bool enforce_regime = false;
};

enum class Variant { base, modified };

struct RegimeCondition {
    std::string name;
    bool holds;
    std::string detail;
};

/// The six constant conditions of the lower-bound regime (the stepsize condition
/// lives with the run configuration).
std::vector<RegimeCondition> constant_regime_conditions(const HardMdpParams& params);

/// Throws spg::Error(invalid_argument) on out-of-range constants and
/// spg::Error(regime) if enforce_regime is set and a regime condition fails.
void validate_params(const HardMdpParams& params);

enum class StateClass { absorbing, primary, adjoint, buffer, booster, booster_adjoint, padding };

/**
 * What a state is in the construction.
 *
 * `index` is the chain position s: 3..H for primary, 1..H for adjoint, 1 or 2 for
 * the buffer classes, and the associated chain position for boosters (1 and 2 feed
 * the buffer classes). `copy` is the position within an exchangeable class.
 */
struct StateLabel {
    StateClass cls = StateClass::absorbing;
    int index = 0;
    std::size_t copy = 0;
};

/// Stable textual name used in the layout CSV and trace files, e.g. "primary_3".
std::string class_name(const StateLabel& label);
StateLabel parse_class_name(std::string_view name, std::size_t copy = 0);

struct ClassRange {
    StateId first = 0;
    std::size_t count = 0;
};

/**
 * Labeled state index. Ids are assigned in the order: 0, primary 3..H,
 * adjoint 1..H, S1, S2, boosters of 1..H, boosters of adjoints 1..H, padding.
 */
struct StateLayout {
    int h = 0;
    std::size_t target_size = 0;
    StateId absorbing = 0;
    std::vector<StateId> primary;             // primary[s - 3]
    std::vector<StateId> adjoint;             // adjoint[s - 1]
    ClassRange buffer1;
    ClassRange buffer2;
    std::vector<ClassRange> booster;          // booster[s - 1]
    std::vector<ClassRange> booster_adjoint;  // booster_adjoint[s - 1]
    ClassRange padding;
    std::vector<StateLabel> labels;           // per state id
};

StateLayout derive_layout(const HardMdpParams& params);

/// Realised class sizes for the constants (same rounding and sizing errors as
/// derive_layout, without building the label table).
struct ClassSizes {
    int h = 0;
    std::size_t s1 = 0;
    std::size_t s2 = 0;
    std::size_t booster = 0; // every booster class has this size
    std::size_t padding = 0;
};
ClassSizes class_sizes(const HardMdpParams& params);

/// tau_s = 0.5 gamma^{2s/3}, r_s = 0.5 gamma^{2s/3 + 5/6}, p = c_p (1 - gamma).
/// Both sequences are stored for s = 0..H; entry 0 follows the same formula.
struct KeyParams {
    double gamma = 0.0;
    double p = 0.0;
    int h = 0;
    std::vector<double> tau;
    std::vector<double> r;
};

KeyParams key_params(const HardMdpParams& params, int h);

/**
 * Representative ids of the states the analysis talks about, valid for both the
 * full and the collapsed instance. chain[s] is the primary state s for s >= 3 and
 * a representative buffer copy for s = 1, 2; adjoint[s] is the adjoint of s.
 * Both vectors have H + 1 entries; entry 0 is unused.
 */
struct KeyStates {
    int h = 0;
    StateId absorbing = 0;
    std::vector<StateId> chain;
    std::vector<StateId> adjoint;
};

KeyStates key_states(std::span<const StateLabel> labels);

struct HardMdp {
    TabularMdp mdp;
    StateLayout layout;
    KeyParams keys;
    HardMdpParams params;
    Variant variant = Variant::base;
};

HardMdp build_hard_mdp(const HardMdpParams& params);
HardMdp build_modified_mdp(const HardMdpParams& params);
HardMdp build_instance(const HardMdpParams& params, Variant variant);

/// Maps every full state onto one representative per exchangeable class.
struct CollapsedMap {
    std::vector<StateId> rep_of;         // full id -> collapsed id
    std::vector<StateId> representative; // collapsed id -> full id of the representative
    std::vector<double> weight;          // collapsed id -> number of exchangeable copies
};

struct CollapsedInstance {
    TabularMdp mdp;
    CollapsedMap map;
    StateDist mu;                       // class mass under the full-space initial distribution
    std::vector<StateLabel> labels;     // label of each representative
};

/// Refuses (spg::Error(collapse)) if members of a class differ in actions, rewards,
/// class-level transitions, initial logits or initial mass.
CollapsedInstance collapse(const TabularMdp& mdp, const StateLayout& layout, const PolicyLogits& theta0,
                           const StateDist& mu);
CollapsedInstance collapse(const TabularMdp& mdp, const StateLayout& layout, const PolicyLogits& theta0);

/// Builds the collapsed instance directly from the constants, without materialising
/// the full state space (usable at sizes where the full MDP would not fit in memory).
/// The mapping's rep_of is left empty; representative ids refer to the full layout.
CollapsedInstance build_collapsed(const HardMdpParams& params, Variant variant = Variant::base);

PolicyLogits collapse_logits(const TabularMdp& full, const TabularMdp& collapsed, const CollapsedMap& map,
                             const PolicyLogits& theta);
PolicyLogits expand_logits(const TabularMdp& full, const TabularMdp& collapsed, const CollapsedMap& map,
                           const PolicyLogits& theta);

/// True iff gamma^{2H} >= 2/3 and H >= 2.
bool optimal_value_regime_holds(double gamma, int h);

/// Predicted V* per state: 0 at absorbing and padding states, gamma^{2s} along the
/// chain (buffers use s = 1, 2), gamma^{2s+1} at adjoints, and gamma times the
/// target value at boosters. Throws spg::Error(regime) outside the regime above.
std::vector<double> closed_form_optimal(std::span<const StateLabel> labels, double gamma, int h);
std::vector<double> closed_form_optimal(const StateLayout& layout, double gamma);
/// Same prediction without the regime gate.
std::vector<double> closed_form_optimal_unchecked(std::span<const StateLabel> labels, double gamma);

/// Instance description read from a flat key=value parameter file.
struct InstanceSpec {
    HardMdpParams params;
    Variant variant = Variant::base;
    bool collapse = true;
};

using KeyValues = std::map<std::string, std::string>;

/// Parses "key = value" lines; '#' starts a comment. Duplicate keys are an error.
KeyValues read_key_values(std::istream& in);
/// Consumes the instance keys (gamma, size, c_h, c_b1, c_b2, c_m, c_p, variant,
/// collapse, enforce_regime) from kv; leaves the rest in place.
InstanceSpec take_instance_spec(KeyValues& kv);
void write_instance_spec(std::ostream& out, const InstanceSpec& spec);

/// CSV with header state_id,class,index_within_class,num_actions.
void write_layout_csv(std::ostream& out, const StateLayout& layout, const TabularMdp& mdp);

std::string variant_name(Variant v);
Variant parse_variant(std::string_view name);

} // namespace spg
