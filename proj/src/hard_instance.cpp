#include "spg/hard_instance.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace spg {

namespace {

// Ratios such as 0.18 / (1 - 0.99) land a hair below the intended integer.
constexpr double kRoundingSlack = 1e-9;

std::size_t class_size(double exact) {
    const double rounded = std::floor(exact + 0.5 + kRoundingSlack);
    return rounded < 1.0 ? 1 : static_cast<std::size_t>(rounded);
}

int horizon(const HardMdpParams& p) {
    const double h = std::floor(p.c_h / (1.0 - p.gamma) + kRoundingSlack);
    return h < 3.0 ? 3 : static_cast<int>(h);
}

struct Sizes {
    int h;
    std::size_t s1, s2, booster, used;
};

Sizes component_sizes(const HardMdpParams& p, std::size_t total) {
    Sizes z{};
    z.h = horizon(p);
    const double scale = (1.0 - p.gamma) * static_cast<double>(total);
    z.s1 = class_size(p.c_b1 * scale);
    z.s2 = class_size(p.c_b2 * scale);
    z.booster = class_size(p.c_m * scale);
    const std::size_t h = static_cast<std::size_t>(z.h);
    z.used = 1 + (h - 2) + h + z.s1 + z.s2 + 2 * h * z.booster;
    return z;
}

std::size_t minimum_feasible_size(const HardMdpParams& p) {
    auto fits = [&](std::size_t n) { return component_sizes(p, n).used <= n; };
    std::size_t hi = std::max<std::size_t>(p.target_size, 16);
    while (!fits(hi)) {
        if (hi > (std::size_t{1} << 40)) return 0;
        hi *= 2;
    }
    std::size_t lo = 1;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (fits(mid)) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    return lo;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::invalid_argument, what);
}

} // namespace

std::vector<RegimeCondition> constant_regime_conditions(const HardMdpParams& p) {
    auto show = [](double x) { return format_real(x); };
    const double b1 = p.c_b1 / p.c_m;
    const double b2 = p.c_b2 / p.c_m;
    return {
        {"gamma > 0.96", p.gamma > 0.96, "gamma = " + show(p.gamma)},
        {"c_m < 1", p.c_m < 1.0, "c_m = " + show(p.c_m)},
        {"c_h < 0.19", p.c_h < 0.19, "c_h = " + show(p.c_h)},
        {"c_b1/c_m <= 1/79776", b1 <= 1.0 / 79776.0, "c_b1/c_m = " + show(b1)},
        {"8 <= c_b2/c_m <= 15", b2 >= 8.0 && b2 <= 15.0, "c_b2/c_m = " + show(b2)},
        {"c_p < 1/2016", p.c_p < 1.0 / 2016.0, "c_p = " + show(p.c_p)},
    };
}

void validate_params(const HardMdpParams& p) {
    require(p.gamma > 0.0 && p.gamma < 1.0, "gamma must lie in (0, 1)");
    require(p.c_h > 0.0 && p.c_b1 > 0.0 && p.c_b2 > 0.0 && p.c_m > 0.0 && p.c_p > 0.0,
            "c_h, c_b1, c_b2, c_m and c_p must be positive");
    const double prob = p.c_p * (1.0 - p.gamma);
    require(prob > 0.0 && prob < 1.0, "p = c_p (1 - gamma) must lie in (0, 1)");
    require(p.target_size > 0, "size must be positive");
    if (p.enforce_regime) {
        std::string failed;
        for (const auto& c : constant_regime_conditions(p)) {
            if (!c.holds) failed += (failed.empty() ? "" : "; ") + c.name + " (" + c.detail + ")";
        }
        if (!failed.empty()) throw Error(ErrorCode::regime, "regime conditions violated: " + failed);
    }
}

std::string class_name(const StateLabel& l) {
    switch (l.cls) {
    case StateClass::absorbing: return "absorbing";
    case StateClass::primary: return "primary_" + std::to_string(l.index);
    case StateClass::adjoint: return "adjoint_" + std::to_string(l.index);
    case StateClass::buffer: return "buffer_" + std::to_string(l.index);
    case StateClass::booster: return "booster_" + std::to_string(l.index);
    case StateClass::booster_adjoint: return "booster_adj_" + std::to_string(l.index);
    case StateClass::padding: return "padding";
    }
    return "unknown";
}

StateLabel parse_class_name(std::string_view name, std::size_t copy) {
    auto suffix = [&](std::string_view prefix) -> std::optional<int> {
        if (name.substr(0, prefix.size()) != prefix) return std::nullopt;
        return static_cast<int>(parse_count(name.substr(prefix.size())));
    };
    if (name == "absorbing") return {StateClass::absorbing, 0, copy};
    if (name == "padding") return {StateClass::padding, 0, copy};
    if (auto s = suffix("primary_")) return {StateClass::primary, *s, copy};
    if (auto s = suffix("adjoint_")) return {StateClass::adjoint, *s, copy};
    if (auto s = suffix("buffer_")) return {StateClass::buffer, *s, copy};
    if (auto s = suffix("booster_adj_")) return {StateClass::booster_adjoint, *s, copy};
    if (auto s = suffix("booster_")) return {StateClass::booster, *s, copy};
    throw Error(ErrorCode::parse, "unknown state class '" + std::string(name) + "'");
}

namespace {

Sizes checked_sizes(const HardMdpParams& params) {
    validate_params(params);
    const Sizes z = component_sizes(params, params.target_size);
    if (z.used > params.target_size) {
        const std::size_t need = minimum_feasible_size(params);
        std::ostringstream msg;
        msg << "size " << params.target_size << " cannot hold the " << z.used << " component states (H = " << z.h
            << ", |S1| = " << z.s1 << ", |S2| = " << z.s2 << ", booster class = " << z.booster << "); ";
        if (need == 0) {
            msg << "no size is feasible for these constants";
        } else {
            msg << "minimum feasible size is " << need;
        }
        throw SizingError(msg.str(), need);
    }
    return z;
}

// With `unit` set every exchangeable class gets a single member, which is
// exactly the state set of the collapsed instance.
StateLayout assemble_layout(const Sizes& z, std::size_t target_size, bool unit) {
    StateLayout L;
    L.h = z.h;
    L.target_size = target_size;
    StateId next = 0;
    auto add = [&](StateClass cls, int index, std::size_t copy) {
        L.labels.push_back({cls, index, copy});
        return next++;
    };
    auto add_class = [&](StateClass cls, int index, std::size_t count) {
        if (unit) count = std::min<std::size_t>(count, 1);
        ClassRange range{next, count};
        for (std::size_t c = 0; c < count; ++c) add(cls, index, c);
        return range;
    };

    L.absorbing = add(StateClass::absorbing, 0, 0);
    for (int s = 3; s <= L.h; ++s) L.primary.push_back(add(StateClass::primary, s, 0));
    for (int s = 1; s <= L.h; ++s) L.adjoint.push_back(add(StateClass::adjoint, s, 0));
    L.buffer1 = add_class(StateClass::buffer, 1, z.s1);
    L.buffer2 = add_class(StateClass::buffer, 2, z.s2);
    for (int s = 1; s <= L.h; ++s) L.booster.push_back(add_class(StateClass::booster, s, z.booster));
    for (int s = 1; s <= L.h; ++s) {
        L.booster_adjoint.push_back(add_class(StateClass::booster_adjoint, s, z.booster));
    }
    L.padding = add_class(StateClass::padding, 0, target_size - z.used);
    return L;
}

} // namespace

ClassSizes class_sizes(const HardMdpParams& params) {
    const Sizes z = checked_sizes(params);
    return {z.h, z.s1, z.s2, z.booster, params.target_size - z.used};
}

StateLayout derive_layout(const HardMdpParams& params) {
    const Sizes z = checked_sizes(params);
    return assemble_layout(z, params.target_size, false);
}

KeyParams key_params(const HardMdpParams& params, int h) {
    KeyParams k;
    k.gamma = params.gamma;
    k.p = params.c_p * (1.0 - params.gamma);
    k.h = h;
    for (int s = 0; s <= h; ++s) {
        k.tau.push_back(0.5 * std::pow(params.gamma, 2.0 * s / 3.0));
        k.r.push_back(0.5 * std::pow(params.gamma, 2.0 * s / 3.0 + 5.0 / 6.0));
    }
    return k;
}

KeyStates key_states(std::span<const StateLabel> labels) {
    KeyStates ks;
    for (const auto& l : labels) {
        if (l.cls == StateClass::adjoint) ks.h = std::max(ks.h, l.index);
    }
    ks.chain.assign(static_cast<std::size_t>(ks.h) + 1, 0);
    ks.adjoint.assign(static_cast<std::size_t>(ks.h) + 1, 0);
    std::vector<bool> seen_buffer(3, false);
    for (StateId id = 0; id < labels.size(); ++id) {
        const auto& l = labels[id];
        switch (l.cls) {
        case StateClass::absorbing: ks.absorbing = id; break;
        case StateClass::primary: ks.chain[static_cast<std::size_t>(l.index)] = id; break;
        case StateClass::adjoint: ks.adjoint[static_cast<std::size_t>(l.index)] = id; break;
        case StateClass::buffer:
            if (!seen_buffer[static_cast<std::size_t>(l.index)]) {
                ks.chain[static_cast<std::size_t>(l.index)] = id;
                seen_buffer[static_cast<std::size_t>(l.index)] = true;
            }
            break;
        default: break;
        }
    }
    return ks;
}

namespace {

HardMdp build_on_layout(const HardMdpParams& params, Variant variant, StateLayout layout) {
    HardMdp out;
    out.params = params;
    out.variant = variant;
    out.layout = std::move(layout);
    out.keys = key_params(params, out.layout.h);
    const StateLayout& L = out.layout;
    const KeyParams& K = out.keys;
    const double g = params.gamma;
    const double p = K.p;
    const auto tau = [&](int s) { return K.tau[static_cast<std::size_t>(s)]; };
    const auto adj = [&](int s) { return L.adjoint[static_cast<std::size_t>(s - 1)]; };
    const auto prim = [&](int s) { return L.primary[static_cast<std::size_t>(s - 3)]; };
    const auto uniform_over = [](ClassRange c) {
        std::vector<Transition> t;
        const double w = 1.0 / static_cast<double>(c.count);
        for (std::size_t i = 0; i < c.count; ++i) t.push_back({c.first + i, w});
        return t;
    };
    const StateId zero = L.absorbing;

    std::vector<std::vector<ActionSpec>> S(L.labels.size());
    S[zero] = {{0, 0.0, {{zero, 1.0}}}};
    for (int s = 3; s <= L.h; ++s) {
        S[prim(s)] = {
            {0, K.r[static_cast<std::size_t>(s)] + g * g * p * tau(s - 2), {{zero, 1.0}}},
            {1, 0.0, {{adj(s - 1), 1.0}}},
            {2, K.r[static_cast<std::size_t>(s)], {{zero, 1.0 - p}, {adj(s - 2), p}}},
        };
    }
    for (int s = 3; s <= L.h; ++s) {
        S[adj(s)] = {{0, g * tau(s), {{zero, 1.0}}}, {1, 0.0, {{prim(s), 1.0}}}};
    }
    S[adj(1)] = {{0, g * tau(1), {{zero, 1.0}}}, {1, 0.0, uniform_over(L.buffer1)}};
    S[adj(2)] = {{0, g * tau(2), {{zero, 1.0}}}, {1, 0.0, uniform_over(L.buffer2)}};
    const double g2 = g * g, g4 = g2 * g2;
    for (std::size_t i = 0; i < L.buffer1.count; ++i) {
        S[L.buffer1.first + i] = {{0, -g2, {{zero, 1.0}}}, {1, g2, {{zero, 1.0}}}};
    }
    for (std::size_t i = 0; i < L.buffer2.count; ++i) {
        S[L.buffer2.first + i] = {{0, -g4, {{zero, 1.0}}}, {1, g4, {{zero, 1.0}}}};
    }

    for (int s = 1; s <= L.h; ++s) {
        const ClassRange c = L.booster[static_cast<std::size_t>(s - 1)];
        std::vector<ActionSpec> acts;
        if (s == 1) {
            acts = {{1, 0.0, uniform_over(L.buffer1)}};
        } else if (s == 2) {
            acts = {{1, 0.0, uniform_over(L.buffer2)}};
        } else if (variant == Variant::modified) {
            acts = {{0, 0.9 * g * tau(s), {{zero, 0.9}, {prim(s), 0.1}}}, {1, 0.0, {{prim(s), 1.0}}}};
        } else {
            acts = {{1, 0.0, {{prim(s), 1.0}}}};
        }
        for (std::size_t i = 0; i < c.count; ++i) S[c.first + i] = acts;
    }
    for (int s = 1; s <= L.h; ++s) {
        const ClassRange c = L.booster_adjoint[static_cast<std::size_t>(s - 1)];
        std::vector<ActionSpec> acts;
        if (variant == Variant::modified) {
            acts = {{0, 0.9 * g2 * tau(s), {{zero, 0.9}, {adj(s), 0.1}}}, {1, 0.0, {{adj(s), 1.0}}}};
        } else {
            acts = {{1, 0.0, {{adj(s), 1.0}}}};
        }
        for (std::size_t i = 0; i < c.count; ++i) S[c.first + i] = acts;
    }
    for (std::size_t i = 0; i < L.padding.count; ++i) {
        const StateId id = L.padding.first + i;
        S[id] = {{0, 0.0, {{id, 1.0}}}};
    }

    out.mdp = TabularMdp(std::move(S), g);
    return out;
}

} // namespace

HardMdp build_instance(const HardMdpParams& params, Variant variant) {
    return build_on_layout(params, variant, derive_layout(params));
}

CollapsedInstance build_collapsed(const HardMdpParams& params, Variant variant) {
    const Sizes z = checked_sizes(params);
    const StateLayout unit = assemble_layout(z, params.target_size, true);
    HardMdp small = build_on_layout(params, variant, unit);

    CollapsedInstance out;
    out.labels = unit.labels;
    const double total = static_cast<double>(params.target_size);
    StateId full_id = 0;
    for (const StateLabel& l : unit.labels) {
        std::size_t count = 1;
        switch (l.cls) {
        case StateClass::buffer: count = l.index == 1 ? z.s1 : z.s2; break;
        case StateClass::booster:
        case StateClass::booster_adjoint: count = z.booster; break;
        case StateClass::padding: count = params.target_size - z.used; break;
        default: break;
        }
        out.map.representative.push_back(full_id);
        out.map.weight.push_back(static_cast<double>(count));
        out.mu.values.push_back(static_cast<double>(count) / total);
        full_id += count;
    }
    out.mdp = std::move(small.mdp);
    return out;
}

HardMdp build_hard_mdp(const HardMdpParams& params) { return build_instance(params, Variant::base); }
HardMdp build_modified_mdp(const HardMdpParams& params) { return build_instance(params, Variant::modified); }

namespace {

std::vector<ClassRange> exchangeable_classes(const StateLayout& L) {
    std::vector<ClassRange> classes{L.buffer1, L.buffer2};
    classes.insert(classes.end(), L.booster.begin(), L.booster.end());
    classes.insert(classes.end(), L.booster_adjoint.begin(), L.booster_adjoint.end());
    if (L.padding.count > 0) classes.push_back(L.padding);
    return classes;
}

// Transitions of one pair with successors mapped to collapsed ids, merged and sorted.
std::vector<Transition> mapped_transitions(const TabularMdp& mdp, std::size_t pair, const std::vector<StateId>& rep_of) {
    std::vector<Transition> out;
    for (const Transition& t : mdp.transitions(pair)) {
        const StateId c = rep_of[t.next];
        auto it = std::find_if(out.begin(), out.end(), [&](const Transition& x) { return x.next == c; });
        if (it == out.end()) {
            out.push_back({c, t.prob});
        } else {
            it->prob += t.prob;
        }
    }
    std::sort(out.begin(), out.end(), [](const Transition& a, const Transition& b) { return a.next < b.next; });
    return out;
}

} // namespace

CollapsedInstance collapse(const TabularMdp& mdp, const StateLayout& layout, const PolicyLogits& theta0,
                           const StateDist& mu) {
    const std::size_t n = mdp.num_states();
    if (layout.labels.size() != n || theta0.values.size() != mdp.num_pairs() || mu.values.size() != n) {
        throw Error(ErrorCode::dimension_mismatch, "collapse: layout, logits or distribution does not match the MDP");
    }
    std::vector<StateId> first_of(n);
    for (StateId s = 0; s < n; ++s) first_of[s] = s;
    for (const ClassRange& c : exchangeable_classes(layout)) {
        for (std::size_t i = 0; i < c.count; ++i) first_of[c.first + i] = c.first;
    }

    CollapsedInstance out;
    CollapsedMap& map = out.map;
    map.rep_of.assign(n, 0);
    for (StateId s = 0; s < n; ++s) {
        if (first_of[s] == s) {
            map.rep_of[s] = map.representative.size();
            map.representative.push_back(s);
            map.weight.push_back(0.0);
            out.mu.values.push_back(0.0);
            out.labels.push_back(layout.labels[s]);
        } else {
            map.rep_of[s] = map.rep_of[first_of[s]];
        }
        map.weight[map.rep_of[s]] += 1.0;
        out.mu.values[map.rep_of[s]] += mu.values[s];
    }

    auto refuse = [&](StateId s, const std::string& why) {
        return Error(ErrorCode::collapse, "cannot collapse state " + std::to_string(s) + " (" +
                                              class_name(layout.labels[s]) + "): " + why);
    };

    std::vector<std::vector<ActionSpec>> specs(map.representative.size());
    for (StateId c = 0; c < map.representative.size(); ++c) {
        const StateId rep = map.representative[c];
        for (std::size_t k = mdp.pair_begin(rep); k < mdp.pair_end(rep); ++k) {
            specs[c].push_back({mdp.action_id(k), mdp.reward(k), mapped_transitions(mdp, k, map.rep_of)});
        }
    }
    for (StateId s = 0; s < n; ++s) {
        const StateId rep = first_of[s];
        if (rep == s) continue;
        if (mdp.num_actions(s) != mdp.num_actions(rep)) throw refuse(s, "action sets differ");
        if (mu.values[s] != mu.values[rep]) throw refuse(s, "initial mass differs within class");
        const auto& ref = specs[map.rep_of[s]];
        for (std::size_t i = 0; i < mdp.num_actions(s); ++i) {
            const std::size_t k = mdp.pair_begin(s) + i;
            const std::size_t kr = mdp.pair_begin(rep) + i;
            if (mdp.action_id(k) != ref[i].id) throw refuse(s, "action sets differ");
            if (mdp.reward(k) != ref[i].reward) throw refuse(s, "rewards differ");
            if (theta0.values[k] != theta0.values[kr]) throw refuse(s, "initial logits differ");
            const auto mine = mapped_transitions(mdp, k, map.rep_of);
            if (mine.size() != ref[i].next.size()) throw refuse(s, "class-level transitions differ");
            for (std::size_t j = 0; j < mine.size(); ++j) {
                if (mine[j].next != ref[i].next[j].next || std::abs(mine[j].prob - ref[i].next[j].prob) > 1e-15) {
                    throw refuse(s, "class-level transitions differ");
                }
            }
        }
    }
    out.mdp = TabularMdp(std::move(specs), mdp.gamma());
    return out;
}

CollapsedInstance collapse(const TabularMdp& mdp, const StateLayout& layout, const PolicyLogits& theta0) {
    return collapse(mdp, layout, theta0, uniform_dist(mdp.num_states()));
}

PolicyLogits collapse_logits(const TabularMdp& full, const TabularMdp& collapsed, const CollapsedMap& map,
                             const PolicyLogits& theta) {
    PolicyLogits out{std::vector<double>(collapsed.num_pairs())};
    for (StateId c = 0; c < collapsed.num_states(); ++c) {
        const StateId rep = map.representative[c];
        for (std::size_t i = 0; i < collapsed.num_actions(c); ++i) {
            out.values[collapsed.pair_begin(c) + i] = theta.values[full.pair_begin(rep) + i];
        }
    }
    return out;
}

PolicyLogits expand_logits(const TabularMdp& full, const TabularMdp& collapsed, const CollapsedMap& map,
                           const PolicyLogits& theta) {
    PolicyLogits out{std::vector<double>(full.num_pairs())};
    for (StateId s = 0; s < full.num_states(); ++s) {
        const StateId c = map.rep_of[s];
        for (std::size_t i = 0; i < full.num_actions(s); ++i) {
            out.values[full.pair_begin(s) + i] = theta.values[collapsed.pair_begin(c) + i];
        }
    }
    return out;
}

bool optimal_value_regime_holds(double gamma, int h) {
    return h >= 2 && std::pow(gamma, 2.0 * h) >= 2.0 / 3.0;
}

std::vector<double> closed_form_optimal_unchecked(std::span<const StateLabel> labels, double gamma) {
    std::vector<double> v(labels.size(), 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const StateLabel& l = labels[i];
        const double s = l.index;
        switch (l.cls) {
        case StateClass::primary:
        case StateClass::buffer: v[i] = std::pow(gamma, 2.0 * s); break;
        case StateClass::adjoint: v[i] = std::pow(gamma, 2.0 * s + 1.0); break;
        case StateClass::booster: v[i] = std::pow(gamma, 2.0 * s + 1.0); break;
        case StateClass::booster_adjoint: v[i] = std::pow(gamma, 2.0 * s + 2.0); break;
        case StateClass::absorbing:
        case StateClass::padding: break;
        }
    }
    return v;
}

std::vector<double> closed_form_optimal(std::span<const StateLabel> labels, double gamma, int h) {
    if (!optimal_value_regime_holds(gamma, h)) {
        throw Error(ErrorCode::regime, "outside the closed-form optimal-value regime: gamma^(2H) = " +
                                           format_real(std::pow(gamma, 2.0 * h)) + " < 2/3 or H = " +
                                           std::to_string(h) + " < 2");
    }
    return closed_form_optimal_unchecked(labels, gamma);
}

std::vector<double> closed_form_optimal(const StateLayout& layout, double gamma) {
    return closed_form_optimal(layout.labels, gamma, layout.h);
}

KeyValues read_key_values(std::istream& in) {
    KeyValues kv;
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string{};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::parse, "line " + std::to_string(line_no) + ": expected key=value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw Error(ErrorCode::parse, "line " + std::to_string(line_no) + ": empty key");
        if (!kv.emplace(key, value).second) {
            throw Error(ErrorCode::parse, "line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
    }
    return kv;
}

namespace {

bool parse_switch(const std::string& key, const std::string& v) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw Error(ErrorCode::parse, key + ": expected on|off, got '" + v + "'");
}

} // namespace

InstanceSpec take_instance_spec(KeyValues& kv) {
    InstanceSpec spec;
    auto take = [&](const char* key, auto&& apply) {
        auto it = kv.find(key);
        if (it == kv.end()) return;
        apply(it->second);
        kv.erase(it);
    };
    HardMdpParams& p = spec.params;
    take("gamma", [&](const std::string& v) { p.gamma = parse_real(v); });
    take("size", [&](const std::string& v) { p.target_size = parse_count(v); });
    take("c_h", [&](const std::string& v) { p.c_h = parse_real(v); });
    take("c_b1", [&](const std::string& v) { p.c_b1 = parse_real(v); });
    take("c_b2", [&](const std::string& v) { p.c_b2 = parse_real(v); });
    take("c_m", [&](const std::string& v) { p.c_m = parse_real(v); });
    take("c_p", [&](const std::string& v) { p.c_p = parse_real(v); });
    take("variant", [&](const std::string& v) { spec.variant = parse_variant(v); });
    take("collapse", [&](const std::string& v) { spec.collapse = parse_switch("collapse", v); });
    take("enforce_regime", [&](const std::string& v) { p.enforce_regime = parse_switch("enforce_regime", v); });
    return spec;
}

void write_instance_spec(std::ostream& out, const InstanceSpec& spec) {
    const HardMdpParams& p = spec.params;
    out << "gamma=" << format_real(p.gamma) << '\n'
        << "size=" << p.target_size << '\n'
        << "c_h=" << format_real(p.c_h) << '\n'
        << "c_b1=" << format_real(p.c_b1) << '\n'
        << "c_b2=" << format_real(p.c_b2) << '\n'
        << "c_m=" << format_real(p.c_m) << '\n'
        << "c_p=" << format_real(p.c_p) << '\n'
        << "variant=" << variant_name(spec.variant) << '\n'
        << "collapse=" << (spec.collapse ? "on" : "off") << '\n'
        << "enforce_regime=" << (p.enforce_regime ? "on" : "off") << '\n';
}

void write_layout_csv(std::ostream& out, const StateLayout& layout, const TabularMdp& mdp) {
    out << "state_id,class,index_within_class,num_actions\n";
    for (StateId s = 0; s < layout.labels.size(); ++s) {
        out << s << ',' << class_name(layout.labels[s]) << ',' << layout.labels[s].copy << ','
            << mdp.num_actions(s) << '\n';
    }
}

std::string variant_name(Variant v) { return v == Variant::base ? "base" : "modified"; }

Variant parse_variant(std::string_view name) {
    if (name == "base") return Variant::base;
    if (name == "modified") return Variant::modified;
    throw Error(ErrorCode::parse, "variant must be base|modified, got '" + std::string(name) + "'");
}

} // namespace spg
