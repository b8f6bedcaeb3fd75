#include "spg/verify.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace spg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Accumulates the worst slack of a check. A point fails when its slack falls
// below -tolerance; the reported margin is the raw minimum slack.
class Worst {
public:
    void see(double slack, double tolerance, const Witness& where, const std::string& why) {
        if (slack < margin_) {
            margin_ = slack;
            if (!failed_) {
                witness_ = where;
                why_ = why;
            }
        }
        if (!failed_ && !(slack >= -tolerance)) {
            failed_ = true;
            witness_ = where;
            why_ = why;
        }
    }
    bool failed() const { return failed_; }
    double margin() const { return margin_; }

    void finish(CheckReport& r) const {
        r.margin = margin_;
        if (failed_) {
            r.status = CheckStatus::fail;
            r.reason = why_;
            r.witness = witness_;
        }
    }

private:
    double margin_ = kInf;
    bool failed_ = false;
    Witness witness_;
    std::string why_;
};

CheckReport report(std::string name, std::string property) {
    CheckReport r;
    r.name = std::move(name);
    r.property = std::move(property);
    return r;
}

CheckReport skipped(CheckReport r, std::string why) {
    r.status = CheckStatus::skipped;
    r.reason = std::move(why);
    return r;
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

Witness at_state(StateId s, std::optional<ActionId> a = std::nullopt, std::optional<std::size_t> iter = std::nullopt,
                 std::string detail = {}) {
    return {s, a, iter, std::move(detail)};
}

double q_of(const TabularMdp& mdp, const EvalResult& ev, StateId s, ActionId a) {
    const auto k = mdp.find_pair(s, a);
    if (!k) throw Error(ErrorCode::invalid_argument, "state " + std::to_string(s) + " lacks action " + std::to_string(a));
    return ev.q[*k];
}

double class_mean(const std::vector<double>& v, ClassRange c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < c.count; ++i) acc += v[c.first + i];
    return acc / static_cast<double>(c.count);
}

// Chain crossing times t_s(tau_s) by chain index, read off the monitored labels.
std::map<int, std::optional<std::size_t>> chain_times(const RunResult& run) {
    std::map<int, std::optional<std::size_t>> out;
    for (std::size_t i = 0; i < run.monitored_states.size() && i < run.monitored_labels.size(); ++i) {
        const StateLabel& l = run.monitored_labels[i];
        if (l.cls != StateClass::primary && l.cls != StateClass::buffer) continue;
        if (const CrossingRecord* c = run.find_crossing(run.monitored_states[i], "tau")) out[l.index] = c->t;
    }
    return out;
}

std::map<int, std::optional<std::size_t>> adjoint_times(const RunResult& run) {
    std::map<int, std::optional<std::size_t>> out;
    for (std::size_t i = 0; i < run.monitored_states.size() && i < run.monitored_labels.size(); ++i) {
        const StateLabel& l = run.monitored_labels[i];
        if (l.cls != StateClass::adjoint) continue;
        if (const CrossingRecord* c = run.find_crossing(run.monitored_states[i], "gamma_tau")) out[l.index] = c->t;
    }
    return out;
}

std::string time_text(const std::optional<std::size_t>& t) { return t ? std::to_string(*t) : "never"; }

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

void require_hard(const RunResult& run, const char* what) {
    if (!run.hard) throw Error(ErrorCode::invalid_argument, std::string(what) + " needs a run on the hard instance");
}

} // namespace

std::string status_name(CheckStatus s) {
    switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::skipped: return "skipped";
    }
    return "unknown";
}

std::vector<Policy> random_policies(const TabularMdp& mdp, std::size_t count, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> logit(-scale, scale);
    std::vector<Policy> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        PolicyLogits theta = zero_logits(mdp);
        for (double& x : theta.values) x = logit(rng);
        out.push_back(softmax_policy(mdp, theta));
    }
    return out;
}

CheckReport check_optimal_values(const HardMdp& inst, const OptimalValueOptions& opt) {
    CheckReport r = report("optimal-values", "closed-form-optimal-values");
    const TabularMdp& mdp = inst.mdp;
    const StateLayout& L = inst.layout;
    const double g = mdp.gamma();
    if (opt.gate_regime && !optimal_value_regime_holds(g, L.h)) {
        return skipped(r, "regime: gamma^(2H) >= 2/3 and H >= 2 required; gamma^(2H) = " +
                              fmt(std::pow(g, 2.0 * L.h)) + " with H = " + std::to_string(L.h));
    }
    if (!optimal_value_regime_holds(g, L.h)) r.notes.push_back("evaluated outside gamma^(2H) >= 2/3 on request");

    const OptimalSolution sol = value_iteration(mdp, 1e-12);
    const std::vector<double> pred = closed_form_optimal_unchecked(L.labels, g);
    Worst w;
    double max_err = 0.0, min_gap = kInf;
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        const StateClass cls = L.labels[s].cls;
        if (cls == StateClass::padding) continue;
        const double err = std::abs(sol.v_star[s] - pred[s]);
        max_err = std::max(max_err, err);
        w.see(opt.tol - err, 0.0, at_state(s),
              "V*(" + class_name(L.labels[s]) + ") = " + format_real(sol.v_star[s]) + ", closed form " +
                  format_real(pred[s]));
        if (cls == StateClass::absorbing) continue;
        double best_other = -kInf, q1 = -kInf;
        for (std::size_t k = mdp.pair_begin(s); k < mdp.pair_end(s); ++k) {
            if (mdp.action_id(k) == 1) {
                q1 = sol.q_star[k];
            } else {
                best_other = std::max(best_other, sol.q_star[k]);
            }
        }
        double gap = q1 - best_other;
        if (sol.greedy[s] != 1 && !(gap < 0.0)) gap = -std::numeric_limits<double>::min();
        min_gap = std::min(min_gap, gap);
        w.see(gap, 0.0, at_state(s, sol.greedy[s]),
              "greedy action at " + class_name(L.labels[s]) + " is a" + std::to_string(sol.greedy[s]));
    }

    const double floor = -g * g;
    double min_q = kInf;
    const auto policies = random_policies(mdp, opt.random_policies, opt.seed);
    const StateDist mu = uniform_dist(mdp.num_states());
    for (std::size_t i = 0; i < policies.size(); ++i) {
        const EvalResult ev = policy_evaluation(mdp, policies[i], mu, 1e-13);
        for (std::size_t k = 0; k < mdp.num_pairs(); ++k) {
            min_q = std::min(min_q, ev.q[k]);
            w.see(ev.q[k] - floor, 1e-12, at_state(mdp.state_of(k), mdp.action_id(k), i, "random policy index"),
                  "Q = " + format_real(ev.q[k]) + " below -gamma^2");
        }
    }
    w.finish(r);
    r.metrics = {{"max_abs_error", max_err},
                 {"min_greedy_gap", min_gap},
                 {"min_q_plus_gamma2", min_q - floor},
                 {"value_iteration_residual", sol.residual},
                 {"random_policies", static_cast<double>(policies.size())}};
    return r;
}

CheckReport check_visitation_bounds(const HardMdp& inst, std::span<const Policy> policies) {
    CheckReport r = report("visitation-lower-bounds", "visitation-lower-bounds");
    if (inst.variant == Variant::modified) {
        return skipped(r, "regime: bounds are stated for the base construction; modified boosters leak 0.9 of "
                          "their mass to the absorbing state");
    }
    const TabularMdp& mdp = inst.mdp;
    const StateLayout& L = inst.layout;
    const double g = mdp.gamma();
    const double n = static_cast<double>(mdp.num_states());
    const double booster = static_cast<double>(L.booster[0].count);
    const double s1 = static_cast<double>(L.buffer1.count), s2 = static_cast<double>(L.buffer2.count);
    const double c_m = booster / ((1.0 - g) * n);
    const double c_b1 = s1 / ((1.0 - g) * n), c_b2 = s2 / ((1.0 - g) * n);
    const double chain_bound = c_m * g * (1.0 - g) * (1.0 - g);
    const double s1_bound = g * (1.0 - g) * (c_m / c_b1) / n;
    const double s2_bound = g * (1.0 - g) * (c_m / c_b2) / n;
    if (c_m != inst.params.c_m || c_b1 != inst.params.c_b1 || c_b2 != inst.params.c_b2) {
        r.notes.push_back("bounds use the constants implied by the rounded class sizes");
    }

    const StateDist mu = uniform_dist(mdp.num_states());
    Worst w;
    for (std::size_t i = 0; i < policies.size(); ++i) {
        const EvalResult ev = policy_evaluation(mdp, policies[i], mu, 1e-13);
        const auto& d = ev.visitation.values;
        auto test = [&](StateId s, double bound) {
            w.see(d[s] / bound - 1.0, 0.0, at_state(s, std::nullopt, i, "policy index"),
                  "d(" + class_name(L.labels[s]) + ") = " + format_real(d[s]) + " < bound " + format_real(bound));
        };
        for (StateId s : L.primary) test(s, chain_bound);
        for (StateId s : L.adjoint) test(s, chain_bound);
        for (std::size_t c = 0; c < L.buffer1.count; ++c) test(L.buffer1.first + c, s1_bound);
        for (std::size_t c = 0; c < L.buffer2.count; ++c) test(L.buffer2.first + c, s2_bound);
    }
    w.finish(r);
    r.metrics = {{"min_relative_slack", w.margin()},
                 {"policies", static_cast<double>(policies.size())},
                 {"c_m_effective", c_m},
                 {"c_b1_effective", c_b1},
                 {"c_b2_effective", c_b2},
                 {"chain_bound", chain_bound},
                 {"s1_bound", s1_bound},
                 {"s2_bound", s2_bound}};
    if (policies.empty()) return skipped(r, "no policies supplied");
    return r;
}

CheckReport check_visitation_upper_bounds(const RunResult& run) {
    CheckReport r = report("visitation-upper-bounds", "pre-crossing-visitation-upper-bounds");
    require_hard(run, "visitation upper bounds");
    if (run.variant == Variant::modified) return skipped(r, "regime: base construction only");
    std::string failing;
    for (const RegimeCondition& c : constant_regime_conditions(*run.hard)) {
        if (!c.holds) failing += (failing.empty() ? "" : "; ") + c.name;
    }
    if (!failing.empty()) return skipped(r, "regime: constant conditions fail: " + failing);
    if (run.algorithm != Algorithm::pg || !run.uniform_init) {
        return skipped(r, "regime: needs a PG run from the uniform policy");
    }
    if (!(run.eta < monotone_step_limit(run.gamma))) return skipped(r, "regime: eta >= (1-gamma)^2/5");

    const ClassSizes z = class_sizes(*run.hard);
    const double g = run.gamma;
    const double n = static_cast<double>(run.hard->target_size);
    const double booster = static_cast<double>(z.booster);
    const double chain_bound = 14.0 * booster / ((1.0 - g) * n) * (1.0 - g) * (1.0 - g);
    const double s1_bound = (1.0 - g) / n * (1.0 + 17.0 * booster / static_cast<double>(z.s1));
    const double s2_bound = (1.0 - g) / n * (1.0 + 8.0 * booster / static_cast<double>(z.s2));
    const auto times = chain_times(run);
    auto t_of = [&](int s) -> double {
        auto it = times.find(s);
        return it != times.end() && it->second ? static_cast<double>(*it->second) : kInf;
    };

    Worst w;
    std::size_t points = 0;
    for (const IterationSnapshot& snap : run.snapshots) {
        for (std::size_t i = 0; i < snap.states.size(); ++i) {
            const StateLabel& l = run.monitored_labels[i];
            double bound = 0.0, window = -1.0;
            if (l.cls == StateClass::primary) {
                bound = chain_bound;
                window = t_of(l.index);
            } else if (l.cls == StateClass::adjoint) {
                bound = chain_bound;
                window = l.index == 1 ? t_of(2) : t_of(l.index);
            } else if (l.cls == StateClass::buffer) {
                bound = l.index == 1 ? s1_bound : s2_bound;
                window = l.index == 1 ? std::min(t_of(1), t_of(2)) : t_of(2);
            }
            if (static_cast<double>(snap.iter) > window) continue;
            ++points;
            const double d = snap.states[i].d;
            w.see(1.0 - d / bound, 0.0, at_state(snap.states[i].state, std::nullopt, snap.iter),
                  "d(" + class_name(l) + ") = " + format_real(d) + " above bound " + format_real(bound));
        }
    }
    w.finish(r);
    r.metrics = {{"points_checked", static_cast<double>(points)},
                 {"chain_bound", chain_bound},
                 {"s1_bound", s1_bound},
                 {"s2_bound", s2_bound}};
    r.notes.push_back("checked on recorded snapshots; unreached crossings leave the window open through iteration " +
                      std::to_string(run.total_iterations));
    if (points == 0) return skipped(r, "no recorded snapshot inside a pre-crossing window");
    return r;
}

CheckReport check_q_structure(const HardMdp& inst, const Policy& pi, double tol) {
    CheckReport r = report("q-structure", "q-function-structure");
    const TabularMdp& mdp = inst.mdp;
    const StateLayout& L = inst.layout;
    const KeyParams& K = inst.keys;
    const double g = mdp.gamma(), p = K.p;
    const EvalResult ev = policy_evaluation(mdp, pi, uniform_dist(mdp.num_states()), 1e-14);
    const auto& v = ev.v;
    auto tau = [&](int s) { return K.tau[static_cast<std::size_t>(s)]; };
    auto rew = [&](int s) { return K.r[static_cast<std::size_t>(s)]; };
    auto prim = [&](int s) { return L.primary[static_cast<std::size_t>(s - 3)]; };
    auto adj = [&](int s) { return L.adjoint[static_cast<std::size_t>(s - 1)]; };
    auto chain_v = [&](int s) {
        if (s == 1) return class_mean(v, L.buffer1);
        if (s == 2) return class_mean(v, L.buffer2);
        return v[prim(s)];
    };

    Worst w;
    std::size_t identities = 0;
    auto equal = [&](double got, double want, StateId s, ActionId a, const std::string& what) {
        ++identities;
        const double allow = tol * std::max(1.0, std::abs(want));
        w.see(allow - std::abs(got - want), 0.0, at_state(s, a),
              what + ": " + format_real(got) + " vs " + format_real(want));
    };
    const bool bounds_apply = std::pow(g, 2.0 * L.h) >= 0.5 && inst.params.c_p <= 1.0 / 6.0;
    if (!bounds_apply) {
        r.notes.push_back("a0/a2 bounds skipped (regime: gamma^(2H) >= 1/2 and c_p <= 1/6 required)");
    }
    std::size_t gap_checks = 0;

    for (int s = 3; s <= L.h; ++s) {
        const StateId x = prim(s);
        const double q0 = q_of(mdp, ev, x, 0), q1 = q_of(mdp, ev, x, 1), q2 = q_of(mdp, ev, x, 2);
        const std::string name = "primary_" + std::to_string(s);
        equal(q0, rew(s) + g * g * p * tau(s - 2), x, 0, "Q(" + name + ",a0)");
        equal(q1, g * v[adj(s - 1)], x, 1, "Q(" + name + ",a1)");
        equal(q2, rew(s) + g * p * v[adj(s - 2)], x, 2, "Q(" + name + ",a2)");
        const double gap = q0 - q2;
        equal(gap, g * p * (g * tau(s - 2) - v[adj(s - 2)]), x, 0, "Q(a0) - Q(a2) at " + name);
        if (bounds_apply) {
            w.see(q0 - std::pow(g, 1.5) * tau(s - 1), 1e-12, at_state(x, 0), "Q(" + name + ",a0) below its lower bound");
            w.see(std::sqrt(g) * tau(s) - q0, 1e-12, at_state(x, 0), "Q(" + name + ",a0) above its upper bound");
            w.see(std::sqrt(g) * tau(s) - q2, 1e-12, at_state(x, 2), "Q(" + name + ",a2) above its upper bound");
        }
        const double pa1 = pi.values[*mdp.find_pair(adj(s - 2), 1)];
        if (chain_v(s - 2) < tau(s - 2) && pa1 > 0.0) {
            ++gap_checks;
            double slack = gap;
            if (!(slack > 0.0)) slack = std::min(slack, -std::numeric_limits<double>::min());
            w.see(slack, 0.0, at_state(x, 0), "Q(a0) - Q(a2) not positive at " + name);
        }
    }
    for (int s = 1; s <= L.h; ++s) {
        const StateId x = adj(s);
        const std::string name = "adjoint_" + std::to_string(s);
        equal(q_of(mdp, ev, x, 0), g * tau(s), x, 0, "Q(" + name + ",a0)");
        equal(q_of(mdp, ev, x, 1), g * chain_v(s), x, 1, "Q(" + name + ",a1)");
    }
    const double g2 = g * g, g4 = g2 * g2;
    for (auto [range, level] : {std::pair{L.buffer1, g2}, std::pair{L.buffer2, g4}}) {
        for (std::size_t c = 0; c < range.count; ++c) {
            const StateId x = range.first + c;
            const std::string name = class_name(L.labels[x]);
            equal(q_of(mdp, ev, x, 0), -level, x, 0, "Q(" + name + ",a0)");
            equal(q_of(mdp, ev, x, 1), level, x, 1, "Q(" + name + ",a1)");
        }
    }
    w.finish(r);
    r.metrics = {{"identities", static_cast<double>(identities)}, {"gap_sign_checks", static_cast<double>(gap_checks)}};
    return r;
}

std::vector<CheckReport> check_run_invariants(const RunResult& run) {
    std::vector<CheckReport> out;
    const bool pg = run.algorithm == Algorithm::pg;
    const bool hard = run.hard.has_value();
    const double limit = monotone_step_limit(run.gamma);
    const std::string not_pg = "regime: property of the PG iteration; this is an NPG run";

    {
        CheckReport r = report("monotone-improvement", "pointwise-monotone-improvement");
        if (!pg) {
            r = skipped(r, not_pg);
        } else if (!(run.eta < limit)) {
            r = skipped(r, "regime: eta = " + fmt(run.eta) + " is not below (1-gamma)^2/5 = " + fmt(limit));
        } else {
            Worst w;
            const Extremum& dv = run.monitor.min_delta_v;
            const Extremum& dq = run.monitor.min_delta_q;
            w.see(dv.value, 1e-12, at_state(dv.state, std::nullopt, dv.iter), "V decreased by " + fmt(-dv.value));
            w.see(dq.value, 1e-12, at_state(dq.state, dq.action, dq.iter), "Q decreased by " + fmt(-dq.value));
            w.finish(r);
            r.metrics = {{"min_delta_v", dv.value}, {"min_delta_q", dq.value}};
            if (run.total_iterations == 0) r.notes.push_back("no update was performed");
        }
        out.push_back(r);
    }
    {
        CheckReport r = report("non-negativity", "value-non-negativity");
        if (!pg) {
            r = skipped(r, not_pg);
        } else if (!hard || !run.uniform_init) {
            r = skipped(r, "regime: needs the hard instance and the uniform initial policy");
        } else {
            Worst w;
            const Extremum& m = run.monitor.min_v;
            w.see(m.value, 1e-12, at_state(m.state, std::nullopt, m.iter), "V = " + format_real(m.value));
            w.finish(r);
            r.metrics = {{"min_v", m.value}};
        }
        out.push_back(r);
    }
    {
        CheckReport r = report("zero-sum-logits", "zero-sum-logits");
        if (!pg) {
            r = skipped(r, not_pg);
        } else if (!run.uniform_init) {
            r = skipped(r, "regime: needs zero initial logits");
        } else {
            Worst w;
            const Extremum& m = run.monitor.max_logit_sum;
            w.see(1e-8 - m.value, 0.0, at_state(m.state, std::nullopt, m.iter), "|sum of logits| = " + fmt(m.value));
            w.finish(r);
            r.metrics = {{"max_abs_logit_sum", m.value}};
        }
        out.push_back(r);
    }

    const auto chain = chain_times(run);
    const auto adjoint = adjoint_times(run);
    {
        CheckReport r = report("crossing-order", "chain-crossing-order");
        if (!pg) {
            r = skipped(r, not_pg);
        } else if (!hard) {
            r = skipped(r, "regime: needs the hard instance");
        } else {
            Worst w;
            std::size_t determined = 0;
            std::optional<std::pair<int, std::optional<std::size_t>>> prev;
            for (const auto& [s, t] : chain) {
                if (s < 2) continue;
                if (t) ++determined;
                if (prev && t) {
                    const auto& [ps, pt] = *prev;
                    const double slack = pt ? static_cast<double>(*t) - static_cast<double>(*pt) : -kInf;
                    w.see(slack, 0.0, at_state(0, std::nullopt, *t, "chain index " + std::to_string(s)),
                          "t_" + std::to_string(s) + " = " + std::to_string(*t) + " precedes t_" + std::to_string(ps) +
                              " = " + time_text(pt));
                }
                prev = {s, t};
            }
            w.finish(r);
            if (r.witness) {
                // Name the state behind the chain index.
                for (std::size_t i = 0; i < run.monitored_labels.size(); ++i) {
                    const StateLabel& l = run.monitored_labels[i];
                    if ((l.cls == StateClass::primary || l.cls == StateClass::buffer) &&
                        r.witness->detail == "chain index " + std::to_string(l.index)) {
                        r.witness->state = run.monitored_states[i];
                    }
                }
            }
            r.metrics = {{"determined", static_cast<double>(determined)}};
        }
        out.push_back(r);
    }
    {
        CheckReport r = report("adjoint-equivalence", "adjoint-crossing-equivalence");
        if (!hard) {
            r = skipped(r, "regime: needs the hard instance");
        } else {
            Worst w;
            std::size_t compared = 0;
            for (const auto& [s, ta] : adjoint) {
                auto it = chain.find(s);
                if (it == chain.end()) continue;
                ++compared;
                const auto& tc = it->second;
                const bool same = ta == tc;
                double slack = 0.0;
                if (!same) slack = (ta && tc) ? -std::abs(static_cast<double>(*ta) - static_cast<double>(*tc)) : -kInf;
                w.see(slack, 0.0, at_state(0, std::nullopt, ta ? ta : tc, "adjoint " + std::to_string(s)),
                      "adjoint " + std::to_string(s) + " crosses gamma*tau at " + time_text(ta) + ", chain state at " +
                          time_text(tc));
            }
            w.finish(r);
            r.metrics = {{"pairs", static_cast<double>(compared)}};
            if (compared == 0) r = skipped(r, "no monitored chain/adjoint pairs");
        }
        out.push_back(r);
    }
    {
        CheckReport r = report("crossing-policy-floor", "pi-a1-floor-at-crossing");
        if (!hard) {
            r = skipped(r, "regime: needs the hard instance");
        } else {
            Worst w;
            const double floor = (1.0 - run.gamma) / 2.0;
            std::size_t seen = 0;
            for (std::size_t i = 0; i < run.monitored_states.size() && i < run.monitored_labels.size(); ++i) {
                if (run.monitored_labels[i].cls != StateClass::primary) continue;
                const CrossingRecord* c = run.find_crossing(run.monitored_states[i], "tau");
                if (!c || !c->t) continue;
                ++seen;
                w.see(c->pi_a1 - floor, 0.0, at_state(c->state, 1, c->t),
                      "pi(a1) = " + format_real(c->pi_a1) + " at the crossing of " + class_name(run.monitored_labels[i]));
            }
            w.finish(r);
            r.metrics = {{"crossings", static_cast<double>(seen)}, {"floor", floor}};
            if (seen == 0) r = skipped(r, "no primary crossing determined");
        }
        out.push_back(r);
    }
    {
        CheckReport r = report("initial-stage-ordering", "initial-stage-logit-ordering");
        if (!pg) {
            r = skipped(r, not_pg);
        } else if (!hard || !run.uniform_init || run.variant != Variant::base) {
            r = skipped(r, "regime: needs the base hard instance and the uniform initial policy");
        } else if (run.monitor.ordering.empty()) {
            r = skipped(r, "no primary state monitored");
        } else {
            Worst w;
            for (const OrderingTrace& tr : run.monitor.ordering) {
                w.see(tr.min_margin, 1e-10, at_state(tr.state, std::nullopt, tr.min_iter),
                      "ordering theta(a0) >= theta(a2) >= 0 >= theta(a1) broken at primary_" +
                          std::to_string(tr.chain_index) + " by " + fmt(-tr.min_margin));
                r.metrics.emplace_back("window_end_" + std::to_string(tr.chain_index),
                                       tr.window_end ? static_cast<double>(*tr.window_end)
                                                     : static_cast<double>(run.total_iterations));
            }
            w.finish(r);
        }
        out.push_back(r);
    }
    {
        CheckReport r = report("threshold-monotonicity", "crossing-threshold-monotonicity");
        Worst w;
        for (const CrossingRecord& a : run.crossings) {
            for (const CrossingRecord& b : run.crossings) {
                if (a.state != b.state || !(a.threshold <= b.threshold) || !b.t) continue;
                const double slack = a.t ? static_cast<double>(*b.t) - static_cast<double>(*a.t) : -kInf;
                w.see(slack, 0.0, at_state(a.state, std::nullopt, b.t),
                      a.threshold_name + " crossed at " + time_text(a.t) + " after the higher " + b.threshold_name +
                          " at " + std::to_string(*b.t));
            }
        }
        w.finish(r);
        if (run.crossings.empty()) r = skipped(r, "no crossing records");
        out.push_back(r);
    }
    {
        CheckReport r = report("stop-consistency", "stop-reason-consistency");
        Worst w;
        auto flag = [&](bool ok, const std::string& why) {
            w.see(ok ? 0.0 : -1.0, 0.0, Witness{std::nullopt, std::nullopt, run.total_iterations, ""}, why);
        };
        if (run.snapshots.empty()) {
            flag(false, "no snapshot recorded");
        } else {
            const IterationSnapshot& last = run.snapshots.back();
            flag(last.iter == run.total_iterations, "last snapshot is not the final iteration");
            flag(last.sup_error == run.final_sup_error && last.mean_error == run.final_mean_error,
                 "final errors differ from the last snapshot");
        }
        switch (run.stop_reason) {
        case StopReason::sup_threshold:
            flag(run.stop_sup_error && run.final_sup_error <= *run.stop_sup_error, "sup-threshold stop without sup error at threshold");
            break;
        case StopReason::mean_threshold:
            flag(run.stop_mean_error && run.final_mean_error <= *run.stop_mean_error,
                 "mean-threshold stop without mean error at threshold");
            break;
        case StopReason::max_iter:
            flag(run.total_iterations == run.max_iter, "max_iter stop before the iteration budget");
            break;
        case StopReason::crossing_target: break;
        }
        w.finish(r);
        out.push_back(r);
    }
    return out;
}

CheckReport check_blowup(const RunResult& run) {
    CheckReport r = report("blowup", "super-linear-crossing-growth");
    require_hard(run, "blow-up check");
    const auto chain = chain_times(run);
    for (const auto& [s, t] : chain) {
        if (t) r.metrics.emplace_back("t_" + std::to_string(s), static_cast<double>(*t));
    }
    std::vector<int> idx;
    std::vector<double> rho, xs, ys;
    for (const auto& [s, t] : chain) {
        auto lower = chain.find(s - 2);
        if (s < 3 || !t || lower == chain.end() || !lower->second || *lower->second == 0) continue;
        idx.push_back(s);
        rho.push_back(static_cast<double>(*t) / static_cast<double>(*lower->second));
        xs.push_back(std::log(static_cast<double>(*lower->second)));
        ys.push_back(std::log(static_cast<double>(*t)));
        r.metrics.emplace_back("rho_" + std::to_string(s), rho.back());
    }
    const double alpha = idx.size() >= 2 ? slope(xs, ys) : std::numeric_limits<double>::quiet_NaN();
    r.metrics.emplace_back("alpha", alpha);
    r.notes.push_back("alpha > 1 certifies super-linear growth only; the asymptotic exponent 1.5 is not asserted");
    if (run.algorithm == Algorithm::npg) {
        return skipped(r, "not applicable to NPG; crossing times reported as comparator context");
    }
    if (idx.size() < 2) {
        return skipped(r, "insufficient data: " + std::to_string(idx.size()) +
                              " determined (t_s, t_{s-2}) pairs, at least 2 needed");
    }
    Worst w;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        w.see(rho[i] - 1.0, 0.0, at_state(0, std::nullopt, std::nullopt, "chain index " + std::to_string(idx[i])),
              "rho_" + std::to_string(idx[i]) + " = " + fmt(rho[i]) + " is not above 1");
        if (i > 0) {
            double slack = rho[i] - rho[i - 1];
            if (!(slack > 0.0)) slack = std::min(slack, -std::numeric_limits<double>::min());
            w.see(slack, 0.0, at_state(0, std::nullopt, std::nullopt, "chain index " + std::to_string(idx[i])),
                  "rho_" + std::to_string(idx[i]) + " = " + fmt(rho[i]) + " does not exceed rho_" +
                      std::to_string(idx[i - 1]) + " = " + fmt(rho[i - 1]));
        }
    }
    double alpha_slack = alpha - 1.0;
    if (!(alpha_slack > 0.0)) alpha_slack = std::isnan(alpha) ? -kInf : std::min(alpha_slack, -std::numeric_limits<double>::min());
    w.see(alpha_slack, 0.0, Witness{std::nullopt, std::nullopt, std::nullopt, "fit"},
          "fitted exponent alpha = " + fmt(alpha) + " is not above 1");
    w.finish(r);
    return r;
}

ScalingPoint scaling_point(const RunResult& run) {
    require_hard(run, "scaling check");
    const auto chain = chain_times(run);
    ScalingPoint p{static_cast<double>(run.hard->target_size), run.eta, std::nullopt, std::nullopt};
    if (auto it = chain.find(1); it != chain.end()) p.t1 = it->second;
    if (auto it = chain.find(2); it != chain.end()) p.t2 = it->second;
    return p;
}

CheckReport check_scaling_points(std::span<const ScalingPoint> points) {
    CheckReport r = report("t1-scaling", "buffer-crossing-linear-scaling");
    std::map<double, std::vector<ScalingPoint>> by_eta;
    for (const ScalingPoint& p : points) {
        if (!(p.size > 0.0) || !(p.eta > 0.0)) throw Error(ErrorCode::invalid_argument, "scaling point needs |S| > 0 and eta > 0");
        by_eta[p.eta].push_back(p);
    }
    const std::vector<ScalingPoint>* base = nullptr;
    std::size_t best = 0;
    for (const auto& [eta, group] : by_eta) {
        std::vector<double> sizes;
        for (const auto& p : group) sizes.push_back(p.size);
        std::sort(sizes.begin(), sizes.end());
        const auto distinct = static_cast<std::size_t>(std::unique(sizes.begin(), sizes.end()) - sizes.begin());
        if (distinct > best) {
            best = distinct;
            base = &group;
        }
    }
    if (best < 3) {
        throw Error(ErrorCode::invalid_argument, "scaling check needs at least three sizes at a common stepsize");
    }

    Worst w;
    for (auto [which, name] : {std::pair{1, "t1"}, std::pair{2, "t2"}}) {
        std::vector<double> x, y;
        std::optional<double> missing;
        for (const ScalingPoint& p : *base) {
            const auto& t = which == 1 ? p.t1 : p.t2;
            if (!t || *t == 0) {
                missing = p.size;
                continue;
            }
            x.push_back(std::log(p.size / p.eta));
            y.push_back(std::log(static_cast<double>(*t)));
        }
        if (missing) {
            if (which == 1) {
                w.see(-kInf, 0.0, Witness{std::nullopt, std::nullopt, std::nullopt, "|S| = " + fmt(*missing)},
                      "t1 not determined at |S| = " + fmt(*missing));
            } else {
                r.notes.push_back("t2 undetermined at some size; its slope is not assessed");
            }
            continue;
        }
        const double s = slope(x, y);
        r.metrics.emplace_back(std::string("slope_") + name, s);
        const Witness fit{std::nullopt, std::nullopt, std::nullopt, std::string("fit of ") + name};
        w.see(std::isnan(s) ? -kInf : s - 0.8, 0.0, fit, std::string(name) + " slope " + fmt(s) + " below 0.8");
        w.see(std::isnan(s) ? -kInf : 1.2 - s, 0.0, fit, std::string(name) + " slope " + fmt(s) + " above 1.2");
    }

    std::size_t halvings = 0;
    for (const ScalingPoint& a : points) {
        for (const ScalingPoint& b : points) {
            if (a.size != b.size || std::abs(a.eta / b.eta - 2.0) > 1e-12 || !a.t1 || !b.t1 || *a.t1 == 0) continue;
            const double ratio = static_cast<double>(*b.t1) / static_cast<double>(*a.t1);
            ++halvings;
            r.metrics.emplace_back("halving_ratio_size_" + fmt(a.size), ratio);
            const Witness where{std::nullopt, std::nullopt, b.t1, "|S| = " + fmt(a.size)};
            w.see(ratio - 1.5, 0.0, where, "halving eta multiplies t1 by " + fmt(ratio) + " (< 1.5)");
            w.see(2.5 - ratio, 0.0, where, "halving eta multiplies t1 by " + fmt(ratio) + " (> 2.5)");
        }
    }
    r.metrics.emplace_back("halvings", static_cast<double>(halvings));
    w.finish(r);
    return r;
}

CheckReport check_scaling_t1(std::span<const RunResult> runs) {
    if (runs.empty()) throw Error(ErrorCode::invalid_argument, "scaling check needs runs");
    const RunResult& ref = runs.front();
    require_hard(ref, "scaling check");
    std::vector<ScalingPoint> points;
    for (const RunResult& run : runs) {
        require_hard(run, "scaling check");
        const HardMdpParams& a = *ref.hard;
        const HardMdpParams& b = *run.hard;
        const bool same = run.algorithm == ref.algorithm && run.variant == ref.variant && run.uniform_init &&
                          ref.uniform_init && a.gamma == b.gamma && a.c_h == b.c_h && a.c_b1 == b.c_b1 &&
                          a.c_b2 == b.c_b2 && a.c_m == b.c_m && a.c_p == b.c_p;
        if (!same) {
            throw Error(ErrorCode::invalid_argument, "scaling runs differ in more than |S| and eta");
        }
        points.push_back(scaling_point(run));
    }
    return check_scaling_points(points);
}

bool any_failed(std::span<const CheckReport> reports) {
    return std::any_of(reports.begin(), reports.end(), [](const CheckReport& r) { return r.failed(); });
}

void write_reports_json(std::ostream& out, std::span<const CheckReport> reports) {
    using nlohmann::json;
    auto real = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
    json arr = json::array();
    for (const CheckReport& r : reports) {
        json j{{"check", r.name}, {"property", r.property}, {"status", status_name(r.status)}, {"reason", r.reason},
               {"margin", real(r.margin)}};
        if (r.witness) {
            const Witness& w = *r.witness;
            j["witness"] = {{"state", w.state ? json(*w.state) : json(nullptr)},
                            {"action", w.action ? json(*w.action) : json(nullptr)},
                            {"iteration", w.iter ? json(*w.iter) : json(nullptr)},
                            {"detail", w.detail}};
        } else {
            j["witness"] = nullptr;
        }
        json metrics = json::object();
        for (const auto& [k, v] : r.metrics) metrics[k] = real(v);
        j["metrics"] = metrics;
        j["notes"] = r.notes;
        arr.push_back(j);
    }
    out << arr.dump(2) << '\n';
}

void write_reports_table(std::ostream& out, std::span<const CheckReport> reports) {
    char line[256];
    std::snprintf(line, sizeof line, "%-8s %-26s %-13s %s\n", "status", "check", "margin", "detail");
    out << line;
    for (const CheckReport& r : reports) {
        std::string detail = r.reason;
        if (r.witness) {
            std::ostringstream w;
            w << " [";
            if (r.witness->state) w << "state " << *r.witness->state;
            if (r.witness->action) w << " action " << *r.witness->action;
            if (r.witness->iter) w << " t " << *r.witness->iter;
            if (!r.witness->detail.empty()) w << " " << r.witness->detail;
            w << "]";
            detail += w.str();
        }
        std::snprintf(line, sizeof line, "%-8s %-26s %-13s ", status_name(r.status).c_str(), r.name.c_str(),
                      std::isfinite(r.margin) ? fmt(r.margin).c_str() : "-");
        out << line << detail << '\n';
    }
}

} // namespace spg
