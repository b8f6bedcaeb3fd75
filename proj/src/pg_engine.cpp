#include "spg/pg_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace spg {

double PgProblem::full_size() const { return std::accumulate(multiplicity.begin(), multiplicity.end(), 0.0); }

PgProblem make_problem(const TabularMdp& mdp, const StateDist& mu) {
    if (mu.values.size() != mdp.num_states()) {
        throw Error(ErrorCode::dimension_mismatch, "initial distribution does not match the MDP");
    }
    PgProblem p;
    p.mdp = mdp;
    p.mu = mu;
    p.multiplicity.assign(mdp.num_states(), 1.0);
    return p;
}

PgProblem make_problem(const HardMdp& instance) {
    PgProblem p = make_problem(instance.mdp, uniform_dist(instance.mdp.num_states()));
    p.labels = instance.layout.labels;
    p.keys = instance.keys;
    p.hard = instance.params;
    p.variant = instance.variant;
    return p;
}

PgProblem make_problem(const HardMdp& instance, const CollapsedInstance& collapsed) {
    PgProblem p;
    p.mdp = collapsed.mdp;
    p.mu = collapsed.mu;
    p.multiplicity = collapsed.map.weight;
    p.labels = collapsed.labels;
    p.keys = instance.keys;
    p.hard = instance.params;
    p.variant = instance.variant;
    p.collapsed = true;
    return p;
}

PgProblem make_problem(const HardMdp& instance, bool collapsed) {
    if (!collapsed) return make_problem(instance);
    return make_problem(instance, collapse(instance.mdp, instance.layout, zero_logits(instance.mdp)));
}

PgProblem make_collapsed_problem(const HardMdpParams& params, Variant variant) {
    CollapsedInstance c = build_collapsed(params, variant);
    PgProblem p;
    p.mdp = std::move(c.mdp);
    p.mu = std::move(c.mu);
    p.multiplicity = std::move(c.map.weight);
    p.labels = std::move(c.labels);
    p.keys = key_params(params, key_states(p.labels).h);
    p.hard = params;
    p.variant = variant;
    p.collapsed = true;
    return p;
}

std::string algorithm_name(Algorithm a) { return a == Algorithm::pg ? "pg" : "npg"; }

Algorithm parse_algorithm(std::string_view name) {
    if (name == "pg") return Algorithm::pg;
    if (name == "npg") return Algorithm::npg;
    throw Error(ErrorCode::parse, "algorithm must be pg|npg, got '" + std::string(name) + "'");
}

double monotone_step_limit(double gamma) { return (1.0 - gamma) * (1.0 - gamma) / 5.0; }
double default_npg_eta(double gamma) { return monotone_step_limit(gamma); }

std::string stop_reason_name(StopReason r) {
    switch (r) {
    case StopReason::sup_threshold: return "sup-threshold";
    case StopReason::mean_threshold: return "mean-threshold";
    case StopReason::max_iter: return "max_iter";
    case StopReason::crossing_target: return "crossing-target";
    }
    return "unknown";
}

StopReason parse_stop_reason(std::string_view name) {
    for (auto r : {StopReason::sup_threshold, StopReason::mean_threshold, StopReason::max_iter,
                   StopReason::crossing_target}) {
        if (stop_reason_name(r) == name) return r;
    }
    throw Error(ErrorCode::parse, "unknown stop reason '" + std::string(name) + "'");
}

const CrossingRecord* RunResult::find_crossing(StateId state, std::string_view threshold_name) const {
    for (const auto& c : crossings) {
        if (c.state == state && c.threshold_name == threshold_name) return &c;
    }
    return nullptr;
}

std::optional<std::size_t> RunResult::crossing_time(StateId state, std::string_view threshold_name) const {
    const CrossingRecord* c = find_crossing(state, threshold_name);
    return c ? c->t : std::nullopt;
}

namespace {

void gradient_from_eval(const TabularMdp& mdp, const Policy& pi, const EvalResult& ev,
                        std::span<const double> multiplicity, std::vector<double>& out) {
    const double scale = 1.0 / (1.0 - mdp.gamma());
    out.resize(mdp.num_pairs());
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        const double copies = multiplicity.empty() ? 1.0 : multiplicity[s];
        const double d = ev.visitation.values[s] / copies;
        for (std::size_t k = mdp.pair_begin(s); k < mdp.pair_end(s); ++k) {
            out[k] = scale * d * pi.values[k] * ev.adv[k];
        }
    }
}

void check_finite_logits(const std::vector<double>& theta, double limit, std::size_t iter) {
    for (std::size_t k = 0; k < theta.size(); ++k) {
        if (!std::isfinite(theta[k])) {
            throw Error(ErrorCode::non_finite, "iteration " + std::to_string(iter) + ": logit of pair " +
                                                   std::to_string(k) + " is not finite");
        }
        if (std::abs(theta[k]) > limit) {
            throw Error(ErrorCode::non_finite, "iteration " + std::to_string(iter) + ": |logit| of pair " +
                                                   std::to_string(k) + " exceeds " + format_real(limit));
        }
    }
}

struct Threshold {
    std::size_t record; // index into RunResult::crossings
    StateId state;
    double value;
};

std::vector<StateId> default_monitors(const PgProblem& p) {
    std::vector<StateId> out;
    if (!p.labels.empty()) {
        const KeyStates ks = key_states(p.labels);
        for (int s = 1; s <= ks.h; ++s) out.push_back(ks.chain[static_cast<std::size_t>(s)]);
        for (int s = 1; s <= ks.h; ++s) out.push_back(ks.adjoint[static_cast<std::size_t>(s)]);
        return out;
    }
    const std::size_t n = std::min<std::size_t>(p.mdp.num_states(), 64);
    for (StateId s = 0; s < n; ++s) out.push_back(s);
    return out;
}

// Named thresholds watched for one monitored state.
std::vector<std::pair<std::string, double>> thresholds_for(const PgProblem& p, StateId s) {
    std::vector<std::pair<std::string, double>> out;
    if (!p.labels.empty() && p.keys) {
        const StateLabel& l = p.labels[s];
        const double g = p.mdp.gamma();
        const auto idx = static_cast<std::size_t>(l.index);
        if (l.cls == StateClass::primary || l.cls == StateClass::buffer) {
            out.emplace_back("tau", p.keys->tau[idx]);
            out.emplace_back("vstar_quarter", std::pow(g, 2.0 * l.index) - 0.25);
        } else if (l.cls == StateClass::adjoint) {
            out.emplace_back("gamma_tau", g * p.keys->tau[idx]);
            out.emplace_back("vstar_quarter", std::pow(g, 2.0 * l.index + 1.0) - 0.25);
        }
    }
    out.emplace_back("half", 0.5);
    return out;
}

StateSnapshot snapshot_state(const TabularMdp& mdp, StateId s, const PolicyLogits& theta, const Policy& pi,
                             const EvalResult& ev, double copies) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    StateSnapshot out;
    out.state = s;
    out.v = ev.v[s];
    out.theta.fill(nan);
    out.pi_hat.fill(nan);
    out.pi_a1 = nan;
    out.d = ev.visitation.values[s] / copies;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = mdp.pair_begin(s); k < mdp.pair_end(s); ++k) top = std::max(top, theta.values[k]);
    for (std::size_t k = mdp.pair_begin(s); k < mdp.pair_end(s); ++k) {
        const ActionId a = mdp.action_id(k);
        if (a < 0 || a > 2) continue;
        out.theta[static_cast<std::size_t>(a)] = theta.values[k];
        out.pi_hat[static_cast<std::size_t>(a)] = std::exp(theta.values[k] - top);
        if (a == 1) out.pi_a1 = pi.values[k];
    }
    return out;
}

double ordering_margin(const TabularMdp& mdp, StateId s, const PolicyLogits& theta) {
    const auto k0 = mdp.find_pair(s, 0), k1 = mdp.find_pair(s, 1), k2 = mdp.find_pair(s, 2);
    const double t0 = theta.values[*k0], t1 = theta.values[*k1], t2 = theta.values[*k2];
    return std::min({t0 - t2, t2, -t1});
}

} // namespace

std::vector<double> pg_gradient(const TabularMdp& mdp, const PolicyLogits& theta, const StateDist& mu,
                                double eval_tol, std::span<const double> multiplicity) {
    if (!multiplicity.empty() && multiplicity.size() != mdp.num_states()) {
        throw Error(ErrorCode::dimension_mismatch, "multiplicity vector does not match the MDP");
    }
    const Policy pi = softmax_policy(mdp, theta);
    const EvalResult ev = policy_evaluation(mdp, pi, mu, eval_tol);
    std::vector<double> g;
    gradient_from_eval(mdp, pi, ev, multiplicity, g);
    return g;
}

PolicyLogits pg_step(const PolicyLogits& theta, std::span<const double> gradient, double eta) {
    if (gradient.size() != theta.values.size()) {
        throw Error(ErrorCode::dimension_mismatch, "gradient and logits differ in size");
    }
    PolicyLogits out = theta;
    for (std::size_t k = 0; k < gradient.size(); ++k) {
        out.values[k] += eta * gradient[k];
        if (!std::isfinite(out.values[k])) {
            throw Error(ErrorCode::non_finite, "update produced a non-finite logit at pair " + std::to_string(k));
        }
    }
    return out;
}

PolicyLogits npg_step(const TabularMdp& mdp, const PolicyLogits& theta, double eta_npg, double eval_tol) {
    const Policy pi = softmax_policy(mdp, theta);
    const EvalResult ev = policy_evaluation(mdp, pi, uniform_dist(mdp.num_states()), eval_tol);
    const double scale = 1.0 / (1.0 - mdp.gamma());
    std::vector<double> step(ev.adv.size());
    for (std::size_t k = 0; k < step.size(); ++k) step[k] = scale * ev.adv[k];
    return pg_step(theta, step, eta_npg);
}

std::vector<double> finite_difference_value(const TabularMdp& mdp, const PolicyLogits& theta, const StateDist& mu,
                                            double h, std::span<const std::size_t> coords) {
    if (!(h > 0.0)) throw Error(ErrorCode::invalid_argument, "finite-difference step must be positive");
    std::vector<std::size_t> all;
    if (coords.empty()) {
        all.resize(mdp.num_pairs());
        std::iota(all.begin(), all.end(), std::size_t{0});
        coords = all;
    }
    std::vector<double> out(mdp.num_pairs(), 0.0);
    PolicyLogits probe = theta;
    for (std::size_t k : coords) {
        const double base = theta.values[k];
        probe.values[k] = base + h;
        const long double up = objective_extended(mdp, probe, mu);
        probe.values[k] = base - h;
        const long double down = objective_extended(mdp, probe, mu);
        probe.values[k] = base;
        // The perturbation actually applied is (base + h) - (base - h) after rounding.
        const long double width = static_cast<long double>(base + h) - static_cast<long double>(base - h);
        out[k] = static_cast<double>((up - down) / width);
    }
    return out;
}

RunResult run(const PgProblem& P, const PgConfig& C, Algorithm algorithm) {
    const TabularMdp& mdp = P.mdp;
    const std::size_t n = mdp.num_states();
    if (!(C.eta > 0.0)) throw Error(ErrorCode::invalid_argument, "stepsize must be positive");
    if (!(C.eval_tol > 0.0)) throw Error(ErrorCode::invalid_argument, "evaluation tolerance must be positive");
    if (P.mu.values.size() != n || P.multiplicity.size() != n) {
        throw Error(ErrorCode::dimension_mismatch, "problem distribution or multiplicity does not match the MDP");
    }
    const double gamma = mdp.gamma();
    if (C.enforce_regime && !(C.eta < monotone_step_limit(gamma))) {
        throw Error(ErrorCode::regime, "stepsize " + format_real(C.eta) + " is not below (1-gamma)^2/5 = " +
                                           format_real(monotone_step_limit(gamma)));
    }

    const auto started = std::chrono::steady_clock::now();
    RunResult R;
    R.algorithm = algorithm;
    R.eta = C.eta;
    R.gamma = gamma;
    R.eval_tol = C.eval_tol;
    R.collapsed = P.collapsed;
    R.num_states = n;
    R.full_size = P.full_size();
    R.hard = P.hard;
    R.variant = P.variant;
    R.stop_sup_error = C.stop_sup_error;
    R.stop_mean_error = C.stop_mean_error;
    R.max_iter = C.max_iter;

    PolicyLogits theta = C.theta0 ? *C.theta0 : zero_logits(mdp);
    if (theta.values.size() != mdp.num_pairs()) {
        throw Error(ErrorCode::dimension_mismatch, "initial logits do not match the MDP");
    }
    R.uniform_init = std::all_of(theta.values.begin(), theta.values.end(), [](double x) { return x == 0.0; });

    const std::vector<double> v_star = value_iteration(mdp, C.eval_tol).v_star;

    R.monitored_states = C.monitor_states.empty() ? default_monitors(P) : C.monitor_states;
    for (StateId s : R.monitored_states) {
        if (s >= n) throw Error(ErrorCode::invalid_argument, "monitored state " + std::to_string(s) + " out of range");
        R.monitored_labels.push_back(P.labels.empty() ? StateLabel{} : P.labels[s]);
    }

    std::vector<Threshold> watch;
    for (StateId s : R.monitored_states) {
        for (auto& [name, value] : thresholds_for(P, s)) {
            watch.push_back({R.crossings.size(), s, value});
            R.crossings.push_back({s, name, value, std::nullopt, std::numeric_limits<double>::quiet_NaN(),
                                    std::numeric_limits<double>::quiet_NaN()});
        }
    }
    std::vector<std::size_t> stop_targets;
    for (StateId s : C.stop_after_crossing) {
        const CrossingRecord* rec = nullptr;
        for (const auto& c : R.crossings) {
            if (c.state == s && (c.threshold_name == "tau" || c.threshold_name == "gamma_tau")) rec = &c;
        }
        if (!rec) {
            throw Error(ErrorCode::invalid_argument,
                        "stop target " + std::to_string(s) + " is not a monitored chain or adjoint state");
        }
        stop_targets.push_back(static_cast<std::size_t>(rec - R.crossings.data()));
    }

    // Each ordering window closes at the tau crossing of chain state s - 2.
    std::vector<std::optional<std::size_t>> window_record;
    for (StateId s : R.monitored_states) {
        if (P.labels.empty() || !P.keys || P.labels[s].cls != StateClass::primary) continue;
        const int idx = P.labels[s].index;
        R.monitor.ordering.push_back({s, idx, std::numeric_limits<double>::infinity(), 0, std::nullopt});
        const StateId below = key_states(P.labels).chain[static_cast<std::size_t>(idx - 2)];
        std::optional<std::size_t> rec;
        for (std::size_t i = 0; i < R.crossings.size(); ++i) {
            if (R.crossings[i].state == below && R.crossings[i].threshold_name == "tau") rec = i;
        }
        window_record.push_back(rec);
    }

    const double crossing_margin = 10.0 * C.eval_tol;
    const double full = R.full_size;
    std::vector<double> prev_v, prev_q, grad;
    std::size_t next_snapshot = 0;
    std::size_t t = 0;

    for (;; ++t) {
        const Policy pi = softmax_policy(mdp, theta);
        const EvalResult ev = policy_evaluation(mdp, pi, P.mu, C.eval_tol);

        double sup = 0.0, mean = 0.0;
        for (StateId s = 0; s < n; ++s) {
            const double gap = v_star[s] - ev.v[s];
            sup = std::max(sup, std::abs(gap));
            mean += P.multiplicity[s] * gap;
        }
        mean /= full;

        InvariantMonitor& M = R.monitor;
        for (StateId s = 0; s < n; ++s) {
            if (ev.v[s] < M.min_v.value) M.min_v = {ev.v[s], t, s, std::nullopt};
            double sum = 0.0;
            for (std::size_t k = mdp.pair_begin(s); k < mdp.pair_end(s); ++k) sum += theta.values[k];
            if (std::abs(sum) > M.max_logit_sum.value) M.max_logit_sum = {std::abs(sum), t, s, std::nullopt};
            if (t > 0) {
                const double dv = ev.v[s] - prev_v[s];
                if (dv < M.min_delta_v.value) M.min_delta_v = {dv, t, s, std::nullopt};
                for (std::size_t k = mdp.pair_begin(s); k < mdp.pair_end(s); ++k) {
                    const double dq = ev.q[k] - prev_q[k];
                    if (dq < M.min_delta_q.value) M.min_delta_q = {dq, t, s, mdp.action_id(k)};
                }
            }
        }
        bool event = false;
        for (const Threshold& w : watch) {
            CrossingRecord& rec = R.crossings[w.record];
            if (!rec.t && ev.v[w.state] >= w.value - crossing_margin) {
                rec.t = t;
                rec.v = ev.v[w.state];
                if (auto k = mdp.find_pair(w.state, 1)) rec.pi_a1 = pi.values[*k];
                event = true;
            }
        }

        for (std::size_t i = 0; i < M.ordering.size(); ++i) {
            OrderingTrace& tr = M.ordering[i];
            if (tr.window_end) continue;
            const double m = ordering_margin(mdp, tr.state, theta);
            if (m < tr.min_margin) {
                tr.min_margin = m;
                tr.min_iter = t;
            }
            if (window_record[i] && R.crossings[*window_record[i]].t) tr.window_end = t;
        }

        std::optional<StopReason> stop;
        if (C.stop_sup_error && sup <= *C.stop_sup_error) {
            stop = StopReason::sup_threshold;
        } else if (C.stop_mean_error && mean <= *C.stop_mean_error) {
            stop = StopReason::mean_threshold;
        } else if (!stop_targets.empty() && std::all_of(stop_targets.begin(), stop_targets.end(), [&](std::size_t i) {
                       return R.crossings[i].t.has_value();
                   })) {
            stop = StopReason::crossing_target;
        } else if (t >= C.max_iter) {
            stop = StopReason::max_iter;
        }

        bool due = false;
        if (C.snapshot_stride > 0) {
            due = t % C.snapshot_stride == 0;
        } else if (t >= next_snapshot) {
            due = true;
            next_snapshot = t < 1000 ? t + 1 : std::max(t + 1, static_cast<std::size_t>(std::ceil(t * 1.2)));
        }
        if (due || event || stop) {
            IterationSnapshot snap{t, sup, mean, {}};
            for (StateId s : R.monitored_states) {
                snap.states.push_back(snapshot_state(mdp, s, theta, pi, ev, P.multiplicity[s]));
            }
            R.snapshots.push_back(std::move(snap));
        }

        if (stop) {
            R.stop_reason = *stop;
            R.final_sup_error = sup;
            R.final_mean_error = mean;
            R.final_v = ev.v;
            break;
        }

        if (algorithm == Algorithm::pg) {
            gradient_from_eval(mdp, pi, ev, P.multiplicity, grad);
        } else {
            grad.resize(mdp.num_pairs());
            const double scale = 1.0 / (1.0 - gamma);
            for (std::size_t k = 0; k < grad.size(); ++k) grad[k] = scale * ev.adv[k];
        }
        if (C.gradient_hook) C.gradient_hook(grad);
        for (std::size_t k = 0; k < grad.size(); ++k) theta.values[k] += C.eta * grad[k];
        check_finite_logits(theta.values, C.logit_limit, t + 1);

        prev_v = ev.v;
        prev_q = ev.q;
    }

    R.total_iterations = t;
    R.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return R;
}

SequenceReport sequence_bound_check(std::span<const double> x, SequenceMode mode, double c, double c_x) {
    if (x.empty()) throw Error(ErrorCode::invalid_argument, "sequence is empty");
    for (std::size_t t = 0; t < x.size(); ++t) {
        if (!(x[t] > 0.0)) {
            throw Error(ErrorCode::invalid_argument, "sequence entry " + std::to_string(t) + " is not positive");
        }
    }
    if (c < 0.0) throw Error(ErrorCode::invalid_argument, "constant must be non-negative");

    // Comparisons allow a relative slack of 1e-12 so exact equality cases pass.
    auto leq = [](double a, double b) { return a <= b + 1e-12 * std::max(std::abs(a), std::abs(b)); };
    SequenceReport rep;
    auto hyp_break = [&](std::size_t t) {
        if (rep.hypothesis_holds) {
            rep.hypothesis_holds = false;
            rep.hypothesis_break = t;
        }
    };
    auto violate = [&](std::size_t t, const std::string& why) {
        if (rep.consistent) {
            rep.consistent = false;
            rep.first_violation = t;
            rep.detail = why;
        }
    };
    const double x0 = x[0];

    switch (mode) {
    case SequenceMode::lower_decay:
        if (!leq(c * x0, 0.5)) hyp_break(0);
        for (std::size_t t = 0; t < x.size(); ++t) {
            if (t > 0 && (!leq(x[t], x[t - 1]) || !leq(x[t - 1] - c * x[t - 1] * x[t - 1], x[t]))) hyp_break(t);
            const double bound = 1.0 / (2.0 * c * static_cast<double>(t) + 1.0 / x0);
            if (!leq(bound, x[t])) violate(t, "x_t = " + format_real(x[t]) + " < " + format_real(bound));
        }
        break;
    case SequenceMode::upper_decay:
        for (std::size_t t = 0; t < x.size(); ++t) {
            if (t > 0 && !leq(x[t], x[t - 1] - c * x[t - 1] * x[t - 1])) hyp_break(t);
            const double bound = 1.0 / (c * static_cast<double>(t) + 1.0 / x0);
            if (!leq(x[t], bound)) violate(t, "x_t = " + format_real(x[t]) + " > " + format_real(bound));
        }
        break;
    case SequenceMode::hit_upper: {
        std::optional<std::size_t> t0;
        for (std::size_t t = 0; t < x.size(); ++t) {
            if (t > 0 && !leq(x[t - 1] + c * x[t - 1] * x[t - 1], x[t])) hyp_break(t);
            if (x[t] >= c_x) {
                t0 = t;
                break;
            }
        }
        if (!t0) {
            rep.detail = "threshold never reached";
            break;
        }
        const double bound = (1.0 + c * c_x) / (c * x0);
        if (!leq(static_cast<double>(*t0), bound)) {
            violate(*t0, "hitting time " + std::to_string(*t0) + " > " + format_real(bound));
        }
        break;
    }
    case SequenceMode::hit_lower:
        for (std::size_t t = 1; t < x.size(); ++t) {
            if (!leq(x[t], x[t - 1] + c * x[t - 1] * x[t - 1])) hyp_break(t);
            const double bound = (1.0 / x0 - 1.0 / x[t]) / c;
            if (!leq(bound, static_cast<double>(t))) {
                violate(t, "index " + std::to_string(t) + " < " + format_real(bound));
            }
        }
        break;
    }
    if (rep.consistent && rep.detail.empty()) rep.detail = "consistent";
    return rep;
}

} // namespace spg
