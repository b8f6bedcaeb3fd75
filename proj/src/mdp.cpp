#include "spg/mdp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace spg {

TabularMdp::TabularMdp(std::vector<std::vector<ActionSpec>> states, double gamma) : gamma_(gamma) {
    const std::size_t n = states.size();
    state_offsets_.reserve(n + 1);
    state_offsets_.push_back(0);
    transition_offsets_.push_back(0);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t i = 0; i < states[s].size(); ++i) {
            const ActionSpec& a = states[s][i];
            for (std::size_t j = 0; j < i; ++j) {
                if (states[s][j].id == a.id) {
                    throw Error(ErrorCode::invalid_argument,
                                "state " + std::to_string(s) + " lists action " + std::to_string(a.id) + " twice");
                }
            }
            action_ids_.push_back(a.id);
            rewards_.push_back(a.reward);
            for (const Transition& t : a.next) {
                if (t.next >= n) {
                    throw Error(ErrorCode::invalid_argument, "state " + std::to_string(s) + " action " +
                                                                 std::to_string(a.id) + " targets unknown state " +
                                                                 std::to_string(t.next));
                }
                transitions_.push_back(t);
            }
            transition_offsets_.push_back(transitions_.size());
        }
        state_offsets_.push_back(action_ids_.size());
    }
    compute_topological_order();
}

StateId TabularMdp::state_of(std::size_t pair) const {
    auto it = std::upper_bound(state_offsets_.begin(), state_offsets_.end(), pair);
    return static_cast<StateId>(it - state_offsets_.begin()) - 1;
}

std::optional<std::size_t> TabularMdp::find_pair(StateId s, ActionId a) const {
    for (std::size_t k = pair_begin(s); k < pair_end(s); ++k) {
        if (action_ids_[k] == a) return k;
    }
    return std::nullopt;
}

void TabularMdp::compute_topological_order() {
    const std::size_t n = num_states();
    std::vector<std::size_t> indegree(n, 0);
    std::vector<std::vector<StateId>> succ(n);
    for (StateId s = 0; s < n; ++s) {
        for (std::size_t k = pair_begin(s); k < pair_end(s); ++k) {
            for (const Transition& t : transitions(k)) {
                if (t.next == s || t.prob == 0.0) continue;
                succ[s].push_back(t.next);
            }
        }
        std::sort(succ[s].begin(), succ[s].end());
        succ[s].erase(std::unique(succ[s].begin(), succ[s].end()), succ[s].end());
        for (StateId next : succ[s]) ++indegree[next];
    }
    std::vector<StateId> order;
    order.reserve(n);
    std::vector<StateId> ready;
    for (StateId s = n; s-- > 0;) {
        if (indegree[s] == 0) ready.push_back(s);
    }
    while (!ready.empty()) {
        StateId s = ready.back();
        ready.pop_back();
        order.push_back(s);
        for (StateId next : succ[s]) {
            if (--indegree[next] == 0) ready.push_back(next);
        }
    }
    if (order.size() == n) topo_ = std::move(order);
}

std::vector<std::vector<ActionSpec>> TabularMdp::to_specs() const {
    std::vector<std::vector<ActionSpec>> out(num_states());
    for (StateId s = 0; s < num_states(); ++s) {
        for (std::size_t k = pair_begin(s); k < pair_end(s); ++k) {
            auto tr = transitions(k);
            out[s].push_back({action_ids_[k], rewards_[k], {tr.begin(), tr.end()}});
        }
    }
    return out;
}

ValidationReport validate_mdp(const TabularMdp& mdp) {
    ValidationReport report;
    const double gamma = mdp.gamma();
    if (!(gamma > 0.0 && gamma < 1.0)) {
        report.push_back({0, std::nullopt, "gamma-range", "gamma = " + format_real(gamma) + " not in (0, 1)"});
    }
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        if (mdp.num_actions(s) == 0) {
            report.push_back({s, std::nullopt, "no-actions", "state has an empty action set"});
            continue;
        }
        for (std::size_t k = mdp.pair_begin(s); k < mdp.pair_end(s); ++k) {
            const ActionId a = mdp.action_id(k);
            const double r = mdp.reward(k);
            if (!std::isfinite(r)) {
                report.push_back({s, a, "non-finite", "reward is not finite"});
            } else if (r < -1.0 || r > 1.0) {
                report.push_back({s, a, "reward-range", "reward " + format_real(r) + " outside [-1, 1]"});
            }
            double sum = 0.0;
            bool negative = false;
            for (const Transition& t : mdp.transitions(k)) {
                if (!std::isfinite(t.prob)) {
                    report.push_back({s, a, "non-finite", "transition probability is not finite"});
                }
                if (t.prob < 0.0) negative = true;
                sum += t.prob;
            }
            if (negative) report.push_back({s, a, "negative-prob", "transition vector has a negative entry"});
            if (std::abs(sum - 1.0) > 1e-12) {
                report.push_back({s, a, "row-sum", "transition probabilities sum to " + format_real(sum)});
            }
        }
    }
    return report;
}

PolicyLogits zero_logits(const TabularMdp& mdp) { return {std::vector<double>(mdp.num_pairs(), 0.0)}; }

StateDist uniform_dist(std::size_t num_states) {
    return {std::vector<double>(num_states, 1.0 / static_cast<double>(num_states))};
}

namespace {

template <class Real>
std::vector<Real> softmax_impl(const TabularMdp& mdp, const std::vector<double>& theta) {
    if (theta.size() != mdp.num_pairs()) {
        throw Error(ErrorCode::dimension_mismatch, "logit vector has " + std::to_string(theta.size()) +
                                                       " entries, MDP has " + std::to_string(mdp.num_pairs()) +
                                                       " state-action pairs");
    }
    std::vector<Real> pi(theta.size());
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        const std::size_t b = mdp.pair_begin(s), e = mdp.pair_end(s);
        if (b == e) continue;
        Real top = -std::numeric_limits<Real>::infinity();
        for (std::size_t k = b; k < e; ++k) {
            if (!std::isfinite(theta[k])) {
                throw Error(ErrorCode::non_finite, "logit of state " + std::to_string(s) + " is not finite");
            }
            top = std::max(top, static_cast<Real>(theta[k]));
        }
        Real z = 0;
        for (std::size_t k = b; k < e; ++k) {
            pi[k] = std::exp(static_cast<Real>(theta[k]) - top);
            z += pi[k];
        }
        for (std::size_t k = b; k < e; ++k) pi[k] /= z;
    }
    return pi;
}

void check_dims(const TabularMdp& mdp, std::size_t pi_size, std::size_t mu_size) {
    if (pi_size != mdp.num_pairs()) {
        throw Error(ErrorCode::dimension_mismatch, "policy has " + std::to_string(pi_size) + " entries, MDP has " +
                                                       std::to_string(mdp.num_pairs()) + " pairs");
    }
    if (mu_size != mdp.num_states()) {
        throw Error(ErrorCode::dimension_mismatch, "state distribution has " + std::to_string(mu_size) +
                                                       " entries, MDP has " + std::to_string(mdp.num_states()) +
                                                       " states");
    }
}

template <class Real>
struct Solution {
    std::vector<Real> v;
    std::vector<Real> d;
};

template <class Real>
std::vector<Real> policy_rewards(const TabularMdp& mdp, const std::vector<Real>& pi) {
    std::vector<Real> r(mdp.num_states(), Real(0));
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        for (std::size_t k = mdp.pair_begin(s); k < mdp.pair_end(s); ++k) {
            r[s] += pi[k] * static_cast<Real>(mdp.reward(k));
        }
    }
    return r;
}

template <class Real>
Solution<Real> solve_topological(const TabularMdp& mdp, const std::vector<Real>& pi, const std::vector<Real>& mu) {
    const auto& order = *mdp.topological_order();
    const std::size_t n = mdp.num_states();
    const Real gamma = static_cast<Real>(mdp.gamma());
    const std::vector<Real> r = policy_rewards(mdp, pi);

    Solution<Real> sol{std::vector<Real>(n, Real(0)), std::vector<Real>(n, Real(0))};
    std::vector<Real> self(n, Real(0));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const StateId s = *it;
        Real acc = r[s];
        for (std::size_t k = mdp.pair_begin(s); k < mdp.pair_end(s); ++k) {
            for (const Transition& t : mdp.transitions(k)) {
                const Real w = pi[k] * static_cast<Real>(t.prob);
                if (t.next == s) {
                    self[s] += w;
                } else {
                    acc += gamma * w * sol.v[t.next];
                }
            }
        }
        sol.v[s] = acc / (Real(1) - gamma * self[s]);
    }

    std::vector<Real>& d = sol.d;
    for (StateId s = 0; s < n; ++s) d[s] = (Real(1) - gamma) * mu[s];
    for (StateId s : order) {
        d[s] /= (Real(1) - gamma * self[s]);
        for (std::size_t k = mdp.pair_begin(s); k < mdp.pair_end(s); ++k) {
            for (const Transition& t : mdp.transitions(k)) {
                if (t.next != s) d[t.next] += gamma * d[s] * pi[k] * static_cast<Real>(t.prob);
            }
        }
    }
    return sol;
}

template <class Real>
Solution<Real> solve_iterative(const TabularMdp& mdp, const std::vector<Real>& pi, const std::vector<Real>& mu,
                               Real tol) {
    const std::size_t n = mdp.num_states();
    const Real gamma = static_cast<Real>(mdp.gamma());
    const std::vector<Real> r = policy_rewards(mdp, pi);
    // Contraction factor gamma: log(tol) / log(gamma) sweeps suffice from a unit gap.
    const double budget = 50.0 + 4.0 * std::log(static_cast<double>(tol)) / std::log(mdp.gamma());
    const std::size_t max_sweeps = static_cast<std::size_t>(std::clamp(budget, 100.0, 1e8));

    Solution<Real> sol{std::vector<Real>(n, Real(0)), std::vector<Real>(n, Real(0))};
    std::vector<Real> next(n);
    Real gap = 0;
    std::size_t sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        gap = 0;
        for (StateId s = 0; s < n; ++s) {
            Real acc = r[s];
            for (std::size_t k = mdp.pair_begin(s); k < mdp.pair_end(s); ++k) {
                for (const Transition& t : mdp.transitions(k)) {
                    acc += gamma * pi[k] * static_cast<Real>(t.prob) * sol.v[t.next];
                }
            }
            next[s] = acc;
            gap = std::max(gap, std::abs(acc - sol.v[s]));
        }
        sol.v.swap(next);
        if (gap <= tol) break;
    }
    if (sweep == max_sweeps) {
        throw NonConvergence("value system did not reach tolerance", static_cast<double>(gap));
    }

    for (sweep = 0; sweep < max_sweeps; ++sweep) {
        for (StateId s = 0; s < n; ++s) next[s] = (Real(1) - gamma) * mu[s];
        for (StateId s = 0; s < n; ++s) {
            for (std::size_t k = mdp.pair_begin(s); k < mdp.pair_end(s); ++k) {
                for (const Transition& t : mdp.transitions(k)) {
                    next[t.next] += gamma * sol.d[s] * pi[k] * static_cast<Real>(t.prob);
                }
            }
        }
        gap = 0;
        for (StateId s = 0; s < n; ++s) gap = std::max(gap, std::abs(next[s] - sol.d[s]));
        sol.d.swap(next);
        if (gap <= tol) break;
    }
    if (sweep == max_sweeps) {
        throw NonConvergence("visitation system did not reach tolerance", static_cast<double>(gap));
    }
    return sol;
}

template <class Real>
Solution<Real> solve(const TabularMdp& mdp, const std::vector<Real>& pi, const std::vector<Real>& mu, Real tol,
                     EvalMethod method) {
    if (method == EvalMethod::topological && !mdp.topological_order()) {
        throw Error(ErrorCode::invalid_argument, "MDP transition graph is cyclic; topological evaluation unavailable");
    }
    if (method == EvalMethod::topological || (method == EvalMethod::automatic && mdp.topological_order())) {
        return solve_topological(mdp, pi, mu);
    }
    return solve_iterative(mdp, pi, mu, tol);
}

} // namespace

Policy softmax_policy(const TabularMdp& mdp, const PolicyLogits& theta) {
    return {softmax_impl<double>(mdp, theta.values)};
}

EvalResult policy_evaluation(const TabularMdp& mdp, const Policy& pi, const StateDist& mu, double tol,
                             EvalMethod method) {
    if (!(tol > 0.0)) throw Error(ErrorCode::invalid_argument, "evaluation tolerance must be positive");
    check_dims(mdp, pi.values.size(), mu.values.size());

    Solution<double> sol = solve(mdp, pi.values, mu.values, tol, method);
    const double gamma = mdp.gamma();
    const std::size_t n = mdp.num_states();

    EvalResult out;
    out.q.resize(mdp.num_pairs());
    out.adv.resize(mdp.num_pairs());
    std::vector<double> pv(n, 0.0); // (P_pi V)(s)
    std::vector<double> pd(n, 0.0); // (P_pi^T d)(s)
    for (StateId s = 0; s < n; ++s) {
        for (std::size_t k = mdp.pair_begin(s); k < mdp.pair_end(s); ++k) {
            double acc = 0.0;
            for (const Transition& t : mdp.transitions(k)) {
                acc += t.prob * sol.v[t.next];
                pd[t.next] += pi.values[k] * t.prob * sol.d[s];
            }
            pv[s] += pi.values[k] * acc;
            out.q[k] = mdp.reward(k) + gamma * acc;
            out.adv[k] = out.q[k] - sol.v[s];
        }
    }
    double residual = 0.0;
    for (StateId s = 0; s < n; ++s) {
        double rpi = 0.0;
        for (std::size_t k = mdp.pair_begin(s); k < mdp.pair_end(s); ++k) rpi += pi.values[k] * mdp.reward(k);
        residual = std::max(residual, std::abs(sol.v[s] - rpi - gamma * pv[s]));
        residual = std::max(residual, std::abs(sol.d[s] - (1.0 - gamma) * mu.values[s] - gamma * pd[s]));
    }
    out.v = std::move(sol.v);
    out.visitation.values = std::move(sol.d);
    out.residual = residual;
    return out;
}

long double objective_extended(const TabularMdp& mdp, const PolicyLogits& theta, const StateDist& mu) {
    const std::vector<long double> pi = softmax_impl<long double>(mdp, theta.values);
    check_dims(mdp, pi.size(), mu.values.size());
    std::vector<long double> mu_ext(mu.values.begin(), mu.values.end());
    Solution<long double> sol = solve(mdp, pi, mu_ext, 1e-17L, EvalMethod::automatic);
    long double total = 0;
    for (StateId s = 0; s < mdp.num_states(); ++s) total += mu_ext[s] * sol.v[s];
    return total;
}

OptimalSolution value_iteration(const TabularMdp& mdp, double tol, std::size_t max_iter) {
    if (!(tol > 0.0)) throw Error(ErrorCode::invalid_argument, "value-iteration tolerance must be positive");
    const std::size_t n = mdp.num_states();
    const double gamma = mdp.gamma();

    // Gauss-Seidel sweep; in reverse topological order a single sweep is exact on DAGs.
    std::vector<StateId> sweep_order;
    if (const auto& topo = mdp.topological_order()) {
        sweep_order.assign(topo->rbegin(), topo->rend());
    } else {
        for (StateId s = 0; s < n; ++s) sweep_order.push_back(s);
    }

    OptimalSolution out;
    out.v_star.assign(n, 0.0);
    out.q_star.assign(mdp.num_pairs(), 0.0);
    out.greedy.assign(n, 0);

    auto backup = [&](StateId s, const std::vector<double>& v) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = mdp.pair_begin(s); k < mdp.pair_end(s); ++k) {
            double acc = 0.0;
            for (const Transition& t : mdp.transitions(k)) acc += t.prob * v[t.next];
            out.q_star[k] = mdp.reward(k) + gamma * acc;
            best = std::max(best, out.q_star[k]);
        }
        return best;
    };

    double residual = std::numeric_limits<double>::infinity();
    std::size_t iter = 0;
    while (true) {
        for (StateId s : sweep_order) {
            if (mdp.num_actions(s) > 0) out.v_star[s] = backup(s, out.v_star);
        }
        residual = 0.0;
        for (StateId s = 0; s < n; ++s) {
            if (mdp.num_actions(s) == 0) continue;
            residual = std::max(residual, std::abs(backup(s, out.v_star) - out.v_star[s]));
        }
        ++iter;
        if (residual <= tol) break;
        if (iter >= max_iter) {
            throw NonConvergence("value iteration stopped after " + std::to_string(iter) +
                                     " sweeps with residual " + format_real(residual),
                                 residual);
        }
    }
    // q_star now holds the backup of the final v_star; greedy uses the lowest action id among ties.
    for (StateId s = 0; s < n; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        ActionId arg = 0;
        for (std::size_t k = mdp.pair_begin(s); k < mdp.pair_end(s); ++k) {
            const double q = out.q_star[k];
            if (q > best || (q == best && mdp.action_id(k) < arg)) {
                best = q;
                arg = mdp.action_id(k);
            }
        }
        out.greedy[s] = arg;
    }
    out.residual = residual;
    return out;
}

std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

double parse_real(std::string_view token) {
    double x = 0.0;
    const char* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, x);
    if (ec != std::errc{} || ptr != end || token.empty()) {
        throw Error(ErrorCode::parse, "not a real number: '" + std::string(token) + "'");
    }
    return x;
}

std::size_t parse_count(std::string_view token) {
    std::size_t x = 0;
    const char* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, x);
    if (ec != std::errc{} || ptr != end || token.empty()) {
        throw Error(ErrorCode::parse, "not a non-negative integer: '" + std::string(token) + "'");
    }
    return x;
}

namespace {

ActionId parse_action(std::string_view token) {
    ActionId a = 0;
    const char* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, a);
    if (ec != std::errc{} || ptr != end || token.empty() || a < 0) {
        throw Error(ErrorCode::parse, "not an action id: '" + std::string(token) + "'");
    }
    return a;
}

} // namespace

void write_mdp_text(std::ostream& out, const TabularMdp& mdp) {
    out << "states " << mdp.num_states() << " gamma " << format_real(mdp.gamma()) << '\n';
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        for (std::size_t k = mdp.pair_begin(s); k < mdp.pair_end(s); ++k) {
            const ActionId a = mdp.action_id(k);
            out << "r " << s << ' ' << a << ' ' << format_real(mdp.reward(k)) << '\n';
            for (const Transition& t : mdp.transitions(k)) {
                out << "t " << s << ' ' << a << ' ' << t.next << ' ' << format_real(t.prob) << '\n';
            }
        }
    }
}

TabularMdp read_mdp_text(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& msg) -> Error {
        return Error(ErrorCode::parse, "line " + std::to_string(line_no) + ": " + msg);
    };

    std::size_t n = 0;
    double gamma = 0.0;
    bool have_header = false;
    std::vector<std::vector<ActionSpec>> states;
    std::vector<std::vector<bool>> has_reward;

    auto find_or_add = [&](StateId s, ActionId a) -> std::size_t {
        auto& acts = states[s];
        for (std::size_t i = 0; i < acts.size(); ++i) {
            if (acts[i].id == a) return i;
        }
        acts.push_back({a, 0.0, {}});
        has_reward[s].push_back(false);
        return acts.size() - 1;
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::vector<std::string> tok;
        for (std::string w; fields >> w;) tok.push_back(w);
        if (tok.empty()) continue;
        if (!have_header) {
            if (tok.size() != 4 || tok[0] != "states" || tok[2] != "gamma") {
                throw fail("expected header 'states N gamma G'");
            }
            n = parse_count(tok[1]);
            gamma = parse_real(tok[3]);
            states.resize(n);
            has_reward.resize(n);
            have_header = true;
            continue;
        }
        if (tok[0] == "r" && tok.size() == 4) {
            const StateId s = parse_count(tok[1]);
            if (s >= n) throw fail("state out of range");
            const std::size_t i = find_or_add(s, parse_action(tok[2]));
            if (has_reward[s][i]) throw fail("duplicate reward line");
            states[s][i].reward = parse_real(tok[3]);
            has_reward[s][i] = true;
        } else if (tok[0] == "t" && tok.size() == 5) {
            const StateId s = parse_count(tok[1]);
            const StateId next = parse_count(tok[3]);
            if (s >= n || next >= n) throw fail("state out of range");
            const std::size_t i = find_or_add(s, parse_action(tok[2]));
            states[s][i].next.push_back({next, parse_real(tok[4])});
        } else {
            throw fail("unrecognised record '" + line + "'");
        }
    }
    if (!have_header) throw Error(ErrorCode::parse, "missing 'states N gamma G' header");
    for (StateId s = 0; s < n; ++s) {
        for (std::size_t i = 0; i < states[s].size(); ++i) {
            if (!has_reward[s][i]) {
                throw Error(ErrorCode::parse, "state " + std::to_string(s) + " action " +
                                                  std::to_string(states[s][i].id) + " has no reward line");
            }
        }
    }
    return TabularMdp(std::move(states), gamma);
}

} // namespace spg
