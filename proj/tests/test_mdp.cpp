#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spg/mdp.hpp"
#include "support.hpp"

#include <cmath>
#include <sstream>

using namespace spg;
using spg::testing::random_logits;
using spg::testing::random_mdp;

namespace {

TabularMdp two_state_chain() {
    // 0 absorbing, 1 moves to 0 with reward 1 or stays with reward 0.
    return TabularMdp({{{0, 0.0, {{0, 1.0}}}}, {{0, 0.0, {{1, 1.0}}}, {1, 1.0, {{0, 1.0}}}}}, 0.9);
}

bool has_rule(const ValidationReport& r, const std::string& rule) {
    for (const auto& v : r) {
        if (v.rule == rule) return true;
    }
    return false;
}

// Plain geometric rollout estimate of V(start).
struct Rollout {
    double mean;
    double stderr_;
};

Rollout rollout_value(const TabularMdp& mdp, const Policy& pi, StateId start, std::size_t episodes, std::size_t horizon,
                      std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t e = 0; e < episodes; ++e) {
        StateId s = start;
        double ret = 0.0, disc = 1.0;
        for (std::size_t k = 0; k < horizon; ++k) {
            double x = u(rng);
            std::size_t pair = mdp.pair_begin(s);
            for (; pair + 1 < mdp.pair_end(s); ++pair) {
                if ((x -= pi.values[pair]) < 0) break;
            }
            ret += disc * mdp.reward(pair);
            disc *= mdp.gamma();
            double y = u(rng);
            StateId next = mdp.transitions(pair).back().next;
            for (const auto& tr : mdp.transitions(pair)) {
                if ((y -= tr.prob) < 0) {
                    next = tr.next;
                    break;
                }
            }
            s = next;
        }
        sum += ret;
        sum2 += ret * ret;
    }
    const double n = static_cast<double>(episodes);
    const double mean = sum / n;
    return {mean, std::sqrt((sum2 / n - mean * mean) / n)};
}

} // namespace

TEST_CASE("validation accepts a well-formed chain") { CHECK(validate_mdp(two_state_chain()).empty()); }

TEST_CASE("validation flags a short row and an out-of-range reward") {
    TabularMdp short_row({{{0, 0.0, {{0, 0.9}}}}}, 0.9);
    auto r = validate_mdp(short_row);
    REQUIRE(r.size() == 1);
    CHECK(r[0].rule == "row-sum");

    TabularMdp big_reward({{{0, 1.5, {{0, 1.0}}}}}, 0.9);
    r = validate_mdp(big_reward);
    REQUIRE(r.size() == 1);
    CHECK(r[0].rule == "reward-range");
}

TEST_CASE("validation flags missing actions, negative probabilities and gamma") {
    CHECK(has_rule(validate_mdp(TabularMdp({{}}, 0.9)), "no-actions"));
    CHECK(has_rule(validate_mdp(TabularMdp({{{0, 0.0, {{0, 1.5}, {0, -0.5}}}}}, 0.9)), "negative-prob"));
    CHECK(has_rule(validate_mdp(TabularMdp({{{0, 0.0, {{0, 1.0}}}}}, 1.0)), "gamma-range"));
}

TEST_CASE("construction rejects structural errors") {
    CHECK_THROWS_AS(TabularMdp({{{0, 0.0, {{3, 1.0}}}}}, 0.9), Error);
    CHECK_THROWS_AS(TabularMdp({{{0, 0.0, {{0, 1.0}}}, {0, 0.0, {{0, 1.0}}}}}, 0.9), Error);
}

TEST_CASE("softmax reference values") {
    TabularMdp three({{{0, 0, {{0, 1}}}, {1, 0, {{0, 1}}}, {2, 0, {{0, 1}}}}}, 0.5);
    Policy pi = softmax_policy(three, zero_logits(three));
    for (double p : pi.values) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    TabularMdp two({{{0, 0, {{0, 1}}}, {1, 0, {{0, 1}}}}}, 0.5);
    for (double c : {-800.0, 0.0, 3.5, 700.0}) {
        pi = softmax_policy(two, PolicyLogits{{c, c}});
        CHECK(pi.values[0] == 0.5);
        CHECK(pi.values[1] == 0.5);
    }
    pi = softmax_policy(two, PolicyLogits{{std::log(2.0), 0.0}});
    CHECK(std::abs(pi.values[0] - 2.0 / 3.0) < 1e-15);
    CHECK(std::abs(pi.values[1] - 1.0 / 3.0) < 1e-15);

    CHECK_THROWS_AS(softmax_policy(two, PolicyLogits{{NAN, 0.0}}), Error);
    CHECK_THROWS_AS(softmax_policy(two, PolicyLogits{{0.0}}), Error);
}

TEST_CASE("absorbing state under a point mass") {
    TabularMdp mdp = two_state_chain();
    auto ev = policy_evaluation(mdp, softmax_policy(mdp, zero_logits(mdp)), StateDist{{1.0, 0.0}}, 1e-14);
    CHECK(ev.v[0] == 0.0);
    CHECK(ev.visitation.values[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(ev.visitation.values[1] == 0.0);
}

TEST_CASE("policy evaluation agrees with Monte Carlo rollouts") {
    std::mt19937_64 rng(11);
    TabularMdp mdp = random_mdp(5, 3, 0.9, rng);
    Policy pi = softmax_policy(mdp, random_logits(mdp, rng));
    auto ev = policy_evaluation(mdp, pi, uniform_dist(5), 1e-13);
    for (StateId s : {StateId{0}, StateId{3}}) {
        auto mc = rollout_value(mdp, pi, s, 100000, 220, rng);
        INFO("state " << s << " exact " << ev.v[s] << " rollout " << mc.mean << " +- " << mc.stderr_);
        CHECK(std::abs(mc.mean - ev.v[s]) <= 3.0 * mc.stderr_);
    }
}

TEST_CASE("evaluation identities: Q, advantage and visitation balance") {
    std::mt19937_64 rng(3);
    TabularMdp mdp = random_mdp(6, 2, 0.8, rng);
    Policy pi = softmax_policy(mdp, random_logits(mdp, rng));
    StateDist mu = spg::testing::random_dist(6, rng);
    auto ev = policy_evaluation(mdp, pi, mu, 1e-14);
    double mass = 0.0;
    for (StateId s = 0; s < 6; ++s) {
        double v = 0.0, adv = 0.0;
        for (auto i = mdp.pair_begin(s); i < mdp.pair_end(s); ++i) {
            v += pi.values[i] * ev.q[i];
            adv += pi.values[i] * ev.adv[i];
        }
        CHECK(v == doctest::Approx(ev.v[s]).epsilon(1e-12));
        CHECK(std::abs(adv) < 1e-12);
        mass += ev.visitation.values[s];
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    // d = (1 - gamma) mu + gamma P_pi^T d
    std::vector<double> rhs(6);
    for (StateId s = 0; s < 6; ++s) rhs[s] = (1 - mdp.gamma()) * mu.values[s];
    for (StateId s = 0; s < 6; ++s) {
        for (auto i = mdp.pair_begin(s); i < mdp.pair_end(s); ++i) {
            for (const auto& tr : mdp.transitions(i)) {
                rhs[tr.next] += mdp.gamma() * ev.visitation.values[s] * pi.values[i] * tr.prob;
            }
        }
    }
    for (StateId s = 0; s < 6; ++s) CHECK(rhs[s] == doctest::Approx(ev.visitation.values[s]).epsilon(1e-12));
}

TEST_CASE("topological and iterative evaluation agree on an acyclic MDP") {
    // 3 -> {2, 1}, 2 -> 1, 1 -> 0, with self-loops.
    TabularMdp mdp({{{0, 0.0, {{0, 1.0}}}},
                    {{0, 0.5, {{0, 0.7}, {1, 0.3}}}, {1, -0.2, {{1, 0.5}, {0, 0.5}}}},
                    {{0, 0.1, {{1, 1.0}}}, {1, 0.9, {{2, 0.6}, {0, 0.4}}}},
                    {{0, -1.0, {{2, 0.5}, {1, 0.5}}}, {1, 0.3, {{3, 0.2}, {2, 0.8}}}}},
                   0.95);
    REQUIRE(mdp.topological_order().has_value());
    std::mt19937_64 rng(5);
    Policy pi = softmax_policy(mdp, random_logits(mdp, rng));
    auto a = policy_evaluation(mdp, pi, uniform_dist(4), 1e-14, EvalMethod::topological);
    auto b = policy_evaluation(mdp, pi, uniform_dist(4), 1e-14, EvalMethod::iterative);
    for (StateId s = 0; s < 4; ++s) {
        CHECK(a.v[s] == doctest::Approx(b.v[s]).epsilon(1e-12));
        CHECK(a.visitation.values[s] == doctest::Approx(b.visitation.values[s]).epsilon(1e-12));
    }
    std::mt19937_64 rng2(1);
    CHECK_THROWS_AS(policy_evaluation(random_mdp(3, 2, 0.9, rng2), Policy{std::vector<double>(6, 0.5)}, uniform_dist(3),
                                      1e-12, EvalMethod::topological),
                    Error);
}

TEST_CASE("value iteration on trivial and brute-forced MDPs") {
    TabularMdp zero({{{0, 0.0, {{0, 1.0}}}}}, 0.9);
    CHECK(value_iteration(zero, 1e-12).v_star[0] == 0.0);

    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        TabularMdp mdp = random_mdp(3, 3, 0.9, rng);
        auto opt = value_iteration(mdp, 1e-13);
        // Enumerate all 27 deterministic policies.
        std::vector<double> best(3, -1e9);
        for (int code = 0; code < 27; ++code) {
            Policy pi{std::vector<double>(9, 0.0)};
            for (int s = 0, c = code; s < 3; ++s, c /= 3) pi.values[3 * s + c % 3] = 1.0;
            auto ev = policy_evaluation(mdp, pi, uniform_dist(3), 1e-14);
            for (int s = 0; s < 3; ++s) best[s] = std::max(best[s], ev.v[s]);
        }
        for (int s = 0; s < 3; ++s) CHECK(opt.v_star[s] == doctest::Approx(best[s]).epsilon(1e-10));
    }
}

TEST_CASE("value iteration reports non-convergence") {
    std::mt19937_64 rng(2);
    CHECK_THROWS_AS(value_iteration(random_mdp(4, 2, 0.99, rng), 1e-14, 3), NonConvergence);
}

TEST_CASE("text format round-trips exactly") {
    std::mt19937_64 rng(9);
    TabularMdp mdp = random_mdp(4, 2, 0.37, rng);
    std::ostringstream a;
    write_mdp_text(a, mdp);
    std::istringstream in(a.str());
    TabularMdp back = read_mdp_text(in);
    std::ostringstream b;
    write_mdp_text(b, back);
    CHECK(a.str() == b.str());
    CHECK(back.gamma() == mdp.gamma());
    for (std::size_t i = 0; i < mdp.num_pairs(); ++i) CHECK(back.reward(i) == mdp.reward(i));
}

TEST_CASE("text parser rejects malformed input") {
    for (const char* bad : {"", "states 2\n", "states 1 gamma 0.9\nr 0 0 x\n", "states 1 gamma 0.9\nt 0 0 3 1\n",
                            "states 1 gamma 0.9\nq 0 0\n", "states 1 gamma 0.9\nr 0 -1 0\nt 0 -1 0 1\n"}) {
        std::istringstream in(bad);
        INFO(bad);
        CHECK_THROWS_AS(read_mdp_text(in), Error);
    }
}

TEST_CASE("real formatting and strict parsing") {
    CHECK(format_real(0.1) == "0.10000000000000001");
    CHECK(parse_real(format_real(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK_THROWS_AS(parse_real("1.0x"), Error);
    CHECK_THROWS_AS(parse_real(""), Error);
    CHECK(parse_count("42") == 42);
    CHECK_THROWS_AS(parse_count("-1"), Error);
}
