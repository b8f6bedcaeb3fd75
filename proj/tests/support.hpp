#pragma once

#include "spg/mdp.hpp"

#include <random>
#include <vector>

namespace spg::testing {

/// Dense random MDP: every state has `actions` actions, rewards in [-1, 1],
/// transitions drawn from a Dirichlet-like normalisation of uniforms.
inline TabularMdp random_mdp(std::size_t states, int actions, double gamma, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<ActionSpec>> specs(states);
    for (auto& row : specs) {
        for (int a = 0; a < actions; ++a) {
            ActionSpec spec{a, 2.0 * u(rng) - 1.0, {}};
            double total = 0.0;
            std::vector<double> w(states);
            for (auto& x : w) total += (x = u(rng) + 1e-3);
            for (std::size_t j = 0; j < states; ++j) spec.next.push_back({j, w[j] / total});
            row.push_back(spec);
        }
    }
    return TabularMdp(std::move(specs), gamma);
}

inline PolicyLogits random_logits(const TabularMdp& mdp, std::mt19937_64& rng, double scale = 2.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    PolicyLogits theta = zero_logits(mdp);
    for (auto& x : theta.values) x = u(rng);
    return theta;
}

inline StateDist random_dist(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    StateDist mu{std::vector<double>(n)};
    double total = 0.0;
    for (auto& x : mu.values) total += (x = u(rng));
    for (auto& x : mu.values) x /= total;
    return mu;
}

} // namespace spg::testing
