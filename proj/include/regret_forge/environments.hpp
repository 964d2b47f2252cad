#pragma once

#include "regret_forge/mdp.hpp"
#include "regret_forge/random.hpp"

#include <optional>
#include <vector>

namespace regret_forge {

/// Deep Sea benchmark parameters; unset cost and slip scale with the size.
struct DeepSeaSpec {
    int size = 10;
    std::optional<double> move_cost;  // reward of a right move, -0.1 / size by default
    double bonus = 1.0;
    std::optional<double> slip;       // 1 / size by default

    double resolved_move_cost() const { return move_cost.value_or(-0.1 / size); }
    double resolved_slip() const { return slip.value_or(1.0 / size); }
};

inline constexpr int kLeft = 0;
inline constexpr int kRight = 1;

/// State id of column x at depth d: x * (M + 1) + d.
inline int deep_sea_state(int size, int x, int depth) { return x * (size + 1) + depth; }

/**
 * Deep Sea: S = (M+1)^2, A = 2, H = M, start at (0, 0). Depth always grows by
 * one; left moves x down deterministically, right moves x up with probability
 * 1 - slip. Each right move costs move_cost; reaching (M, M) pays bonus as the
 * terminal reward.
 */
TabularMDP make_deep_sea(const DeepSeaSpec& spec);

/**
 * Random MDP whose optimal-action margin is at least min_margin. Rewards are
 * uniform in [-1, 1], transition rows and nu are flat-Dirichlet draws.
 * Rejection-sampled; throws GenerationFailed after max_attempts draws.
 */
TabularMDP make_random_margin_mdp(int num_states, int num_actions, int horizon, double min_margin,
                                  RandomStream& rng, int max_attempts = 1000);

struct RandomHypothesisOptions {
    int count = 4;
    int num_states = 2;
    int num_actions = 2;
    int horizon = 2;
    double min_margin = 0.3;
    /// Reject sets whose smallest reachable occupancy falls below this.
    double min_p_underbar = 0.0;
    /// Require at least two distinct canonical optimal policies in the set.
    bool distinct_policies = true;
    int max_attempts = 1000;
};

/// Hypotheses sharing r and nu and differing only in P, each margin-certified.
std::vector<TabularMDP> make_random_hypothesis_set(const RandomHypothesisOptions& options, RandomStream& rng);

} // namespace regret_forge
