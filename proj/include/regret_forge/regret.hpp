#pragma once

#include "regret_forge/mdp.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace regret_forge {

/// Per-episode shortfall against the optimal expected return, with its running sum.
struct RegretCurve {
    std::vector<double> per_episode;
    std::vector<double> cumulative;
    std::uint64_t seed = 0;
    std::string agent;
    std::string config_snapshot;

    std::size_t episodes() const { return per_episode.size(); }
    double final_cumulative() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

/// Regret of realized returns against sum_s nu(s) V*_0(s) of env.
RegretCurve compute_regret(const TabularMDP& env, std::span<const double> returns);

/// Same, against a precomputed optimal value.
RegretCurve compute_regret(double optimal_value, std::span<const double> returns);

} // namespace regret_forge
