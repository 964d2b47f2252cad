#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace regret_forge {

/// Stateless 64-bit mixer (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x);

/**
 * A seeded pseudo-random stream. Every random draw in the library goes through
 * one of these, so a run is fully determined by the stream's state.
 *
 * Child streams are derived statelessly from (seed, indices) with derive(), so
 * parallel tasks get independent streams without touching shared state.
 */
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed = 0);

    /// Stream keyed by a seed and a path of indices; independent of call order.
    static RandomStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

    /// Draws a fresh 64-bit value; used to seed sub-streams for one purpose.
    std::uint64_t next_u64();

    double uniform();
    double normal();
    double normal(double mean, double stddev);
    double exponential(double rate = 1.0);

    /// Uniform integer in [0, n).
    int index(int n);

    /// Draws an index with probability proportional to weights (nonnegative, positive sum).
    int categorical(std::span<const double> weights);

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace regret_forge
