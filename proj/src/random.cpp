#include "regret_forge/random.hpp"

#include "regret_forge/errors.hpp"

#include <cmath>

namespace regret_forge {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

RandomStream::RandomStream(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

RandomStream RandomStream::derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = mix64(seed);
    for (std::uint64_t index : path) {
        h = mix64(h ^ mix64(index + 0x632be59bd9b4e019ULL));
    }
    return RandomStream(h);
}

std::uint64_t RandomStream::next_u64() { return engine_(); }

double RandomStream::uniform() { return std::generate_canonical<double, 53>(engine_); }

double RandomStream::normal() { return normal_(engine_); }

double RandomStream::normal(double mean, double stddev) { return mean + stddev * normal_(engine_); }

double RandomStream::exponential(double rate) {
    // 1 - u lies in (0, 1]
    return -std::log1p(-uniform()) / rate;
}

int RandomStream::index(int n) {
    if (n <= 0) throw InvalidArgs("RandomStream::index: n must be positive");
    std::uniform_int_distribution<int> dist(0, n - 1);
    return dist(engine_);
}

int RandomStream::categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw InvalidArgs("RandomStream::categorical: weights must have positive sum");
    double u = uniform() * total;
    int last_positive = -1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        last_positive = static_cast<int>(i);
        u -= weights[i];
        if (u < 0.0) return last_positive;
    }
    return last_positive;
}

} // namespace regret_forge
