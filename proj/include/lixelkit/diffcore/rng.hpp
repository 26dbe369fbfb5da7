#pragma once

#include <cstdint>
#include <random>

namespace lixelkit::diff {

/// splitmix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0);

/// Explicitly seeded generator. Nothing in the toolkit draws from a global.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

    double uniform() { return uniform_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal(double mean = 0.0, double stddev = 1.0) { return mean + stddev * normal_(engine_); }
    std::size_t index(std::size_t n);
    std::uint64_t next() { return engine_(); }

    /// Independent child stream keyed by `stream`.
    Rng fork(std::uint64_t stream) { return Rng(mix_seed(next(), stream)); }

private:
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace lixelkit::diff
