#pragma once

#include <cstdint>

namespace ivsynth {

// Counter-based generator: every variate is a pure function of
// (seed, stream, counter). Draw order, thread count, and platform do not
// affect the realized values.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

    // Derives an independent child stream from this one.
    CounterRng substream(std::uint64_t stream) const;

    std::uint64_t bits(std::uint64_t counter) const;

    // Uniform on the open interval (0,1).
    double uniform(std::uint64_t counter) const;

    // Standard normal via inverse CDF of uniform(counter).
    double normal(std::uint64_t counter) const;

    // Uniform integer in [0, n), n >= 1.
    std::uint64_t uniform_index(std::uint64_t counter, std::uint64_t n) const;

private:
    struct RawKey {};
    CounterRng(std::uint64_t key, RawKey);
    std::uint64_t key_;
};

// Phi^{-1}(p) for p in (0,1).
double normal_quantile(double p);

// Stable 64-bit child seed for (seed, label) trees.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label);

// 64-bit finalizing hash (SplitMix64).
std::uint64_t mix64(std::uint64_t x);

}  // namespace ivsynth
