#include "ivsynth/rng.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>

namespace ivsynth {

std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(mix64(seed + kGolden) ^ (stream * 0xD1342543DE82EF95ULL + 1))) {}

CounterRng::CounterRng(std::uint64_t key, RawKey) : key_(key) {}

CounterRng CounterRng::substream(std::uint64_t stream) const {
    return CounterRng(mix64(key_ ^ (stream * 0xD1342543DE82EF95ULL + 1)), RawKey{});
}

std::uint64_t CounterRng::bits(std::uint64_t counter) const {
    return mix64(key_ + counter * kGolden);
}

double CounterRng::uniform(std::uint64_t counter) const {
    // 53-bit mantissa offset by 1/2 keeps the value strictly inside (0,1).
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t counter) const {
    return normal_quantile(uniform(counter));
}

std::uint64_t CounterRng::uniform_index(std::uint64_t counter, std::uint64_t n) const {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(bits(counter)) * n) >> 64);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label) {
    return mix64(mix64(seed + kGolden) ^ (label * 0xD1342543DE82EF95ULL + 1));
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("normal_quantile: p must lie in (0,1)");
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

}  // namespace ivsynth
