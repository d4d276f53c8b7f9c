#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

// Counter-based randomness: the n-th draw of stream (seed, id) is a pure
// function of (seed, id, n), so shots can be simulated in any order or on
// any number of threads and still produce identical records.
namespace ionsim {

namespace detail {
// SplitMix64 output finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}  // namespace detail

/// Satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    constexpr CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(detail::mix64(detail::mix64(seed + detail::kGolden) ^ (stream * 0xd1b54a32d192ed03ULL + 1))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() { return detail::mix64(key_ + (++counter_) * detail::kGolden); }

    std::uint64_t draws() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Distinct stream families derived from one master seed.
enum class StreamDomain : std::uint64_t {
    shot = 0,
    conditioned_click = 1,
    experiment = 2,
};

inline CounterRng make_stream(std::uint64_t seed, StreamDomain domain, std::uint64_t index) {
    return CounterRng(seed ^ detail::mix64(static_cast<std::uint64_t>(domain) + 0x5eed), index);
}

/// Uniform double in [0, 1) with 53 random bits.
template <class Rng>
double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class Rng>
bool bernoulli(Rng& rng, double p) {
    return uniform01(rng) < p;
}

/// Exponential waiting time; +∞ for a zero rate.
template <class Rng>
double exponential(Rng& rng, double rate) {
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log1p(-uniform01(rng)) / rate;
}

}  // namespace ionsim
