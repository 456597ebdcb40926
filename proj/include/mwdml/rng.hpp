#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace mwdml {

/// SplitMix64 finalizer: a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Derives a stream key from a base seed and an ordered list of coordinates.
/// Distinct coordinate tuples give unrelated keys, so streams can be drawn in any order.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys)
{
    std::uint64_t h = mix64(seed ^ 0x6A09E667F3BCC909ull);
    for (auto k : keys)
        h = mix64(h ^ mix64(k + 0x3C6EF372FE94F82Bull));
    return h;
}

/// Counter-based generator: output j is mix64(key + j * golden). Satisfies
/// UniformRandomBitGenerator so it plugs into <random> distributions.
class CounterRng
{
  public:
    using result_type = std::uint64_t;

    constexpr explicit CounterRng(std::uint64_t key) : key_(key) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()()
    {
        ++counter_;
        return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ull);
    }

    /// Uniform on the open interval (0, 1) with 53 random bits.
    constexpr double uniform()
    {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace mwdml
