#pragma once

#include <cstdint>
#include <limits>

namespace upmdp::rng {

/// Generator identifier, recorded in artifacts so results can be tied to the
/// exact stream construction.
inline constexpr const char* kGeneratorId = "sm64stream-v1";

/// splitmix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Purpose tags keep the streams drawn from one master seed independent:
/// synthesis scenarios never share draws with validation scenarios or with
/// tie-breaking inside the optimizers.
enum class Purpose : std::uint64_t {
    scenarios = 0x5343454eULL,    // "SCEN"
    validation = 0x56414c44ULL,   // "VALD"
    tie_break = 0x54494542ULL,    // "TIEB"
    policy_init = 0x494e4954ULL,  // "INIT"
    testing = 0x54455354ULL,      // "TEST"
};

/// Counter-based stream: the k-th output is a pure function of
/// (seed, purpose, index, k), so batches can be generated out of order or in
/// parallel with identical results.
class Stream {
  public:
    Stream(std::uint64_t seed, Purpose purpose, std::uint64_t index = 0)
        : key_(mix64(mix64(seed ^ mix64(static_cast<std::uint64_t>(purpose))) ^ mix64(index))) {}

    std::uint64_t next_u64() { return mix64(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL); }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform index in [0, n). Rejection sampling, so no modulo bias.
    std::size_t next_index(std::size_t n) {
        const std::uint64_t span = static_cast<std::uint64_t>(n);
        const std::uint64_t limit =
            std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
        for (;;) {
            const std::uint64_t x = next_u64();
            if (x < limit) return static_cast<std::size_t>(x % span);
        }
    }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// FNV-1a, used to fingerprint serialized distributions.
inline std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace upmdp::rng
