#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace stackgen {

// Seeded generator with platform-independent draws. std::mt19937_64 output is
// fixed by the standard, but the <random> distributions are not, so all
// draws used by the library go through the helpers below.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer on [0, bound) by rejection; bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    // Standard normal via Box-Muller (one value per call).
    double normal();

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// 64-bit finalizer from SplitMix64.
std::uint64_t mix64(std::uint64_t x);

// seed_task = mix64(mix64(mix64(master) ^ a) ^ b). Learner j / fold k tasks
// use (a, b) = (j + 1, k) with k = 0 for full-sample refits; the fold
// assignment and the final learner use reserved streams below.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b);

inline constexpr std::uint64_t kFoldStream = 0xF01D;
inline constexpr std::uint64_t kFinalStream = 0xF17A1;

// Process-wide generator playing the role of a host session's "set seed".
// Seed policy -1 consumes exactly one draw from it.
namespace global_rng {
void set_seed(std::uint64_t seed);
// Uniform integer on [0, 1e8].
std::uint64_t draw_seed();
std::uint64_t draw_count();
}  // namespace global_rng

inline constexpr std::uint64_t kDefaultGlobalSeed = 42;

}  // namespace stackgen
