#ifndef cqrrpt_rng_hh
#define cqrrpt_rng_hh

#include <cmath>
#include <cstdint>

namespace cqrrpt {

// =============================================================================
/// Counter-based RNG with random access: output i is a pure function of
/// (seed, i). One seed drives one stream; streams never carry mutable state,
/// so sampled operators are bitwise reproducible and safe to share.
///
class CounterRng {
public:
    explicit CounterRng(uint64_t seed) : seed_(seed) {}

    uint64_t bits(uint64_t counter) const {
        // splitmix64 evaluated at seed + (counter+1) * golden gamma
        uint64_t z = seed_ + (counter + 1) * 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in (0, 1].
    double uniform01(uint64_t counter) const {
        return static_cast<double>((bits(counter) >> 11) + 1) * 0x1.0p-53;
    }

    // Standard normal, one value per counter (Box-Muller, cosine branch).
    double normal(uint64_t counter) const {
        double u1 = uniform01(2 * counter);
        double u2 = static_cast<double>(bits(2 * counter + 1) >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // Integer in [0, bound) by rejection-free multiply-shift (bound <= 2^32).
    uint64_t below(uint64_t counter, uint64_t bound) const {
        return (static_cast<unsigned __int128>(bits(counter)) * bound) >> 64;
    }

    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
};

// Derive an independent stream seed from a base seed and a salt.
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    CounterRng r(seed);
    return r.bits(0x5eedULL + salt);
}

} // namespace cqrrpt

#endif
