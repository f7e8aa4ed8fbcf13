/**
 * @file rng.hpp
 * @brief Seeded random streams. Every stochastic operation in the simulator
 * owns one of these, derived from (master seed, stream id), so reruns are
 * bit-identical. Gaussian draws use Box-Muller on the raw engine output
 * instead of std distributions, whose sequences differ between stdlibs.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cfm {

class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    Rng(uint64_t master_seed, uint64_t stream_id) : eng_(mix(master_seed, stream_id)) {}

    uint64_t next_u64() { return eng_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller; two engine draws per generated pair.
    double gauss() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0,1] so the log is finite
        const double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Uniform integer in [0, n) via the multiply-shift reduction.
    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(eng_()) * n) >> 64);
    }

private:
    static uint64_t mix(uint64_t master, uint64_t stream) {
        // splitmix64 finalizer over the pair; decorrelates neighboring streams
        uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Stream ids carved out of the master seed. Fixed so that adding a consumer
/// never shifts the draws of an existing one.
namespace stream {
inline constexpr uint64_t kScenario = 0;
inline constexpr uint64_t kTrainDrops = 1;
inline constexpr uint64_t kTestDrops = 2;
inline constexpr uint64_t kTestShadow = 3;
inline constexpr uint64_t kTraining = 4;
inline constexpr uint64_t kPolicyInit = 5;
inline constexpr uint64_t kFeatureNorm = 6;
} // namespace stream

} // namespace cfm
