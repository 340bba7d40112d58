#pragma once

#include <cstdint>
#include <random>

namespace liftgan {

// Seeded PRNG used by every stochastic component.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The distribution helpers below are written out by hand because
// the std:: distributions are implementation-defined, and logs, samples and
// training histories must be byte-identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [lo, hi], rejection sampled (no modulo bias).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto range = static_cast<std::uint64_t>(hi - lo) + 1;
        if (range == 0) return lo + static_cast<std::int64_t>(engine_());
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return lo + static_cast<std::int64_t>(x % range);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Independent stream derived from this generator's seed and a stream id.
    // Does not advance this generator.
    Rng fork(std::uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream + 0x632be59bd9b4e019ULL))); }

    bool operator==(const Rng&) const = default;

private:
    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace liftgan
