#pragma once

#include <cstdint>

namespace refvid {

// splitmix64. Self-contained so that streams are bit-identical across
// compilers and platforms (std:: distributions are not).
struct Rng {
    uint64_t state = 0x853c49e6748fea9bULL;

    Rng() = default;
    explicit Rng(uint64_t seed) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0,1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo,hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0,n). n must be positive.
    int uniform_int(int n) { return static_cast<int>(next() % static_cast<uint64_t>(n)); }

    /// Uniform integer in [lo,hi] inclusive.
    int uniform_int(int lo, int hi) { return lo + uniform_int(hi - lo + 1); }

    bool coin(double p = 0.5) { return uniform() < p; }

    /// Derive an independent stream; used to decorrelate sub-generators.
    Rng fork(uint64_t salt) {
        Rng r(state ^ (salt * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
        r.next();
        return r;
    }
};

} // namespace refvid
