#pragma once

#include <cstdint>

namespace visifrac {

// SplitMix64. All randomness in the project flows through this generator so
// that runs are reproducible from a single 64-bit seed, independent of
// platform and of how work is split across jobs (each job derives its own
// stream via split()).
struct SplitMix64 {
    uint64_t state;

    explicit SplitMix64(uint64_t seed) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0,1) with 53 bits of precision
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, bound)
    uint64_t below(uint64_t bound) { return next() % bound; }

    // independent stream for job i
    SplitMix64 split(uint64_t i) const {
        SplitMix64 s(state ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
        s.next();
        return s;
    }
};

}  // namespace visifrac
