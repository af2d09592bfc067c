#pragma once

#include <cmath>
#include <cstdint>

namespace drf {

// Mixer used for seeding and for deriving independent substreams.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// xoshiro256++ with a hand-rolled Box-Muller transform. std::normal_distribution
// is implementation-defined, and run traces must be reproducible byte for byte,
// so the generator and the gaussian path are both pinned here.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : seed_(seed) {
        uint64_t s = seed;
        for (auto& w : state_) {
            s    = splitmix64(s);
            w    = s;
        }
        // All-zero state is invalid for xoshiro; splitmix output of any seed
        // never yields four zero words in a row, but guard anyway.
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t      = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // Box-Muller; u1 in (0,1] so the log is finite.
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r  = std::sqrt(-2.0 * std::log(u1));
        const double a  = 2.0 * M_PI * u2;
        spare_          = r * std::sin(a);
        has_spare_      = true;
        return r * std::cos(a);
    }

    // Derived from the original seed, not the current position, so substreams
    // are stable no matter how much of the parent has been consumed.
    RngStream substream(uint64_t tag) const { return RngStream(splitmix64(seed_ ^ splitmix64(tag))); }

    uint64_t seed() const { return seed_; }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t seed_;
    uint64_t state_[4];
    double spare_    = 0.0;
    bool has_spare_  = false;
};

}  // namespace drf
