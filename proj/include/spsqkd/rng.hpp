#pragma once

#include <cstdint>

// Deterministic, cross-platform random streams. Standard-library distributions
// are implementation-defined, so everything here is spelled out: splitmix64
// expands seeds, xoshiro256** generates the stream, and doubles come from the
// top 53 bits. Identical seeds give identical streams on every platform.

namespace spsqkd::rng {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256** 1.0 (Blackman & Vigna), state seeded via splitmix64.
class Xoshiro256 {
  public:
    explicit Xoshiro256(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : state_) w = splitmix64_next(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool next_bernoulli(double p) { return next_double() < p; }

    bool next_bit() { return (next_u64() >> 63) != 0; }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t state_[4];
};

// Stream for one simulation block: mixes the run seed with the block index so
// blocks can be processed in any order (or on any thread) with identical
// results.
inline Xoshiro256 block_stream(std::uint64_t seed, std::uint64_t block_index) {
    std::uint64_t sm = seed;
    std::uint64_t a = splitmix64_next(sm);
    sm = a ^ (0xd1342543de82ef95ULL * (block_index + 1));
    return Xoshiro256(splitmix64_next(sm));
}

}  // namespace spsqkd::rng
