#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace draft {

// xoshiro256** with splitmix64 seeding. Hand-rolled instead of <random>
// because the checkpoint format serializes raw generator state and std
// engines do not pin their word layout across library implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
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

    // Uniform in [0, 1): 53 random mantissa bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n == 0 is the caller's bug; modulo bias is
    // irrelevant at the magnitudes used here (n far below 2^32).
    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller. The second value of each pair is
    // discarded so that one draw always consumes exactly two u64s; the state
    // stream then does not depend on call parity, which keeps serialized
    // state equivalent to the call history.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) {  // uniform() can return exactly 0
            u1 = uniform();
            u2 = uniform();
        }
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double normal(double mean, double stddev) {
        return mean + stddev * normal();
    }

    // Independent child stream: hash the parent's next word with a label so
    // sibling forks never collide. Used to give each utterance / each stage
    // its own deterministic stream.
    Rng fork(std::uint64_t label) {
        std::uint64_t x = next_u64() ^ (0x9e3779b97f4a7c15ULL * (label + 1));
        Rng child(0);
        for (auto& word : child.state_) word = splitmix64(x);
        return child;
    }

    std::vector<std::uint64_t> serialize() const {
        return {state_[0], state_[1], state_[2], state_[3]};
    }

    // Returns false when the word count is wrong (caller decides severity).
    bool deserialize(const std::vector<std::uint64_t>& words) {
        if (words.size() != 4) return false;
        for (int i = 0; i < 4; ++i) state_[i] = words[i];
        return true;
    }

    bool operator==(const Rng& other) const = default;

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_[4] = {};
};

}  // namespace draft
