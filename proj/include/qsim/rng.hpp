#pragma once

#include <cstdint>

namespace qsim {

// Deterministic seeded stream based on the splitmix64 mixer. Every random
// decision in a simulation draws from a stream derived from the master seed
// by fixed key derivation, so a run is a pure function of (spec, seed) and
// agents never share randomness.
class RngStream {
public:
    explicit RngStream(uint64_t seed = 0) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    /// Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return next_double() < p; }

    /// Uniform integer in [0, n).
    uint64_t next_below(uint64_t n) {
        // n is tiny in this code base (server counts); modulo bias is ~2^-60
        return next_u64() % n;
    }

    double uniform(double lo, double hi) {
        return lo + next_double() * (hi - lo);
    }

    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    uint64_t state_;
};

enum class StreamPurpose : uint64_t {
    world = 1,    // arrivals and service draws
    agent = 2,    // one per agent incarnation
    refresh = 3,  // dynamic-queue refresh process
};

/// Derive an independent stream from the master seed. `index` selects the
/// agent, `incarnation` separates successive lives of a dynamically
/// replaced queue.
inline RngStream derive_stream(uint64_t master_seed, StreamPurpose purpose,
                               uint64_t index = 0, uint64_t incarnation = 0) {
    uint64_t key = RngStream::mix(master_seed ^ RngStream::mix(static_cast<uint64_t>(purpose)));
    key = RngStream::mix(key ^ RngStream::mix(index + 0x51ED2701));
    key = RngStream::mix(key ^ RngStream::mix(incarnation + 0xA511E9B3));
    return RngStream(key);
}

} // namespace qsim
