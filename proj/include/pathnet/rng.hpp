#pragma once

#include <cstdint>

namespace pathnet {

/// Splittable counter-style PRNG (splitmix64). A stream is fully determined
/// by (seed, stream_id), so serial and concurrent runs can carve out disjoint
/// reproducible streams without sharing state. All draw helpers are
/// implemented by hand so sequences are identical across platforms.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    /// Child stream with the same seed and a derived stream id. Children of
    /// distinct ids (and the parent) produce decorrelated sequences.
    RngStream split(std::uint64_t child_id) const;

    std::uint64_t next_u64();

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);
    /// Uniform integer in [lo, hi) without modulo bias. Requires lo < hi.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    bool bernoulli(double p);

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t state_;
};

} // namespace pathnet
