#include "pathnet/rng.hpp"

#include <cassert>

namespace pathnet {
namespace {

std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id),
      state_(mix64(mix64(seed) ^ mix64(stream_id ^ 0xda3e39cb94b95bdbULL))) {}

RngStream RngStream::split(std::uint64_t child_id) const {
    return RngStream(seed_, mix64(stream_id_) ^ mix64(child_id + 1));
}

std::uint64_t RngStream::next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
    assert(lo < hi);
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo);
    // rejection sampling to avoid modulo bias
    const std::uint64_t threshold = (0ULL - range) % range;
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) {
            return lo + static_cast<std::int64_t>(r % range);
        }
    }
}

bool RngStream::bernoulli(double p) {
    return uniform() < p;
}

} // namespace pathnet
