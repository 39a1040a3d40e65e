#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>

namespace tsmc {

namespace detail {
// Bijective 64-bit finalizer (murmur3 variant); the workhorse mixer behind
// the counter-based streams.
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 33;
    z *= 0xff51afd7ed558ccdULL;
    z ^= z >> 33;
    z *= 0xc4ceb9fe1a85ec53ULL;
    z ^= z >> 33;
    return z;
}
}  // namespace detail

// Counter-based random stream.  Each draw is a stateless mix of
// (derived key, draw counter), so a stream identified by
// (master seed, purpose, step, particle) yields the same sequence no matter
// how work is scheduled across threads.
class RngStream {
public:
    explicit RngStream(std::initializer_list<std::uint64_t> key_parts) {
        key_ = 0x9e3779b97f4a7c15ULL;
        for (std::uint64_t part : key_parts) key_ = detail::mix64(key_ ^ part) + part;
    }
    RngStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0)
        : RngStream({seed, stream, substream}) {}

    std::uint64_t next_u64() {
        counter_ += 0x9e3779b97f4a7c15ULL;  // golden-ratio increment
        return detail::mix64(key_ ^ counter_);
    }

    // Uniform double in [0, 1).
    double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, n) via rejection (Lemire).
    std::uint64_t next_below(std::uint64_t n);

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Inverse-CDF draw from unnormalized nonnegative masses; returns the index of
// the selected entry.  Intended for short kernels; resampling uses its own
// cumulative-table path.
std::size_t sample_index(std::span<const double> masses, double total, RngStream& rng);

}  // namespace tsmc
