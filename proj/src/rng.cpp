#include "tsmc/rng.hpp"

#include <stdexcept>

namespace tsmc {

std::uint64_t RngStream::next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::next_below: n must be positive");
    // Lemire's multiply-shift with rejection for exact uniformity.
    while (true) {
        const std::uint64_t x = next_u64();
        const __uint128_t m = static_cast<__uint128_t>(x) * n;
        const std::uint64_t lo = static_cast<std::uint64_t>(m);
        if (lo >= n) return static_cast<std::uint64_t>(m >> 64);
        const std::uint64_t threshold = (0 - n) % n;
        if (lo >= threshold) return static_cast<std::uint64_t>(m >> 64);
    }
}

std::size_t sample_index(std::span<const double> masses, double total, RngStream& rng) {
    if (!(total > 0)) throw std::invalid_argument("sample_index: total mass must be positive");
    const double u = rng.next_uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < masses.size(); ++i) {
        acc += masses[i];
        if (u < acc) return i;
    }
    // Round-off can push u past the accumulated total; return the last
    // positive-mass entry.
    for (std::size_t i = masses.size(); i-- > 0;)
        if (masses[i] > 0) return i;
    throw std::invalid_argument("sample_index: all masses are zero");
}

}  // namespace tsmc
