#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tsmc {

// Dense joint distributions and dense rate evaluations are supported up to
// this many states; larger spaces must go through factorized operations.
inline constexpr std::uint64_t kDenseStateCap = 1'000'000;

using State = std::uint64_t;

// Finite product state space: num_dims coordinates, each over symbols
// {0, ..., vocab_size-1} plus (optionally) a mask symbol with value
// vocab_size.  States are indexed row-major with dimension 0 most
// significant:
//
//   index = sum_i digit_i * base^(num_dims - 1 - i),  base = vocab_size (+1)
//
// so index <-> digit tuples is a bijection on {0..base-1}^num_dims.
class StateSpace {
public:
    StateSpace(std::uint32_t vocab_size, std::uint32_t num_dims, bool has_mask);

    std::uint32_t vocab_size() const { return vocab_size_; }
    std::uint32_t num_dims() const { return num_dims_; }
    bool has_mask() const { return has_mask_; }

    // Symbols per dimension including the mask symbol if present.
    std::uint32_t base() const { return base_; }
    std::uint32_t mask_symbol() const;  // requires has_mask()
    std::uint64_t total_states() const { return total_states_; }

    std::uint32_t digit(State s, std::uint32_t dim) const {
        return static_cast<std::uint32_t>((s / stride_[dim]) % base_);
    }
    State with_digit(State s, std::uint32_t dim, std::uint32_t value) const {
        const std::uint64_t old = (s / stride_[dim]) % base_;
        return s + (static_cast<std::uint64_t>(value) - old) * stride_[dim];
    }

    State encode(std::span<const std::uint32_t> digits) const;
    std::vector<std::uint32_t> decode(State s) const;

    bool dim_masked(State s, std::uint32_t dim) const {
        return has_mask_ && digit(s, dim) == vocab_size_;
    }
    std::uint32_t masked_count(State s) const;
    bool any_masked(State s) const { return masked_count(s) > 0; }

    bool operator==(const StateSpace& other) const {
        return vocab_size_ == other.vocab_size_ && num_dims_ == other.num_dims_ &&
               has_mask_ == other.has_mask_;
    }

private:
    std::uint32_t vocab_size_;
    std::uint32_t num_dims_;
    bool has_mask_;
    std::uint32_t base_;
    std::uint64_t total_states_;
    std::vector<std::uint64_t> stride_;
};

}  // namespace tsmc
