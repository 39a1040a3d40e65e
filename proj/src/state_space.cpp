#include "tsmc/state_space.hpp"

#include <limits>
#include <stdexcept>

namespace tsmc {

StateSpace::StateSpace(std::uint32_t vocab_size, std::uint32_t num_dims, bool has_mask)
    : vocab_size_(vocab_size), num_dims_(num_dims), has_mask_(has_mask) {
    if (vocab_size == 0) throw std::invalid_argument("StateSpace: vocab_size must be positive");
    if (num_dims == 0) throw std::invalid_argument("StateSpace: num_dims must be positive");
    base_ = vocab_size_ + (has_mask_ ? 1u : 0u);

    total_states_ = 1;
    stride_.resize(num_dims_);
    for (std::uint32_t i = 0; i < num_dims_; ++i) {
        if (total_states_ > std::numeric_limits<std::uint64_t>::max() / base_)
            throw std::invalid_argument("StateSpace: total_states overflows 64 bits");
        total_states_ *= base_;
    }
    // stride of dim i = base^(num_dims - 1 - i)
    std::uint64_t s = 1;
    for (std::uint32_t i = num_dims_; i-- > 0;) {
        stride_[i] = s;
        s *= base_;
    }
}

std::uint32_t StateSpace::mask_symbol() const {
    if (!has_mask_) throw std::logic_error("StateSpace: no mask symbol in this space");
    return vocab_size_;
}

State StateSpace::encode(std::span<const std::uint32_t> digits) const {
    if (digits.size() != num_dims_)
        throw std::invalid_argument("StateSpace::encode: wrong digit count");
    State s = 0;
    for (std::uint32_t i = 0; i < num_dims_; ++i) {
        if (digits[i] >= base_)
            throw std::invalid_argument("StateSpace::encode: digit out of range");
        s += static_cast<std::uint64_t>(digits[i]) * stride_[i];
    }
    return s;
}

std::vector<std::uint32_t> StateSpace::decode(State s) const {
    if (s >= total_states_) throw std::invalid_argument("StateSpace::decode: state out of range");
    std::vector<std::uint32_t> digits(num_dims_);
    for (std::uint32_t i = 0; i < num_dims_; ++i) digits[i] = digit(s, i);
    return digits;
}

std::uint32_t StateSpace::masked_count(State s) const {
    if (!has_mask_) return 0;
    std::uint32_t n = 0;
    for (std::uint32_t i = 0; i < num_dims_; ++i)
        if (digit(s, i) == vocab_size_) ++n;
    return n;
}

}  // namespace tsmc
