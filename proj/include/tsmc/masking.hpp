#pragma once

#include <memory>
#include <span>
#include <vector>

#include "tsmc/ctmc.hpp"
#include "tsmc/distribution.hpp"
#include "tsmc/rate_matrix.hpp"
#include "tsmc/schedule.hpp"
#include "tsmc/state_space.hpp"

namespace tsmc {

// Sums of a weight vector over all unmasked completions: given w over the
// states of a masked space, table[x] = sum of w(x0) over every fully
// unmasked x0 agreeing with x on x's unmasked dimensions.  Built by summing
// axis by axis, O(num_dims * total_states).
//
// These partial sums are what make the masking process cheap: forward
// marginals, reverse rates, and conditional expectations are all ratios of
// such tables.
class MaskMomentTable {
public:
    MaskMomentTable(const StateSpace& space, std::span<const double> w);

    double operator[](State s) const { return (*table_)[s]; }
    const StateSpace& space() const { return space_; }
    std::shared_ptr<const std::vector<double>> data() const { return table_; }

private:
    StateSpace space_;
    std::shared_ptr<const std::vector<double>> table_;
};

// Closed-form masking corruption kernel p_{t|0}(. | x0): each dimension of x0
// independently survives with probability exp(-sigma(t)) or is replaced by
// the mask symbol.  x0 must be fully unmasked.
Distribution mask_transition(const StateSpace& space, State x0, double t,
                             const NoiseSchedule& sched);

// Forward-time factorized generator sending each unmasked dimension to the
// mask symbol at rate sigma'(t).
RateMatrixPtr masking_forward_rate(const NoiseSchedule& sched, const StateSpace& space);

// Exact corrupted marginal p_t = sum_x0 p_{t|0}(. | x0) p0(x0), closed form.
Distribution forward_marginal(const Distribution& p0, double t, const NoiseSchedule& sched);

// Reverse-time generator of the unconditional generative process: the exact
// time reversal of the masking corruption of p0.  Only unmasking moves carry
// rate.
RateMatrixPtr generative_reverse_rate(const Distribution& p0, const NoiseSchedule& sched);

// Internal-but-reusable: reverse masking generator whose target marginal is
// proportional to the given moment table (tempered processes reuse this with
// tilted tables).
RateMatrixPtr masking_reverse_rate(const StateSpace& space, const NoiseSchedule& sched,
                                   std::shared_ptr<const std::vector<double>> moment_table);

// Toy non-masking corruption: every dimension jumps to each other token at
// rate sigma'(t) / vocab_size.  Exercises the generic (non-closed-form)
// reversal and guidance paths.
RateMatrixPtr uniform_flip_rate(const NoiseSchedule& sched, const StateSpace& space);

}  // namespace tsmc
