#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "tsmc/conditional.hpp"
#include "tsmc/rate_matrix.hpp"

namespace tsmc {

// Off-diagonal rescaling of a reverse-time generator by a state tilt:
// rate(x, y) = base(x, y) * tilt(y) / tilt(x), diagonal rebuilt.  A zero tilt
// at a source state with nonzero base outflow is a modeling error and raises
// NumericalError rather than clamping.
RateMatrixPtr tilted_rate(RateMatrixPtr base, std::shared_ptr<const std::vector<double>> tilt);

// Time-dependent tilt for generic (non-masking) corruption; the callback
// returns the full tilt vector at time t (e.g. a KBE solve).
RateMatrixPtr tilted_rate(RateMatrixPtr base,
                          std::function<std::vector<double>(double)> tilt_at);

// Guided generator: base rates scaled by [p_t(zeta|y) / p_t(zeta|x)]^alpha.
// alpha = 0 returns base unchanged.
RateMatrixPtr guided_rate(RateMatrixPtr base, const ConditionalModel& model,
                          const NoiseSchedule& sched, double alpha);

// Exact tempered generator: base rates scaled by
// E[p(zeta|X0)^alpha | X_t = y] / E[p(zeta|X0)^alpha | X_t = x].  This is the
// time reversal of the corruption started from the tempered target and serves
// as the brute-force oracle process; it coincides with guided_rate only at
// alpha = 1.
RateMatrixPtr true_tempered_rate(RateMatrixPtr base, const ConditionalModel& model,
                                 const NoiseSchedule& sched, double alpha);

}  // namespace tsmc
