#pragma once

#include <vector>

#include "tsmc/distribution.hpp"
#include "tsmc/masking.hpp"
#include "tsmc/schedule.hpp"

namespace tsmc {

// Explicit data distribution p0 together with the likelihood vector
// x |-> p(zeta | x) of an abstract conditioning observation zeta.  Both live
// on the (possibly mask-extended) state space with no mass / support on
// masked states.
struct ConditionalModel {
    Distribution p0;
    std::vector<double> likelihood;

    const StateSpace& space() const { return p0.space(); }
    void validate() const;
    // Z_alpha = sum_x p0(x) likelihood(x)^alpha.
    double z_alpha(double alpha) const;
};

// p_t(zeta | x_t) = E[p(zeta | X_0) | X_t = x_t] for the masking process:
// unmasked dimensions pin the corresponding X_0 coordinates, masked ones are
// marginalized under p0.  Throws NumericalError when x_t is unreachable at t.
double conditional_likelihood(const ConditionalModel& model, const NoiseSchedule& sched,
                              State x_t, double t);

// E[likelihood(X_0)^alpha | X_t = x] for every state x, via the closed-form
// Bayes route (time-independent for masking).  Unreachable states get 0.
std::vector<double> conditional_moment_table(const ConditionalModel& model, double alpha);

// Normalized p0(x) likelihood(x)^alpha.
Distribution tempered_target(const ConditionalModel& model, double alpha);

// Exact marginal of the corruption started from the tempered target
// (corruption route).
Distribution tempered_marginal_true(const ConditionalModel& model, const NoiseSchedule& sched,
                                    double alpha, double t);

// Same law through the proportionality route p_t(x) E[lik^alpha | X_t = x];
// kept as an independent cross-check of tempered_marginal_true.
Distribution tempered_marginal_proportional(const ConditionalModel& model,
                                            const NoiseSchedule& sched, double alpha, double t);

}  // namespace tsmc
