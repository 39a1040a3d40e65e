#include "tsmc/conditional.hpp"

#include <cmath>
#include <stdexcept>

#include "tsmc/errors.hpp"

namespace tsmc {

void ConditionalModel::validate() const {
    const StateSpace& sp = space();
    p0.validate();
    if (likelihood.size() != sp.total_states())
        throw std::invalid_argument("ConditionalModel: likelihood size mismatch");
    bool any_positive = false;
    for (State s = 0; s < sp.total_states(); ++s) {
        if (!(likelihood[s] >= 0.0) || !std::isfinite(likelihood[s]))
            throw std::invalid_argument("ConditionalModel: likelihood entries must be finite and >= 0");
        if (sp.any_masked(s)) {
            if (p0[s] != 0.0)
                throw std::invalid_argument("ConditionalModel: p0 must be supported off the mask");
            continue;
        }
        if (likelihood[s] > 0.0 && p0[s] > 0.0) any_positive = true;
    }
    if (!any_positive)
        throw std::invalid_argument("ConditionalModel: likelihood is zero on the support of p0");
}

double ConditionalModel::z_alpha(double alpha) const {
    double z = 0.0;
    for (State s = 0; s < space().total_states(); ++s)
        if (p0[s] > 0.0) z += p0[s] * std::pow(likelihood[s], alpha);
    return z;
}

double conditional_likelihood(const ConditionalModel& model, const NoiseSchedule& sched,
                              State x_t, double t) {
    const StateSpace& sp = model.space();
    // Reachability: positive forward mass requires a compatible completion in
    // p0's support, survival mass for unmasked dims, and drop mass at t for
    // masked dims.
    const std::uint32_t m = sp.masked_count(x_t);
    if (m > 0 && 1.0 - sched.survival(t) <= 0.0)
        throw NumericalError("conditional_likelihood: masked state unreachable at t");

    // Direct enumeration over completions of the masked dimensions.
    std::vector<std::uint32_t> masked_dims;
    for (std::uint32_t d = 0; d < sp.num_dims(); ++d)
        if (sp.dim_masked(x_t, d)) masked_dims.push_back(d);

    double posterior_mass = 0.0;
    double value = 0.0;
    const std::uint32_t v = sp.vocab_size();
    std::uint64_t completions = 1;
    for (std::size_t i = 0; i < masked_dims.size(); ++i) completions *= v;
    for (std::uint64_t c = 0; c < completions; ++c) {
        State x0 = x_t;
        std::uint64_t rem = c;
        for (std::uint32_t d : masked_dims) {
            x0 = sp.with_digit(x0, d, static_cast<std::uint32_t>(rem % v));
            rem /= v;
        }
        const double w = model.p0[x0];
        if (w == 0.0) continue;
        posterior_mass += w;
        value += w * model.likelihood[x0];
    }
    if (posterior_mass <= 0.0)
        throw NumericalError("conditional_likelihood: state " + std::to_string(x_t) +
                             " unreachable (no compatible p0 mass)");
    return value / posterior_mass;
}

std::vector<double> conditional_moment_table(const ConditionalModel& model, double alpha) {
    const StateSpace& sp = model.space();
    std::vector<double> tilted(sp.total_states(), 0.0);
    for (State s = 0; s < sp.total_states(); ++s)
        if (!sp.any_masked(s) && model.p0[s] > 0.0)
            tilted[s] = model.p0[s] * std::pow(model.likelihood[s], alpha);
    const MaskMomentTable numer(sp, tilted);
    const MaskMomentTable denom(sp, model.p0.probs());
    std::vector<double> out(sp.total_states(), 0.0);
    for (State s = 0; s < sp.total_states(); ++s)
        if (denom[s] > 0.0) out[s] = numer[s] / denom[s];
    return out;
}

Distribution tempered_target(const ConditionalModel& model, double alpha) {
    const StateSpace& sp = model.space();
    Distribution out = Distribution::zeros(sp);
    double z = 0.0;
    for (State s = 0; s < sp.total_states(); ++s) {
        if (model.p0[s] <= 0.0) continue;
        const double mass = model.p0[s] * std::pow(model.likelihood[s], alpha);
        out[s] = mass;
        z += mass;
    }
    if (!(z > 0.0) || !std::isfinite(z))
        throw NumericalError("tempered_target: unnormalized mass is not positive and finite");
    for (State s = 0; s < sp.total_states(); ++s) out[s] /= z;
    return out;
}

Distribution tempered_marginal_true(const ConditionalModel& model, const NoiseSchedule& sched,
                                    double alpha, double t) {
    return forward_marginal(tempered_target(model, alpha), t, sched);
}

Distribution tempered_marginal_proportional(const ConditionalModel& model,
                                            const NoiseSchedule& sched, double alpha, double t) {
    const Distribution base = forward_marginal(model.p0, t, sched);
    const std::vector<double> moment = conditional_moment_table(model, alpha);
    Distribution out = Distribution::zeros(model.space());
    for (State s = 0; s < model.space().total_states(); ++s) out[s] = base[s] * moment[s];
    out.normalize();
    return out;
}

}  // namespace tsmc
