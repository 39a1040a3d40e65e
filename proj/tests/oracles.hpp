#pragma once

// Test-side oracles.  These deliberately avoid the library's computation
// paths (moment tables, log-space weight updates) so that agreement is
// evidence, not tautology.

#include <cmath>
#include <vector>

#include "tsmc/conditional.hpp"
#include "tsmc/ctmc.hpp"
#include "tsmc/masking.hpp"
#include "tsmc/smc.hpp"

namespace oracles {

// E[likelihood(X0)^alpha | X_t = x_t] by direct Bayes enumeration over every
// token state, with explicit masking kernel factors.
inline double bayes_conditional_moment(const tsmc::ConditionalModel& model,
                                       const tsmc::NoiseSchedule& sched, tsmc::State x_t,
                                       double t, double alpha) {
    const tsmc::StateSpace& sp = model.space();
    const double keep = sched.survival(t);
    const double drop = 1.0 - keep;
    double num = 0.0, den = 0.0;
    for (tsmc::State x0 = 0; x0 < sp.total_states(); ++x0) {
        if (sp.any_masked(x0) || model.p0[x0] <= 0.0) continue;
        double factor = 1.0;
        for (std::uint32_t d = 0; d < sp.num_dims(); ++d) {
            if (sp.dim_masked(x_t, d))
                factor *= drop;
            else if (sp.digit(x_t, d) == sp.digit(x0, d))
                factor *= keep;
            else
                factor = 0.0;
        }
        if (factor == 0.0) continue;
        const double w = model.p0[x0] * factor;
        den += w;
        num += w * std::pow(model.likelihood[x0], alpha);
    }
    return den > 0.0 ? num / den : 0.0;
}

// Exact tempered expectations of the Euler-discretized chain: dynamic
// programming over v_{l+1}(y) = sum_x v_l(x) k_R(x -> y) [k_Rc / k_R]^alpha,
// v_1 = p1, with per-step renormalization (only ratios matter).  This is the
// law that the discretized importance weights target exactly, so agreement
// with the SMC estimate is limited by Monte Carlo error alone.
class EulerChainOracle {
public:
    EulerChainOracle(const tsmc::ConditionalModel& model, const tsmc::NoiseSchedule& sched,
                     const tsmc::RateMatrix& r, const tsmc::RateMatrix& r_cond,
                     const std::vector<double>& grid, double alpha)
        : space_(model.space()) {
        const tsmc::Distribution p1 = tsmc::forward_marginal(model.p0, grid.front(), sched);
        std::vector<double> v(p1.probs().begin(), p1.probs().end());
        snapshots_.push_back(v);
        for (std::size_t l = 0; l + 1 < grid.size(); ++l) {
            const double s = grid[l];
            const double dt = grid[l] - grid[l + 1];
            std::vector<double> next(v.size(), 0.0);
            for (tsmc::State x = 0; x < space_.total_states(); ++x) {
                if (v[x] == 0.0) continue;
                const tsmc::Distribution kr = tsmc::euler_transition_probs(r, x, s, dt);
                const tsmc::Distribution kc = tsmc::euler_transition_probs(r_cond, x, s, dt);
                for (tsmc::State y = 0; y < space_.total_states(); ++y) {
                    const double p = kr[y];
                    if (p <= 0.0) continue;
                    next[y] += v[x] * p * std::pow(kc[y] / p, alpha);
                }
            }
            double total = 0.0;
            for (double val : next) total += val;
            for (double& val : next) val /= total;
            v.swap(next);
            snapshots_.push_back(v);
        }
    }

    // Tempered expectation of phi at grid index step (0 = t=1).
    template <typename Phi>
    double expectation(std::size_t step, Phi&& phi) const {
        const std::vector<double>& v = snapshots_.at(step);
        double num = 0.0, den = 0.0;
        for (tsmc::State x = 0; x < space_.total_states(); ++x) {
            num += v[x] * phi(x);
            den += v[x];
        }
        return num / den;
    }

private:
    tsmc::StateSpace space_;
    std::vector<std::vector<double>> snapshots_;
};

// Delta-method standard error of the self-normalized estimate
// sum w~_i phi(x_i).
inline double weighted_standard_error(const tsmc::ParticleEnsemble& ensemble,
                                      const std::function<double(tsmc::State)>& phi) {
    const std::vector<double> w = tsmc::normalized_weights(ensemble);
    const double mean = tsmc::weighted_expectation(ensemble, phi);
    double var = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] == 0.0) continue;
        const double d = phi(ensemble.particles[i].state) - mean;
        var += w[i] * w[i] * d * d;
    }
    return std::sqrt(var);
}

// Unnormalized moments E^[W], E^[W phi] of one replicate, stored in a
// stable max-subtracted form so replicates can be pooled.
struct WeightedMoments {
    double max_lw = -std::numeric_limits<double>::infinity();
    double sum_w = 0.0;                // sum of exp(lw - max_lw)
    std::vector<double> sum_w_phi;     // per test function

    static WeightedMoments collect(const tsmc::ParticleEnsemble& ensemble,
                                   const std::vector<std::function<double(tsmc::State)>>& phis) {
        WeightedMoments m;
        m.sum_w_phi.assign(phis.size(), 0.0);
        for (const tsmc::Particle& p : ensemble.particles)
            m.max_lw = std::max(m.max_lw, p.log_weight);
        if (m.max_lw == -std::numeric_limits<double>::infinity()) return m;
        for (const tsmc::Particle& p : ensemble.particles) {
            if (p.log_weight == -std::numeric_limits<double>::infinity()) continue;
            const double w = std::exp(p.log_weight - m.max_lw);
            m.sum_w += w;
            for (std::size_t f = 0; f < phis.size(); ++f)
                m.sum_w_phi[f] += w * phis[f](p.state);
        }
        return m;
    }
};

// Pooled self-normalized estimate across replicates with a jackknife
// standard error.  Pooling the unnormalized moments keeps the O(1/K)
// self-normalization bias at the pooled scale, and the jackknife sees the
// replicate-to-replicate weight dispersion honestly.
struct PooledEstimate {
    double value;
    double se;
};

inline PooledEstimate pooled_jackknife(const std::vector<WeightedMoments>& reps,
                                       std::size_t phi_index) {
    const std::size_t r = reps.size();
    double global_max = -std::numeric_limits<double>::infinity();
    for (const auto& m : reps) global_max = std::max(global_max, m.max_lw);
    std::vector<double> w(r), wphi(r);
    double w_total = 0.0, wphi_total = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        const double scale =
            reps[i].max_lw == -std::numeric_limits<double>::infinity()
                ? 0.0
                : std::exp(reps[i].max_lw - global_max);
        w[i] = scale * reps[i].sum_w;
        wphi[i] = scale * reps[i].sum_w_phi[phi_index];
        w_total += w[i];
        wphi_total += wphi[i];
    }
    const double full = wphi_total / w_total;
    std::vector<double> jack(r);
    double jack_mean = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        jack[i] = (wphi_total - wphi[i]) / (w_total - w[i]);
        jack_mean += jack[i];
    }
    jack_mean /= static_cast<double>(r);
    double var = 0.0;
    for (std::size_t i = 0; i < r; ++i) var += (jack[i] - jack_mean) * (jack[i] - jack_mean);
    var *= static_cast<double>(r - 1) / static_cast<double>(r);
    return {full, std::sqrt(var)};
}

}  // namespace oracles
