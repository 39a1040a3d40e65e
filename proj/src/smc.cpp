#include "tsmc/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "tsmc/errors.hpp"
#include "tsmc/guidance.hpp"
#include "tsmc/masking.hpp"

namespace tsmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Stream purposes; mixed into the RNG key so that no two uses collide.
enum StreamPurpose : std::uint64_t {
    kStreamInit = 1,
    kStreamPropagate = 2,
    kStreamResample = 3,
};

double log_sum_exp(const std::vector<Particle>& particles, double max_lw) {
    double acc = 0.0;
    for (const Particle& p : particles)
        if (p.log_weight != kNegInf) acc += std::exp(p.log_weight - max_lw);
    return max_lw + std::log(acc);
}

double max_log_weight(const std::vector<Particle>& particles) {
    double m = kNegInf;
    for (const Particle& p : particles) m = std::max(m, p.log_weight);
    return m;
}

// Inverse-CDF lookup: smallest index with cdf[i] > u.
std::size_t cdf_draw(const std::vector<double>& cdf, double u) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
}

void run_parallel(unsigned threads, std::size_t n, const std::function<void(std::size_t, std::size_t)>& chunk) {
    if (threads <= 1 || n < 2) {
        chunk(0, n);
        return;
    }
    const unsigned used = std::min<unsigned>(threads, static_cast<unsigned>(n));
    std::vector<std::thread> pool;
    pool.reserve(used);
    const std::size_t stride = (n + used - 1) / used;
    for (unsigned w = 0; w < used; ++w) {
        const std::size_t lo = w * stride;
        const std::size_t hi = std::min(n, lo + stride);
        if (lo >= hi) break;
        pool.emplace_back([&chunk, lo, hi] { chunk(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace

std::vector<double> normalized_weights(const ParticleEnsemble& ensemble) {
    const auto& ps = ensemble.particles;
    if (ps.empty()) throw std::invalid_argument("normalized_weights: empty ensemble");
    const double max_lw = max_log_weight(ps);
    if (max_lw == kNegInf)
        throw NumericalError("normalized_weights: all particles have weight zero");
    const double lse = log_sum_exp(ps, max_lw);
    std::vector<double> w(ps.size(), 0.0);
    for (std::size_t i = 0; i < ps.size(); ++i)
        if (ps[i].log_weight != kNegInf) w[i] = std::exp(ps[i].log_weight - lse);
    return w;
}

double ess(const ParticleEnsemble& ensemble) {
    const std::vector<double> w = normalized_weights(ensemble);
    double sq = 0.0;
    for (double wi : w) sq += wi * wi;
    return 1.0 / sq;
}

double weighted_expectation(const ParticleEnsemble& ensemble,
                            const std::function<double(State)>& phi) {
    const std::vector<double> w = normalized_weights(ensemble);
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        if (w[i] > 0.0) acc += w[i] * phi(ensemble.particles[i].state);
    return acc;
}

double weight_update_discrete(double lw, State x_s, State x_t, double s, double t,
                              const RateMatrix& r, const RateMatrix& r_cond,
                              const RateMatrix& q, double alpha) {
    if (!(s > t)) throw std::invalid_argument("weight_update_discrete: requires s > t");
    if (lw == kNegInf) return kNegInf;
    const double dt = s - t;
    const double lq = euler_log_transition(q, s, dt, x_s, x_t);
    if (lq == kNegInf)
        throw NumericalError("weight_update_discrete: proposal kernel is zero at realized transition " +
                             std::to_string(x_s) + " -> " + std::to_string(x_t) +
                             " (absolute-continuity violation)");
    const double lp = euler_log_transition(r, s, dt, x_s, x_t);
    if (lp == kNegInf) return kNegInf;
    double out = lw + lp - lq;
    if (alpha != 0.0) {
        const double lpz = euler_log_transition(r_cond, s, dt, x_s, x_t);
        if (lpz == kNegInf) return kNegInf;
        out += alpha * (lpz - lp);
    }
    return out;
}

namespace {

// ln of a single-move rate; spec treats a zero under R or Q at a realized
// jump as a hard error, while a zero under R_cond kills the particle.
double jump_log_rate(const RateMatrix& m, double t, State from, State to, const char* who) {
    const double r = m.rate(t, from, to);
    if (r <= 0.0)
        throw NumericalError(std::string("weight_increment_continuous: zero ") + who +
                             " rate at realized jump " + std::to_string(from) + " -> " +
                             std::to_string(to));
    return std::log(r);
}

}  // namespace

double weight_increment_continuous(const PathRecord& segment, const RateMatrix& r,
                                   const RateMatrix& r_cond, const RateMatrix& q, double alpha) {
    if (segment.states.size() != segment.grid.size())
        throw std::invalid_argument("weight_increment_continuous: malformed path record");
    const StateSpace& sp = r.space();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < segment.grid.size(); ++i) {
        const double s = segment.grid[i];
        const double dtau = std::abs(segment.grid[i + 1] - segment.grid[i]);
        const State x_s = segment.states[i];
        const State x_t = segment.states[i + 1];

        // Exit-rate integrals, left endpoint.
        const double exit_r = r.exit_rate(s, x_s);
        const double exit_q = q.exit_rate(s, x_s);
        acc += (exit_q - exit_r) * dtau;
        if (alpha != 0.0) {
            const double exit_c = r_cond.exit_rate(s, x_s);
            acc += alpha * (exit_r - exit_c) * dtau;
        }

        if (x_t == x_s) continue;
        // Jump terms.  Per-dimension Euler steps may move several dimensions
        // in one grid interval; charge those as successive single-dimension
        // jumps at the segment's start time.
        State z = x_s;
        for (std::uint32_t d = 0; d < sp.num_dims(); ++d) {
            const std::uint32_t target = sp.digit(x_t, d);
            if (sp.digit(z, d) == target) continue;
            const State z_next = sp.with_digit(z, d, target);
            const double lr = jump_log_rate(r, s, z, z_next, "unconditional");
            acc += lr - jump_log_rate(q, s, z, z_next, "proposal");
            if (alpha != 0.0) {
                const double rc = r_cond.rate(s, z, z_next);
                if (rc <= 0.0) return kNegInf;
                acc += alpha * (std::log(rc) - lr);
            }
            z = z_next;
        }
    }
    return acc;
}

void multinomial_resample(ParticleEnsemble& ensemble, RngStream& rng) {
    const std::vector<double> w = normalized_weights(ensemble);
    std::vector<double> cdf(w.size());
    std::partial_sum(w.begin(), w.end(), cdf.begin());
    std::vector<Particle> next(ensemble.particles.size());
    for (std::size_t i = 0; i < next.size(); ++i) {
        const std::size_t j = cdf_draw(cdf, rng.next_uniform());
        next[i] = {ensemble.particles[j].state, 0.0};
    }
    ensemble.particles.swap(next);
    ensemble.diagnostics.resample_steps.push_back(ensemble.time_index);
}

void partial_resample(ParticleEnsemble& ensemble, std::size_t m, RngStream& rng) {
    const std::size_t k = ensemble.particles.size();
    if (m > k) throw std::invalid_argument("partial_resample: M exceeds particle count");
    if (m == 0) return;
    const std::vector<double> w = normalized_weights(ensemble);

    // floor(M/2) highest and ceil(M/2) lowest weights; ties broken by index
    // for determinism.
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&w](std::size_t a, std::size_t b) { return w[a] < w[b]; });
    const std::size_t n_low = (m + 1) / 2;
    const std::size_t n_high = m / 2;
    std::vector<std::size_t> selected;
    selected.reserve(m);
    for (std::size_t i = 0; i < n_low; ++i) selected.push_back(order[i]);
    for (std::size_t i = 0; i < n_high; ++i) selected.push_back(order[k - 1 - i]);
    std::sort(selected.begin(), selected.end());

    double subset_mass = 0.0;
    std::vector<double> subset_cdf(selected.size());
    for (std::size_t i = 0; i < selected.size(); ++i) {
        subset_mass += w[selected[i]];
        subset_cdf[i] = subset_mass;
    }
    const double replacement_lw =
        subset_mass > 0.0 ? std::log(subset_mass / static_cast<double>(m)) : kNegInf;

    std::vector<State> replacement_states(selected.size());
    if (subset_mass > 0.0) {
        for (std::size_t i = 0; i < selected.size(); ++i) {
            const double u = rng.next_uniform() * subset_mass;
            const auto it = std::upper_bound(subset_cdf.begin(), subset_cdf.end(), u);
            const std::size_t pos = std::min<std::size_t>(it - subset_cdf.begin(),
                                                          selected.size() - 1);
            replacement_states[i] = ensemble.particles[selected[pos]].state;
        }
    } else {
        for (std::size_t i = 0; i < selected.size(); ++i)
            replacement_states[i] = ensemble.particles[selected[i]].state;
    }

    // Rewrite every weight on the normalized scale so replaced and untouched
    // particles stay comparable.
    std::vector<double> log_w(k);
    for (std::size_t i = 0; i < k; ++i) log_w[i] = w[i] > 0.0 ? std::log(w[i]) : kNegInf;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        ensemble.particles[selected[i]].state = replacement_states[i];
        log_w[selected[i]] = replacement_lw;
    }
    for (std::size_t i = 0; i < k; ++i) ensemble.particles[i].log_weight = log_w[i];
    ensemble.diagnostics.resample_steps.push_back(ensemble.time_index);
}

void SmcConfig::validate() const {
    if (particle_count == 0) throw ConfigError("SmcConfig: particle_count must be positive");
    if (grid.size() < 2) throw ConfigError("SmcConfig: grid needs at least two points");
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        if (!(grid[i] > grid[i + 1])) throw ConfigError("SmcConfig: grid must be strictly decreasing");
    if (std::abs(grid.front() - 1.0) > 1e-12 || std::abs(grid.back()) > 1e-12)
        throw ConfigError("SmcConfig: grid must run from 1 to 0");
    if (alpha < 0.0) throw ConfigError("SmcConfig: alpha must be >= 0");
    if (beta < 0.0) throw ConfigError("SmcConfig: beta must be >= 0");
    if (ess_threshold < 0.0 || ess_threshold > static_cast<double>(particle_count))
        throw ConfigError("SmcConfig: ess_threshold must lie in [0, K]");
    if (partial_m && *partial_m > particle_count)
        throw ConfigError("SmcConfig: partial_m exceeds particle count");
}

std::vector<double> SmcConfig::uniform_grid(std::size_t steps) {
    if (steps == 0) throw std::invalid_argument("uniform_grid: steps must be positive");
    std::vector<double> g(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k)
        g[k] = 1.0 - static_cast<double>(k) / static_cast<double>(steps);
    g.back() = 0.0;
    return g;
}

ParticleEnsemble run_smc(const SmcConfig& config, const ConditionalModel& model,
                         const NoiseSchedule& sched, const StepObserver& observer) {
    config.validate();
    model.validate();
    const StateSpace& sp = model.space();

    const RateMatrixPtr r = generative_reverse_rate(model.p0, sched);
    const RateMatrixPtr r_cond = guided_rate(r, model, sched, 1.0);
    RateMatrixPtr q;
    switch (config.proposal) {
        case ProposalKind::unconditional: q = r; break;
        case ProposalKind::guided: q = guided_rate(r, model, sched, config.beta); break;
        case ProposalKind::true_tempered:
            q = true_tempered_rate(r, model, sched, config.alpha);
            break;
    }

    // CDF of p0 for initial draws: sample X_0 ~ p0 and mask each dimension
    // independently with probability 1 - survival(1), which is an exact draw
    // from the t = 1 corrupted marginal.
    std::vector<double> p0_cdf(sp.total_states());
    std::partial_sum(model.p0.probs().begin(), model.p0.probs().end(), p0_cdf.begin());
    const double drop1 = 1.0 - sched.survival(1.0);
    const std::uint32_t mask = sp.mask_symbol();

    ParticleEnsemble ensemble;
    ensemble.particles.resize(config.particle_count);
    run_parallel(config.threads, config.particle_count, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            RngStream rng{config.master_seed, kStreamInit, i};
            State s = static_cast<State>(cdf_draw(p0_cdf, rng.next_uniform()));
            for (std::uint32_t d = 0; d < sp.num_dims(); ++d)
                if (rng.next_uniform() < drop1) s = sp.with_digit(s, d, mask);
            ensemble.particles[i] = {s, 0.0};
        }
    });

    const std::size_t steps = config.grid.size() - 1;
    ensemble.diagnostics.ess_trace.reserve(steps);
    for (std::size_t l = 0; l < steps; ++l) {
        const double s = config.grid[l];
        const double t = config.grid[l + 1];
        const double dt = s - t;
        run_parallel(config.threads, config.particle_count, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                Particle& p = ensemble.particles[i];
                RngStream rng{config.master_seed, kStreamPropagate, l, i};
                const State x_s = p.state;
                p.state = euler_step(*q, s, dt, x_s, rng);
                p.log_weight =
                    weight_update_discrete(p.log_weight, x_s, p.state, s, t, *r, *r_cond, *q,
                                           config.alpha);
            }
        });
        ensemble.time_index = l + 1;
        const double e = ess(ensemble);
        ensemble.diagnostics.ess_trace.push_back(e);
        if (observer) observer(l + 1, ensemble);

        const bool final_step = (l + 1 == steps);
        if (!final_step && config.ess_threshold > 0.0 && e <= config.ess_threshold) {
            RngStream rng{config.master_seed, kStreamResample, l};
            if (config.resampler == ResamplerKind::multinomial) {
                multinomial_resample(ensemble, rng);
            } else {
                const std::size_t m = config.partial_m.value_or(config.particle_count / 2);
                partial_resample(ensemble, m, rng);
            }
        }
    }
    return ensemble;
}

}  // namespace tsmc
