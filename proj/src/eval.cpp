#include "tsmc/eval.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "tsmc/errors.hpp"
#include "tsmc/guidance.hpp"
#include "tsmc/masking.hpp"

namespace tsmc {

namespace {

constexpr std::uint64_t kStreamTargetGen = 21;
constexpr std::uint64_t kStreamPathSampling = 22;

double gaussian(RngStream& rng) {
    // Box-Muller; one value per call keeps the stream layout simple.
    const double u1 = 1.0 - rng.next_uniform();  // (0, 1]
    const double u2 = rng.next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace

Distribution empirical_distribution(std::span<const State> samples, const StateSpace& space,
                                    double epsilon) {
    if (samples.empty()) throw std::invalid_argument("empirical_distribution: no samples");
    if (epsilon < 0.0) throw std::invalid_argument("empirical_distribution: epsilon must be >= 0");
    const double n = static_cast<double>(samples.size());
    const double s = static_cast<double>(space.total_states());
    std::vector<double> probs(space.total_states(), epsilon);
    for (State x : samples) {
        if (x >= space.total_states())
            throw std::invalid_argument("empirical_distribution: sample out of range");
        probs[x] += 1.0;
    }
    const double denom = n + epsilon * s;
    for (double& p : probs) p /= denom;
    return Distribution(space, std::move(probs));
}

Distribution weighted_empirical_distribution(const ParticleEnsemble& ensemble,
                                             const StateSpace& space, double epsilon) {
    if (ensemble.particles.empty())
        throw std::invalid_argument("weighted_empirical_distribution: empty ensemble");
    if (epsilon < 0.0)
        throw std::invalid_argument("weighted_empirical_distribution: epsilon must be >= 0");
    const std::vector<double> w = normalized_weights(ensemble);
    const double n = static_cast<double>(ensemble.particles.size());
    const double s = static_cast<double>(space.total_states());
    std::vector<double> probs(space.total_states(), epsilon);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const State x = ensemble.particles[i].state;
        if (x >= space.total_states())
            throw std::invalid_argument("weighted_empirical_distribution: state out of range");
        probs[x] += n * w[i];
    }
    const double denom = n + epsilon * s;
    for (double& p : probs) p /= denom;
    return Distribution(space, std::move(probs));
}

double kl_divergence(const Distribution& pi, const Distribution& sigma) {
    if (!(pi.space() == sigma.space()))
        throw std::invalid_argument("kl_divergence: state spaces differ");
    double kl = 0.0;
    for (State x = 0; x < pi.space().total_states(); ++x) {
        const double p = pi[x];
        if (p <= 0.0) continue;
        const double q = sigma[x];
        if (q <= 0.0)
            throw NumericalError("kl_divergence: sigma has zero mass on pi's support at state " +
                                 std::to_string(x));
        kl += p * std::log(p / q);
    }
    return std::max(kl, 0.0);  // guards against -1e-17 round-off on equal inputs
}

ConditionalModel random_target(const StateSpace& space, double alpha,
                               const RandomTargetParams& params, RngStream& rng) {
    if (space.vocab_size() < 2)
        throw std::invalid_argument("random_target: vocab_size must be >= 2");
    if (params.lik_log10_max < params.lik_log10_min)
        throw std::invalid_argument("random_target: empty likelihood range");
    std::vector<double> p0(space.total_states(), 0.0);
    std::vector<double> lik(space.total_states(), 0.0);
    double z = 0.0;
    for (State s = 0; s < space.total_states(); ++s) {
        if (space.any_masked(s)) continue;
        p0[s] = std::exp(params.p0_spread * gaussian(rng));
        z += p0[s];
    }
    for (State s = 0; s < space.total_states(); ++s) p0[s] /= z;
    for (State s = 0; s < space.total_states(); ++s) {
        if (space.any_masked(s)) continue;
        const double e = params.lik_log10_min +
                         (params.lik_log10_max - params.lik_log10_min) * rng.next_uniform();
        lik[s] = std::pow(10.0, e);
    }
    ConditionalModel model{Distribution(space, std::move(p0)), std::move(lik)};
    model.validate();
    if (!(model.z_alpha(alpha) > 0.0))
        throw NumericalError("random_target: Z_alpha vanished");
    return model;
}

std::vector<State> sample_generation_paths(const RateMatrix& q, const Distribution& p0,
                                           const NoiseSchedule& sched,
                                           std::span<const double> grid, std::size_t count,
                                           std::uint64_t seed, unsigned threads) {
    if (grid.size() < 2)
        throw std::invalid_argument("sample_generation_paths: grid needs at least two points");
    const StateSpace& sp = p0.space();
    std::vector<double> cdf(sp.total_states());
    std::partial_sum(p0.probs().begin(), p0.probs().end(), cdf.begin());
    const double drop1 = 1.0 - sched.survival(grid.front());
    const std::uint32_t mask = sp.mask_symbol();

    std::vector<State> out(count);
    auto worker = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            RngStream rng{seed, kStreamPathSampling, i};
            const double u = rng.next_uniform();
            State s = 0;
            {
                // inverse CDF
                std::size_t lo_i = 0, hi_i = cdf.size() - 1;
                while (lo_i < hi_i) {
                    const std::size_t mid = (lo_i + hi_i) / 2;
                    if (cdf[mid] > u)
                        hi_i = mid;
                    else
                        lo_i = mid + 1;
                }
                s = static_cast<State>(lo_i);
            }
            for (std::uint32_t d = 0; d < sp.num_dims(); ++d)
                if (rng.next_uniform() < drop1) s = sp.with_digit(s, d, mask);
            for (std::size_t l = 0; l + 1 < grid.size(); ++l)
                s = euler_step(q, grid[l], grid[l] - grid[l + 1], s, rng);
            out[i] = s;
        }
    };
    if (threads <= 1) {
        worker(0, count);
    } else {
        std::vector<std::thread> pool;
        const std::size_t stride = (count + threads - 1) / threads;
        for (unsigned w = 0; w < threads; ++w) {
            const std::size_t lo = w * stride;
            const std::size_t hi = std::min(count, lo + stride);
            if (lo >= hi) break;
            pool.emplace_back(worker, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    return out;
}

ComparisonResult run_comparison(const ComparisonSpec& spec) {
    if (spec.num_targets <= 0) throw std::invalid_argument("run_comparison: no targets");
    if (spec.alphas.empty()) throw std::invalid_argument("run_comparison: no alphas");
    const NoiseSchedule sched = NoiseSchedule::log_linear(spec.terminal_residual);
    const double epsilon = spec.epsilon_scale / static_cast<double>(spec.space.total_states());
    const std::vector<double> grid = SmcConfig::uniform_grid(spec.steps);

    ComparisonResult result;
    std::vector<double> kl_smc, kl_guided, kl_true;
    for (int id = 0; id < spec.num_targets; ++id) {
        RngStream seeder{spec.master_seed, kStreamTargetGen, static_cast<std::uint64_t>(id)};
        const std::uint64_t trial_seed = seeder.next_u64();
        const double alpha = spec.alphas[id % spec.alphas.size()];

        RngStream target_rng{trial_seed, 0};
        const ConditionalModel model = random_target(spec.space, alpha, spec.target_params,
                                                     target_rng);
        const Distribution target = tempered_target(model, alpha);
        const RateMatrixPtr r = generative_reverse_rate(model.p0, sched);

        if (spec.methods.smc) {
            SmcConfig cfg;
            cfg.particle_count = spec.particle_count;
            cfg.grid = grid;
            cfg.alpha = alpha;
            cfg.beta = spec.proposal_beta_scale * alpha;
            cfg.proposal = spec.proposal;
            cfg.ess_threshold = spec.ess_threshold_fraction * static_cast<double>(spec.particle_count);
            cfg.resampler = spec.resampler;
            cfg.partial_m = spec.partial_m;
            cfg.master_seed = trial_seed;
            cfg.threads = spec.threads;
            const ParticleEnsemble ensemble = run_smc(cfg, model, sched);
            const Distribution emp = weighted_empirical_distribution(ensemble, spec.space, epsilon);
            const double kl = kl_divergence(target, emp);
            kl_smc.push_back(kl);
            result.trials.push_back({id, "smc", alpha, kl, spec.particle_count, spec.steps,
                                     trial_seed});
        }
        if (spec.methods.guided) {
            const RateMatrixPtr rg = guided_rate(r, model, sched, spec.guided_beta_scale * alpha);
            const std::vector<State> samples = sample_generation_paths(
                *rg, model.p0, sched, grid, spec.particle_count, trial_seed + 1, spec.threads);
            const Distribution emp = empirical_distribution(samples, spec.space, epsilon);
            const double kl = kl_divergence(target, emp);
            kl_guided.push_back(kl);
            result.trials.push_back({id, "guided", alpha, kl, spec.particle_count, spec.steps,
                                     trial_seed});
        }
        if (spec.methods.true_tempered) {
            const RateMatrixPtr rt = true_tempered_rate(r, model, sched, alpha);
            const std::vector<State> samples = sample_generation_paths(
                *rt, model.p0, sched, grid, spec.particle_count, trial_seed + 2, spec.threads);
            const Distribution emp = empirical_distribution(samples, spec.space, epsilon);
            const double kl = kl_divergence(target, emp);
            kl_true.push_back(kl);
            result.trials.push_back({id, "true_tempered", alpha, kl, spec.particle_count,
                                     spec.steps, trial_seed});
        }
    }

    auto aggregate = [&](const std::string& name, const std::vector<double>& kls) {
        if (kls.empty()) return;
        double mean = 0.0;
        for (double k : kls) mean += k;
        mean /= static_cast<double>(kls.size());
        double var = 0.0;
        if (kls.size() > 1) {
            for (double k : kls) var += (k - mean) * (k - mean);
            var /= static_cast<double>(kls.size() - 1);
        }
        result.aggregates.push_back({name, mean, std::sqrt(var)});
    };
    aggregate("smc", kl_smc);
    aggregate("guided", kl_guided);
    aggregate("true_tempered", kl_true);

    if (!kl_smc.empty() && kl_smc.size() == kl_guided.size()) {
        for (std::size_t i = 0; i < kl_smc.size(); ++i)
            if (kl_smc[i] < kl_guided[i]) ++result.smc_vs_guided_wins;
    }
    return result;
}

}  // namespace tsmc
