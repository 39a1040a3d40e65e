#include <map>
#include <cmath>
#include <cstdio>

#include "tsmc/eval.hpp"
#include "tsmc/guidance.hpp"
#include "tsmc/masking.hpp"
#include "tsmc/smc.hpp"

using namespace tsmc;

int main() {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(5, 1, true);
    const double alpha = 2.0;
    RngStream mrng{9, 13};
    const ConditionalModel model = random_target(sp, alpha, RandomTargetParams{}, mrng);
    const Distribution target = tempered_target(model, alpha);
    for (State s = 0; s < sp.total_states(); ++s)
        std::printf("state %llu p0=%.4f lik=%.5f target=%.6f\n",
                    (unsigned long long)s, model.p0[s], model.likelihood[s], target[s]);

    SmcConfig cfg;
    cfg.particle_count = 10000;
    cfg.grid = SmcConfig::uniform_grid(100);
    cfg.alpha = alpha;
    cfg.proposal = ProposalKind::true_tempered;
    cfg.ess_threshold = 0.5 * 10000;
    cfg.master_seed = 31337;
    const ParticleEnsemble e = run_smc(cfg, model, sched);
    std::printf("resamples=%zu final ESS=%.1f\n", e.diagnostics.resample_steps.size(),
                e.diagnostics.ess_trace.back());
    const auto phi = [](State s) { return static_cast<double>(s); };
    double exact = 0.0;
    for (State s = 0; s < sp.total_states(); ++s) exact += target[s] * phi(s);
    const std::vector<double> w = normalized_weights(e);
    std::vector<double> mass(sp.total_states(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) mass[e.particles[i].state] += w[i];
    for (State s = 0; s < sp.total_states(); ++s)
        std::printf("state %llu: weighted mass %.6f vs target %.6f\n",
                    (unsigned long long)s, mass[s], target[s]);
    const double est = weighted_expectation(e, phi);
    double se2 = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = phi(e.particles[i].state) - est;
        se2 += w[i] * w[i] * d * d;
    }
    std::printf("estimate=%.6f exact=%.6f diff=%.6f se=%.6f\n", est, exact, est - exact,
                std::sqrt(se2));
    // distribution of distinct log-weights
    std::map<double, int> counts;
    for (const auto& p : e.particles) counts[p.log_weight]++;
    int shown = 0;
    for (const auto& [lw, n] : counts) {
        if (shown++ > 8) break;
        std::printf("log_weight %.6f x%d\n", lw, n);
    }
    std::printf("distinct log weights: %zu\n", counts.size());
    return 0;
}
