// Throwaway calibration: measures integrator errors vs step counts.
#include <cstdio>

#include "tsmc/ctmc.hpp"
#include "tsmc/eval.hpp"
#include "tsmc/guidance.hpp"
#include "tsmc/masking.hpp"
#include "tsmc/smc.hpp"

using namespace tsmc;

int main() {
    // 1. KBE boundary layer: d=2 V=5, likelihood vector from t=0.
    {
        const NoiseSchedule sched = NoiseSchedule::log_linear();
        const StateSpace sp(5, 2, true);
        RngStream rng{2, 77};
        const ConditionalModel model = random_target(sp, 1.0, RandomTargetParams{}, rng);
        const auto r = generative_reverse_rate(model.p0, sched);
        for (int steps : {1500, 6000, 24000, 96000}) {
            double worst = 0.0;
            for (double t : {0.25, 0.55, 0.9}) {
                const auto u = kbe_evolve(*r, model.likelihood, 0.0, t, steps);
                const Distribution pt = forward_marginal(model.p0, t, sched);
                for (State s = 0; s < sp.total_states(); ++s) {
                    if (pt[s] <= 0.0) continue;
                    const double direct = conditional_likelihood(model, sched, s, t);
                    worst = std::max(worst, std::abs(direct - u[s]));
                }
            }
            std::printf("KBE d2 steps=%6d worst=%.3e\n", steps, worst);
        }
    }
    // 2. True-tempered RK4 round trip, d=2 V=3, residual 1e-6.
    {
        const NoiseSchedule sched = NoiseSchedule::log_linear(1e-6);
        const StateSpace sp(3, 2, true);
        for (int steps : {4000, 8000, 16000, 32000}) {
            double worst_tv = 0.0, worst_kl = 0.0;
            for (int i = 0; i < 5; ++i) {
                RngStream rng{90210 + 3, static_cast<std::uint64_t>(i)};
                const ConditionalModel model = random_target(sp, 2.0, RandomTargetParams{}, rng);
                const Distribution p1 = forward_marginal(model.p0, 1.0, sched);
                const auto base = generative_reverse_rate(model.p0, sched);
                for (double alpha : {1.0, 2.0, 4.0}) {
                    const Distribution reached = kfe_evolve(
                        *true_tempered_rate(base, model, sched, alpha), p1, 1.0, 0.0, steps);
                    const Distribution target = tempered_target(model, alpha);
                    worst_tv = std::max(worst_tv, reached.total_variation(target));
                    worst_kl = std::max(worst_kl, kl_divergence(target, reached));
                }
            }
            std::printf("TRUE rk4 steps=%6d worstTV=%.3e worstKL=%.3e\n", steps, worst_tv,
                        worst_kl);
        }
    }
    // 3. Guided bias magnitude via the Euler chain, d=2 V=3.
    {
        const NoiseSchedule sched = NoiseSchedule::log_linear(1e-6);
        const StateSpace sp(3, 2, true);
        for (int i = 0; i < 8; ++i) {
            RngStream rng{90210 + 3, static_cast<std::uint64_t>(i)};
            const ConditionalModel model = random_target(sp, 2.0, RandomTargetParams{}, rng);
            const Distribution p1 = forward_marginal(model.p0, 1.0, sched);
            const auto base = generative_reverse_rate(model.p0, sched);
            const auto grid = SmcConfig::uniform_grid(4000);
            const Distribution via_guided =
                euler_chain_marginal(*guided_rate(base, model, sched, 2.0), p1, grid);
            const Distribution target = tempered_target(model, 2.0);
            std::printf("GUIDED chain model=%d TV=%.4f KL=%.5f\n", i,
                        via_guided.total_variation(target), kl_divergence(target, via_guided));
        }
    }
    // 4. alpha=1 exactness at residual 1e-3, steps 4000, worst over 20 models.
    {
        const NoiseSchedule sched = NoiseSchedule::log_linear();
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            RngStream rng{90210 + 2, static_cast<std::uint64_t>(i)};
            const auto vocab = static_cast<std::uint32_t>(2 + rng.next_below(19));
            const StateSpace space(vocab, 1, true);
            const ConditionalModel model = random_target(space, 1.0, RandomTargetParams{}, rng);
            const auto guided =
                guided_rate(generative_reverse_rate(model.p0, sched), model, sched, 1.0);
            const Distribution p1 = forward_marginal(model.p0, 1.0, sched);
            const Distribution reached = kfe_evolve(*guided, p1, 1.0, 0.0, 4000);
            worst = std::max(worst, reached.total_variation(tempered_target(model, 1.0)));
        }
        std::printf("ALPHA1 steps=4000 worstTV=%.3e (tol 2e-3)\n", worst);
    }
    return 0;
}
