#include <cmath>
#include <cstdio>
#include <vector>

#include "../tests/oracles.hpp"
#include "tsmc/eval.hpp"
#include "tsmc/guidance.hpp"
#include "tsmc/masking.hpp"
#include "tsmc/smc.hpp"

using namespace tsmc;

int main() {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(3, 2, true);
    const double alpha = 2.0;
    RngStream mrng{13, 13};
    const ConditionalModel model = random_target(sp, alpha, RandomTargetParams{}, mrng);
    const auto r = generative_reverse_rate(model.p0, sched);
    const auto rc = guided_rate(r, model, sched, 1.0);
    const auto grid = SmcConfig::uniform_grid(50);
    const oracles::EulerChainOracle oracle(model, sched, *r, *rc, grid, alpha);
    const std::vector<std::size_t> probes{45, 49, 50};
    const std::vector<std::function<double(State)>> phis{
        [&sp](State s) { return static_cast<double>(sp.masked_count(s)); },
        [&sp](State s) { return static_cast<double>(sp.digit(s, 0)); },
        [](State s) { return static_cast<double>(s % 3); },
    };
    for (double threshold_frac : {0.0}) {
        std::printf("--- resample threshold fraction %.1f\n", threshold_frac);
        const int reps = 5;
        std::vector<std::vector<std::vector<double>>> ests(
            probes.size(), std::vector<std::vector<double>>(phis.size()));
        double final_ess = 0;
        for (int rep = 0; rep < reps; ++rep) {
            SmcConfig cfg;
            cfg.particle_count = 100000;
            cfg.grid = grid;
            cfg.alpha = alpha;
            cfg.beta = alpha;
            cfg.proposal = ProposalKind::guided;
            cfg.ess_threshold = threshold_frac * 100000;
            cfg.master_seed = 7321 + rep;
            const auto e = run_smc(cfg, model, sched, [&](std::size_t step, const ParticleEnsemble& en) {
                for (std::size_t pi = 0; pi < probes.size(); ++pi)
                    if (probes[pi] == step)
                        for (std::size_t fi = 0; fi < phis.size(); ++fi)
                            ests[pi][fi].push_back(weighted_expectation(en, phis[fi]));
            });
            final_ess += e.diagnostics.ess_trace.back() / reps;
        }
        std::printf("avg final ESS %.1f\n", final_ess);
        for (std::size_t pi = 0; pi < probes.size(); ++pi)
            for (std::size_t fi = 0; fi < phis.size(); ++fi) {
                double mean = 0, var = 0;
                for (double v : ests[pi][fi]) mean += v;
                mean /= reps;
                for (double v : ests[pi][fi]) var += (v - mean) * (v - mean);
                var /= (reps - 1);
                const double se = std::sqrt(var / reps);
                const double exact = oracle.expectation(probes[pi], phis[fi]);
                std::printf("probe %2zu phi %zu: mean %.5f exact %.5f diff %+0.5f sigma %.2f\n",
                            probes[pi], fi, mean, exact, mean - exact,
                            std::abs(mean - exact) / (se + 1e-12));
            }
    }
    return 0;
}
