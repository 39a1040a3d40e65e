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
    const std::uint64_t kSeed = 90210;
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace space(10, 2, true);
    const double alpha = 2.0;
    RngStream rng{kSeed + 4, 0};
    const ConditionalModel model = random_target(space, alpha, RandomTargetParams{}, rng);
    const auto r = generative_reverse_rate(model.p0, sched);
    const auto rc = guided_rate(r, model, sched, 1.0);
    const std::vector<double> grid = SmcConfig::uniform_grid(50);
    const oracles::EulerChainOracle oracle(model, sched, *r, *rc, grid, alpha);

    const std::vector<std::size_t> probes{10, 20, 30, 35, 40};
    const std::vector<std::function<double(State)>> phis{
        [&space](State s) { return static_cast<double>(space.masked_count(s)); },
        [&space](State s) { return static_cast<double>(space.digit(s, 0)); },
        [&space](State s) { return static_cast<double>(space.digit(s, 1)); },
        [&space](State s) { return space.any_masked(s) ? 0.0 : 1.0; },
        [](State s) { return static_cast<double>(s % 7); },
    };
    const int replicates = 12;
    std::vector<std::vector<oracles::WeightedMoments>> moments(probes.size());
    for (int rep = 0; rep < replicates; ++rep) {
        SmcConfig cfg;
        cfg.particle_count = 100000;
        cfg.grid = grid;
        cfg.alpha = alpha;
        cfg.beta = alpha;
        cfg.proposal = ProposalKind::guided;
        cfg.ess_threshold = 0.0;
        cfg.master_seed = kSeed + 5 + static_cast<std::uint64_t>(rep);
        run_smc(cfg, model, sched, [&](std::size_t step, const ParticleEnsemble& e) {
            for (std::size_t pi = 0; pi < probes.size(); ++pi)
                if (probes[pi] == step)
                    moments[pi].push_back(oracles::WeightedMoments::collect(e, phis));
        });
        std::printf("replicate %d done\n", rep);
        std::fflush(stdout);
    }
    double worst = 0.0;
    for (std::size_t pi = 0; pi < probes.size(); ++pi)
        for (std::size_t fi = 0; fi < phis.size(); ++fi) {
            const auto est = oracles::pooled_jackknife(moments[pi], fi);
            const double exact = oracle.expectation(probes[pi], phis[fi]);
            const double sigma = std::abs(est.value - exact) / (est.se + 1e-12);
            worst = std::max(worst, sigma);
            std::printf("probe %2zu phi %zu: est %.5f exact %.5f sigma %.2f\n", probes[pi], fi,
                        est.value, exact, sigma);
        }
    std::printf("worst sigma %.2f\n", worst);
    return 0;
}
