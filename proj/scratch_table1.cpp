#include <cstdio>

#include "tsmc/eval.hpp"

using namespace tsmc;

int main(int argc, char** argv) {
    const int targets = argc > 1 ? std::atoi(argv[1]) : 10;
    for (double lo : {-3.0, -2.0, -1.5, -1.0}) {
        ComparisonSpec spec{StateSpace(10, 2, true)};
        spec.num_targets = targets;
        spec.alphas = {2.0, 4.0};
        spec.target_params.lik_log10_min = lo;
        spec.particle_count = 50000;
        spec.steps = 100;
        spec.master_seed = 90210;
        const ComparisonResult r = run_comparison(spec);
        double smc = 0, smc_sd = 0, gd = 0, gd_sd = 0;
        for (const auto& a : r.aggregates) {
            if (a.method == "smc") { smc = a.kl_mean; smc_sd = a.kl_std; }
            if (a.method == "guided") { gd = a.kl_mean; gd_sd = a.kl_std; }
        }
        std::printf("lik range [1e%.1f, 1]: KL smc %.4f+-%.4f guided %.4f+-%.4f wins %d/%d\n",
                    lo, smc, smc_sd, gd, gd_sd, r.smc_vs_guided_wins, targets);
        std::fflush(stdout);
    }
    return 0;
}
