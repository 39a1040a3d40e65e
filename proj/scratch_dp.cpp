#include <cmath>
#include <cstdio>
#include "../tests/oracles.hpp"
#include "tsmc/config.hpp"
#include "tsmc/eval.hpp"
#include "tsmc/guidance.hpp"
#include "tsmc/masking.hpp"
#include "tsmc/smc.hpp"
using namespace tsmc;
int main() {
    TargetConfig t;
    t.kind = "explicit"; t.dims = 2; t.vocab_size = 3; t.alpha = 4.0;
    t.p0 = {0.10, 0.15, 0.08, 0.14, 0.09, 0.12, 0.11, 0.13, 0.08};
    t.likelihood = {0.05, 0.90, 0.04, 0.85, 0.06, 0.10, 0.03, 0.12, 0.70};
    const ConditionalModel model = explicit_target_model(t);
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const Distribution target = tempered_target(model, 4.0);
    const auto r = generative_reverse_rate(model.p0, sched);
    const auto rc = guided_rate(r, model, sched, 1.0);
    for (std::size_t T : {100, 200, 400}) {
        const auto grid = SmcConfig::uniform_grid(T);
        const oracles::EulerChainOracle oracle(model, sched, *r, *rc, grid, 4.0);
        // DP law at final step
        double tv = 0.0;
        for (State s = 0; s < model.space().total_states(); ++s) {
            const auto phi = [s](State x) { return x == s ? 1.0 : 0.0; };
            tv += std::abs(oracle.expectation(T, phi) - target[s]);
        }
        std::printf("DP law T=%zu: TV(target) = %.4f\n", T, 0.5 * tv);
    }
    return 0;
}
