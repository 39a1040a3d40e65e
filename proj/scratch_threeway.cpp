// Three routes to the discretized tempered law on a tiny instance:
//  A: DP oracle (EulerChainOracle)
//  B: exhaustive path enumeration with explicit kernel products
//  C: run_smc pooled moments
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
    const StateSpace sp(2, 2, true);  // 9 states
    const double alpha = 2.0;
    RngStream mrng{9, 13};
    const ConditionalModel model = random_target(sp, alpha, RandomTargetParams{}, mrng);
    const auto r = generative_reverse_rate(model.p0, sched);
    const auto rc = guided_rate(r, model, sched, 1.0);
    const auto q = guided_rate(r, model, sched, alpha);
    const std::size_t T = 4;
    const auto grid = SmcConfig::uniform_grid(T);

    const oracles::EulerChainOracle oracle(model, sched, *r, *rc, grid, alpha);
    const auto phi = [&sp](State s) { return static_cast<double>(sp.digit(s, 0)) + 0.3 * sp.masked_count(s); };

    // Route B: exhaustive enumeration over q-paths.
    const Distribution p1 = forward_marginal(model.p0, 1.0, sched);
    const State n = sp.total_states();
    // kernel tables per step
    std::vector<std::vector<Distribution>> kq(T), kp(T), kc(T);
    for (std::size_t l = 0; l < T; ++l) {
        const double s = grid[l], dt = grid[l] - grid[l + 1];
        for (State x = 0; x < n; ++x) {
            kq[l].push_back(euler_transition_probs(*q, x, s, dt));
            kp[l].push_back(euler_transition_probs(*r, x, s, dt));
            kc[l].push_back(euler_transition_probs(*rc, x, s, dt));
        }
    }
    std::vector<double> bw_num(T + 1, 0.0), bw_den(T + 1, 0.0);
    std::vector<State> path(T + 1);
    std::function<void(std::size_t, double, double)> recurse = [&](std::size_t l, double prob_q,
                                                                   double weight) {
        if (prob_q == 0.0) return;
        if (l == T) {
            // accumulate terminal contribution
        }
        bw_num[l] += prob_q * weight * phi(path[l]);
        bw_den[l] += prob_q * weight;
        if (l == T) return;
        for (State y = 0; y < n; ++y) {
            const double pq = kq[l][path[l]][y];
            if (pq == 0.0) continue;
            const double pp = kp[l][path[l]][y];
            const double pc = kc[l][path[l]][y];
            path[l + 1] = y;
            recurse(l + 1, prob_q * pq,
                    weight * (pp / pq) * std::pow(pc / pp, alpha));
        }
    };
    for (State x1 = 0; x1 < n; ++x1) {
        if (p1[x1] == 0.0) continue;
        path[0] = x1;
        recurse(0, p1[x1], 1.0);
    }
    for (std::size_t l = 1; l <= T; ++l)
        std::printf("step %zu: A=%.8f B=%.8f\n", l, oracle.expectation(l, phi),
                    bw_num[l] / bw_den[l]);

    // Route C: SMC pooled.
    std::vector<oracles::WeightedMoments> moments;
    const std::vector<std::function<double(State)>> phis{phi};
    for (int rep = 0; rep < 16; ++rep) {
        SmcConfig cfg;
        cfg.particle_count = 50000;
        cfg.grid = grid;
        cfg.alpha = alpha;
        cfg.beta = alpha;
        cfg.proposal = ProposalKind::guided;
        cfg.ess_threshold = 0.0;
        cfg.master_seed = 100 + rep;
        run_smc(cfg, model, sched, [&](std::size_t step, const ParticleEnsemble& e) {
            if (step == 2) moments.push_back(oracles::WeightedMoments::collect(e, phis));
        });
    }
    const auto est = oracles::pooled_jackknife(moments, 0);
    std::printf("C (run_smc @2) : %.8f +- %.8f\n", est.value, est.se);
    return 0;
}
