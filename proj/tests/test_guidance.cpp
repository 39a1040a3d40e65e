#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tsmc/ctmc.hpp"
#include "tsmc/errors.hpp"
#include "tsmc/eval.hpp"
#include "tsmc/guidance.hpp"

using namespace tsmc;

namespace {

ConditionalModel model_for(const StateSpace& sp, std::uint64_t seed, double alpha = 2.0) {
    RngStream rng{seed, 11};
    return random_target(sp, alpha, RandomTargetParams{}, rng);
}

}  // namespace

TEST_CASE("conditional likelihood: fully unmasked states reveal X0") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(4, 2, true);
    const ConditionalModel model = model_for(sp, 1);
    for (State s = 0; s < sp.total_states(); ++s) {
        if (sp.any_masked(s) || model.p0[s] <= 0.0) continue;
        CHECK(conditional_likelihood(model, sched, s, 0.4) ==
              doctest::Approx(model.likelihood[s]).epsilon(1e-14));
    }
}

TEST_CASE("conditional likelihood: fully masked is the prior mean") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(2, 1, true);
    const ConditionalModel model{Distribution(sp, {0.5, 0.5, 0.0}), {0.8, 0.2, 0.0}};
    const State masked = sp.encode(std::vector<std::uint32_t>{2});
    CHECK(conditional_likelihood(model, sched, masked, 0.7) == doctest::Approx(0.5));
}

TEST_CASE("conditional likelihood agrees with the KBE route") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(5, 2, true);
    const ConditionalModel model = model_for(sp, 2);
    const auto r = generative_reverse_rate(model.p0, sched);
    // The masked entries relax through a singular layer at t = 0+; the error
    // there falls off first order in the step count.
    const std::vector<double> u = kbe_evolve(*r, model.likelihood, 0.0, 0.55, 220000);
    const Distribution pt = forward_marginal(model.p0, 0.55, sched);
    for (State s = 0; s < sp.total_states(); ++s) {
        if (pt[s] <= 0.0) continue;
        CHECK(std::abs(conditional_likelihood(model, sched, s, 0.55) - u[s]) < 1e-6);
    }
}

TEST_CASE("conditional likelihood: unreachable state raises") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(3, 1, true);
    const Distribution p0(sp, {0.6, 0.0, 0.4, 0.0});
    const ConditionalModel model{p0, {0.5, 0.5, 0.5, 0.0}};
    CHECK_THROWS_AS(conditional_likelihood(model, sched, 1, 0.5), NumericalError);
}

TEST_CASE("guided rate: alpha 0 returns the base process") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(3, 1, true);
    const ConditionalModel model = model_for(sp, 3);
    const auto base = generative_reverse_rate(model.p0, sched);
    const auto guided = guided_rate(base, model, sched, 0.0);
    CHECK(guided.get() == base.get());
}

TEST_CASE("guided rate at alpha 1 drives p1 to the conditional (KFE, sharp schedule)") {
    // Residual 1e-6 puts the t=1 mismatch well below the 1e-5 check.
    const NoiseSchedule sched = NoiseSchedule::log_linear(1e-6);
    const StateSpace sp(2, 1, true);
    const ConditionalModel model = model_for(sp, 4);
    const auto guided = guided_rate(generative_reverse_rate(model.p0, sched), model, sched, 1.0);
    const Distribution p1 = forward_marginal(model.p0, 1.0, sched);
    const Distribution reached = kfe_evolve(*guided, p1, 1.0, 0.0, 40000);
    CHECK(reached.total_variation(tempered_target(model, 1.0)) < 1e-5);
}

TEST_CASE("guided rate is invariant under likelihood rescaling") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(3, 2, true);
    const ConditionalModel model = model_for(sp, 5);
    ConditionalModel doubled = model;
    for (double& v : doubled.likelihood) v *= 2.0;
    const auto base = generative_reverse_rate(model.p0, sched);
    const auto g1 = guided_rate(base, model, sched, 2.0);
    const auto g2 = guided_rate(base, doubled, sched, 2.0);
    RngStream rng{6, 6};
    for (int i = 0; i < 200; ++i) {
        const double t = 0.02 + 0.95 * rng.next_uniform();
        const State x = rng.next_below(sp.total_states());
        const State y = rng.next_below(sp.total_states());
        if (x == y) continue;
        CHECK(g1->rate(t, x, y) == doctest::Approx(g2->rate(t, x, y)).epsilon(1e-12));
    }
}

TEST_CASE("true tempered rate equals guided rate at alpha 1") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(4, 2, true);
    const ConditionalModel model = model_for(sp, 7);
    const auto base = generative_reverse_rate(model.p0, sched);
    const auto guided = guided_rate(base, model, sched, 1.0);
    const auto true_rate = true_tempered_rate(base, model, sched, 1.0);
    RngStream rng{8, 8};
    for (int i = 0; i < 300; ++i) {
        const double t = 0.02 + 0.95 * rng.next_uniform();
        const State x = rng.next_below(sp.total_states());
        const State y = rng.next_below(sp.total_states());
        if (x == y) continue;
        const double a = guided->rate(t, x, y);
        const double b = true_rate->rate(t, x, y);
        CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)));
    }
}

TEST_CASE("true tempered differs from guided at alpha 2") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(3, 2, true);
    const ConditionalModel model = model_for(sp, 9);
    const auto base = generative_reverse_rate(model.p0, sched);
    const auto guided = guided_rate(base, model, sched, 2.0);
    const auto true_rate = true_tempered_rate(base, model, sched, 2.0);
    double max_diff = 0.0;
    for (State x = 0; x < sp.total_states(); ++x)
        for (State y = 0; y < sp.total_states(); ++y) {
            if (x == y) continue;
            max_diff = std::max(max_diff,
                                std::abs(guided->rate(0.5, x, y) - true_rate->rate(0.5, x, y)));
        }
    CHECK(max_diff > 1e-6);
}

TEST_CASE("true tempered KFE round trip reaches the tempered target") {
    const NoiseSchedule sched = NoiseSchedule::log_linear(1e-6);
    const StateSpace sp(3, 1, true);
    const ConditionalModel model = model_for(sp, 10);
    const auto rt = true_tempered_rate(generative_reverse_rate(model.p0, sched), model, sched, 2.0);
    const Distribution p1 = forward_marginal(model.p0, 1.0, sched);
    const Distribution reached = kfe_evolve(*rt, p1, 1.0, 0.0, 40000);
    CHECK(reached.total_variation(tempered_target(model, 2.0)) < 1e-5);
}

TEST_CASE("tempered target closed forms") {
    const StateSpace sp(2, 1, true);
    SUBCASE("alpha 0 returns p0") {
        const ConditionalModel model{Distribution(sp, {0.3, 0.7, 0.0}), {0.9, 0.1, 0.0}};
        const Distribution t = tempered_target(model, 0.0);
        CHECK(t[0] == doctest::Approx(0.3));
        CHECK(t[1] == doctest::Approx(0.7));
    }
    SUBCASE("alpha 1 with uniform prior reproduces the likelihood") {
        const ConditionalModel model{Distribution(sp, {0.5, 0.5, 0.0}), {0.9, 0.1, 0.0}};
        const Distribution t = tempered_target(model, 1.0);
        CHECK(t[0] == doctest::Approx(0.9));
        CHECK(t[1] == doctest::Approx(0.1));
    }
}

TEST_CASE("tempered target: three-state arithmetic at alpha 2") {
    const StateSpace sp(3, 1, true);
    const ConditionalModel model{Distribution(sp, {0.5, 0.3, 0.2, 0.0}),
                                 {0.8, 0.15, 0.05, 0.0}};
    const Distribution t = tempered_target(model, 2.0);
    CHECK(std::abs(t[0] - 0.9778) < 1e-4);
    CHECK(std::abs(t[1] - 0.0206) < 1e-4);
    CHECK(std::abs(t[2] - 0.0015) < 1e-4);
}

TEST_CASE("tempered target rejects an all-zero tilt") {
    const StateSpace sp(2, 1, true);
    const ConditionalModel model{Distribution(sp, {1.0, 0.0, 0.0}), {0.0, 1.0, 0.0}};
    CHECK_THROWS_AS(tempered_target(model, 1.0), NumericalError);
}

TEST_CASE("tempered marginal endpoints and dual-route agreement") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(4, 2, true);
    const ConditionalModel model = model_for(sp, 11);
    for (double alpha : {1.0, 2.0, 4.0}) {
        const Distribution at0 = tempered_marginal_true(model, sched, alpha, 0.0);
        CHECK(at0.total_variation(tempered_target(model, alpha)) < 1e-14);
        const Distribution at1 = tempered_marginal_true(model, sched, alpha, 1.0);
        const Distribution p1 = forward_marginal(model.p0, 1.0, sched);
        CHECK(at1.total_variation(p1) < 2.0 * sp.num_dims() * 1e-3);
        for (double t : {0.2, 0.5, 0.8}) {
            const Distribution a = tempered_marginal_true(model, sched, alpha, t);
            const Distribution b = tempered_marginal_proportional(model, sched, alpha, t);
            CHECK(a.total_variation(b) < 1e-9);
        }
    }
}

TEST_CASE("conditional moment table matches the Bayes enumeration oracle") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(4, 2, true);
    const ConditionalModel model = model_for(sp, 12);
    for (double alpha : {1.0, 2.0, 4.0}) {
        const std::vector<double> table = conditional_moment_table(model, alpha);
        for (State s = 0; s < sp.total_states(); ++s) {
            const double oracle = oracles::bayes_conditional_moment(model, sched, s, 0.5, alpha);
            CHECK(std::abs(table[s] - oracle) <= 1e-12 * std::max(1.0, oracle));
        }
    }
}

TEST_CASE("zero likelihood at a reachable source state raises on rate evaluation") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(2, 2, true);
    // likelihood zero on every completion of (0, *): the moment table vanishes
    // at the partially masked source state even though p0 reaches it.
    const Distribution p0(sp, {0.25, 0.25, 0.0, 0.25, 0.25, 0.0, 0.0, 0.0, 0.0});
    std::vector<double> lik(sp.total_states(), 0.0);
    lik[sp.encode(std::vector<std::uint32_t>{1, 0})] = 1.0;
    lik[sp.encode(std::vector<std::uint32_t>{1, 1})] = 1.0;
    const ConditionalModel model{p0, lik};
    const auto guided = guided_rate(generative_reverse_rate(p0, sched), model, sched, 2.0);
    const State bad = sp.encode(std::vector<std::uint32_t>{0, sp.mask_symbol()});
    CHECK_THROWS_AS(guided->rate(0.5, bad, sp.encode(std::vector<std::uint32_t>{0, 0})),
                    NumericalError);
}

TEST_CASE("deterministic bias witness: guided evolution misses targets the true process hits") {
    const NoiseSchedule sched = NoiseSchedule::log_linear(1e-6);
    const StateSpace sp(3, 2, true);
    // Guided processes are stiff near t = 0 (exit rates c/t with large c), so
    // their marginal goes through the stable Euler chain; the true process
    // keeps the 1/t masking structure and integrates fine with RK4.
    const auto chain_grid = SmcConfig::uniform_grid(4000);
    for (double alpha : {2.0, 4.0}) {
        const ConditionalModel model = model_for(sp, 13 + static_cast<std::uint64_t>(alpha));
        const Distribution target = tempered_target(model, alpha);
        const Distribution p1 = forward_marginal(model.p0, 1.0, sched);
        const auto base = generative_reverse_rate(model.p0, sched);
        const Distribution via_guided =
            euler_chain_marginal(*guided_rate(base, model, sched, alpha), p1, chain_grid);
        const Distribution via_true =
            kfe_evolve(*true_tempered_rate(base, model, sched, alpha), p1, 1.0, 0.0, 64000);
        const double kl_guided = kl_divergence(target, via_guided);
        const double kl_true = kl_divergence(target, via_true);
        CHECK(kl_true <= 1e-5);
        CHECK(kl_guided > kl_true);
    }
}
