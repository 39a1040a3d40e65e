#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tsmc/ctmc.hpp"
#include "tsmc/eval.hpp"
#include "tsmc/masking.hpp"
#include "tsmc/schedule.hpp"

using namespace tsmc;

namespace {

ConditionalModel small_model(const StateSpace& space, std::uint64_t seed) {
    RngStream rng{seed, 99};
    return random_target(space, 2.0, RandomTargetParams{}, rng);
}

}  // namespace

TEST_CASE("log-linear schedule satisfies its contract") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    CHECK(sched.sigma(0.0) == doctest::Approx(0.0));
    CHECK(sched.terminal_residual() == doctest::Approx(1e-3));
    CHECK(sched.survival(1.0) == doctest::Approx(1e-3));
    // derivative vs central differences
    for (double t : {0.1, 0.4, 0.8}) {
        const double h = 1e-6;
        const double fd = (sched.sigma(t + h) - sched.sigma(t - h)) / (2 * h);
        CHECK(sched.sigma_prime(t) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("schedule invariants are enforced") {
    // sigma(0) != 0
    CHECK_THROWS(NoiseSchedule([](double) { return 1.0; }, [](double) { return 0.0; }));
    // decreasing sigma
    CHECK_THROWS(NoiseSchedule([](double t) { return -t; }, [](double) { return -1.0; }));
    // terminal residual too large
    CHECK_THROWS(NoiseSchedule([](double t) { return 0.1 * t; }, [](double) { return 0.1; }));
    CHECK_THROWS(NoiseSchedule::log_linear(0.5));
}

TEST_CASE("mask transition: sigma = 0 is the identity") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(4, 1, true);
    const Distribution k = mask_transition(sp, 2, 0.0, sched);
    CHECK(k[2] == doctest::Approx(1.0));
}

TEST_CASE("mask transition: survival one half splits evenly") {
    // log-linear: survival(t) = 1 - (1 - eps) t, so survival = 1/2 at
    // t = 0.5 / (1 - eps).
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const double t_half = 0.5 / (1.0 - 1e-3);
    const StateSpace sp1(4, 1, true);
    const Distribution k1 = mask_transition(sp1, 2, t_half, sched);
    CHECK(k1[2] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(k1[4] == doctest::Approx(0.5).epsilon(1e-12));

    const StateSpace sp2(4, 2, true);
    const State x0 = sp2.encode(std::vector<std::uint32_t>{1, 3});
    const Distribution k2 = mask_transition(sp2, x0, t_half, sched);
    const std::uint32_t m = sp2.mask_symbol();
    for (const auto& digits :
         {std::vector<std::uint32_t>{1, 3}, {1, m}, {m, 3}, {m, m}})
        CHECK(k2[sp2.encode(digits)] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("mask transition rejects masked inputs") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(4, 1, true);
    CHECK_THROWS(mask_transition(sp, sp.encode(std::vector<std::uint32_t>{4}), 0.5, sched));
}

TEST_CASE("masking forward rate reproduces the closed-form kernel") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(3, 2, true);
    const auto r = masking_forward_rate(sched, sp);
    RngStream rng{31, 1};
    for (int i = 0; i < 20; ++i) {
        std::vector<std::uint32_t> digits{
            static_cast<std::uint32_t>(rng.next_below(3)),
            static_cast<std::uint32_t>(rng.next_below(3))};
        const State x0 = sp.encode(digits);
        const double t = 0.05 + 0.9 * rng.next_uniform();
        const Distribution ode = kfe_evolve(*r, Distribution::point_mass(sp, x0), 0.0, t, 1500);
        const Distribution closed = mask_transition(sp, x0, t, sched);
        CHECK(ode.total_variation(closed) < 1e-6);
    }
}

TEST_CASE("fully masked states are absorbing for the forward rate") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(3, 2, true);
    const auto r = masking_forward_rate(sched, sp);
    const State full = sp.encode(std::vector<std::uint32_t>{3, 3});
    CHECK(r->exit_rate(0.5, full) == 0.0);
}

TEST_CASE("forward marginal endpoints") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(3, 2, true);
    const ConditionalModel model = small_model(sp, 1);
    const Distribution at0 = forward_marginal(model.p0, 0.0, sched);
    CHECK(at0.total_variation(model.p0) < 1e-15);
    const Distribution at1 = forward_marginal(model.p0, 1.0, sched);
    const State full = sp.encode(std::vector<std::uint32_t>{3, 3});
    CHECK(at1[full] >= std::pow(1.0 - 1e-3, 2));
}

TEST_CASE("forward marginal: non-mask mass is exactly the survival power (d=1)") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(6, 1, true);
    const ConditionalModel model = small_model(sp, 2);
    for (double t : {0.2, 0.5, 0.9}) {
        const Distribution pt = forward_marginal(model.p0, t, sched);
        double non_mask = 0.0;
        for (State s = 0; s < sp.total_states(); ++s)
            if (!sp.any_masked(s)) non_mask += pt[s];
        CHECK(std::abs(non_mask - sched.survival(t)) < 1e-12);
    }
}

TEST_CASE("generative reverse rate: unmasking moves only") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(3, 2, true);
    const ConditionalModel model = small_model(sp, 3);
    const auto r = generative_reverse_rate(model.p0, sched);
    for (State x = 0; x < sp.total_states(); ++x) {
        if (!sp.any_masked(x)) CHECK(r->exit_rate(0.5, x) == 0.0);
        for (State y = 0; y < sp.total_states(); ++y) {
            if (x == y || r->rate(0.5, x, y) == 0.0) continue;
            // the move must unmask exactly one dimension
            int unmasked = 0;
            for (std::uint32_t d = 0; d < sp.num_dims(); ++d) {
                if (sp.digit(x, d) == sp.digit(y, d)) continue;
                CHECK(sp.dim_masked(x, d));
                CHECK(!sp.dim_masked(y, d));
                ++unmasked;
            }
            CHECK(unmasked == 1);
        }
    }
}

TEST_CASE("generative reverse rate: uniform p0 on two tokens gives equal unmask rates") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(2, 1, true);
    const Distribution p0(sp, {0.5, 0.5, 0.0});
    const auto r = generative_reverse_rate(p0, sched);
    const State masked = sp.encode(std::vector<std::uint32_t>{2});
    for (double t : {0.1, 0.5, 0.95})
        CHECK(r->rate(t, masked, 0) == doctest::Approx(r->rate(t, masked, 1)));
}

TEST_CASE("generative reverse rate: euler simulation recovers p0 empirically") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(5, 1, true);
    const ConditionalModel model = small_model(sp, 4);
    const auto r = generative_reverse_rate(model.p0, sched);
    const auto grid = SmcConfig::uniform_grid(200);
    const std::vector<State> finals =
        sample_generation_paths(*r, model.p0, sched, grid, 100000, 2024);
    const Distribution emp = empirical_distribution(finals, sp, 0.0);
    CHECK(emp.total_variation(model.p0) < 0.02);
}

TEST_CASE("uniform flip: valid generator with exact uniform stationary law") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(3, 2, false);
    const auto r = uniform_flip_rate(sched, sp);
    CHECK(!validate_rate_matrix(*r, 0.3, 1e-12).has_value());
    // the uniform law is stationary under symmetric flips
    const Distribution u = Distribution::uniform(sp);
    const Distribution evolved = kfe_evolve(*r, u, 0.0, 0.8, 500);
    CHECK(evolved.total_variation(u) < 1e-12);
}

TEST_CASE("uniform flip: generic reversal round trip") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace sp(3, 1, false);
    RngStream rng{5, 5};
    const ConditionalModel model = random_target(sp, 1.0, RandomTargetParams{}, rng);
    const auto fwd = uniform_flip_rate(sched, sp);
    const Distribution p1 = kfe_evolve(*fwd, model.p0, 0.0, 1.0, 800);
    const auto rev = reverse_rate(fwd, [&](double t) {
        return kfe_evolve(*fwd, model.p0, 0.0, std::max(t, 0.0), 400);
    });
    const Distribution back = kfe_evolve(*rev, p1, 1.0, 0.0, 800);
    CHECK(back.total_variation(model.p0) < 1e-4);
}
