#include <doctest.h>

#include "tsmc/masking.hpp"
#include "tsmc/rate_matrix.hpp"
#include "tsmc/rng.hpp"
#include "tsmc/schedule.hpp"

using namespace tsmc;

namespace {

RateMatrixPtr two_state(double a01, double a10, double d0, double d1) {
    return std::make_shared<LambdaRateMatrix>(
        StateSpace(2, 1, false), TimeDirection::forward, RateSupport::dense,
        [=](double, State x, State y) {
            if (x == 0) return y == 0 ? d0 : a01;
            return y == 1 ? d1 : a10;
        });
}

}  // namespace

TEST_CASE("symmetric two-state generator validates") {
    const auto r = two_state(1.0, 1.0, -1.0, -1.0);
    CHECK(!validate_rate_matrix(*r, 0.3, 1e-12).has_value());
}

TEST_CASE("broken row sum is reported with row and value") {
    const auto r = two_state(1.0, 0.0, 0.0, 0.0);  // row 0 sums to 1
    const auto violation = validate_rate_matrix(*r, 0.0, 1e-12);
    REQUIRE(violation.has_value());
    CHECK(violation->row == 0);
    CHECK(violation->value == doctest::Approx(1.0));
}

TEST_CASE("negative off-diagonal is reported") {
    const auto r = two_state(-0.5, 1.0, 0.5, -1.0);
    const auto violation = validate_rate_matrix(*r, 0.0, 1e-9);
    REQUIRE(violation.has_value());
    CHECK(violation->value == doctest::Approx(-0.5));
}

TEST_CASE("masking forward rate validates at t = 0.5 under the log-linear schedule") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace space(3, 2, true);
    const auto r = masking_forward_rate(sched, space);
    CHECK(!validate_rate_matrix(*r, 0.5, 1e-12).has_value());
}

TEST_CASE("default dim_rates agrees with rate()") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace space(4, 2, true);
    const auto r = masking_forward_rate(sched, space);
    std::vector<double> buf(space.base());
    RngStream rng{5, 5};
    for (int i = 0; i < 50; ++i) {
        const State x = rng.next_below(space.total_states());
        const double t = rng.next_uniform() * 0.9;
        for (std::uint32_t d = 0; d < space.num_dims(); ++d) {
            r->dim_rates(t, x, d, buf);
            for (std::uint32_t v = 0; v < space.base(); ++v) {
                if (v == space.digit(x, d)) {
                    CHECK(buf[v] == 0.0);
                } else {
                    CHECK(buf[v] == doctest::Approx(r->rate(t, x, space.with_digit(x, d, v)))
                                        .epsilon(1e-14));
                }
            }
        }
    }
}

TEST_CASE("exit rate sums the off-diagonals") {
    const NoiseSchedule sched = NoiseSchedule::log_linear();
    const StateSpace space(3, 2, true);
    const auto r = masking_forward_rate(sched, space);
    const State fresh = space.encode(std::vector<std::uint32_t>{1, 2});
    // two unmasked dims, each masking at rate sigma'(t)
    CHECK(r->exit_rate(0.4, fresh) == doctest::Approx(2.0 * sched.sigma_prime(0.4)));
    const State full = space.encode(std::vector<std::uint32_t>{3, 3});
    CHECK(r->exit_rate(0.4, full) == 0.0);  // absorbing
}
