#pragma once

#include <functional>

namespace tsmc {

// Cumulative noise schedule sigma: [0,1] -> R+ driving masking corruption.
// A token survives unmasked to time t with probability exp(-sigma(t)).
// Construction validates sigma(0) = 0, monotonicity on a 1000-point grid, and
// terminal residual exp(-sigma(1)) <= 1e-3 so that p_1 is a near-point-mass
// at the fully masked state.
class NoiseSchedule {
public:
    using Fn = std::function<double(double)>;

    NoiseSchedule(Fn sigma, Fn sigma_prime);

    // sigma(t) = -ln(1 - (1 - residual) * t): the per-token unmasking
    // probability is linear in t and exp(-sigma(1)) = residual.
    static NoiseSchedule log_linear(double terminal_residual = 1e-3);

    double sigma(double t) const { return sigma_(t); }
    double sigma_prime(double t) const { return sigma_prime_(t); }
    double survival(double t) const;  // exp(-sigma(t))
    double terminal_residual() const { return terminal_residual_; }

private:
    Fn sigma_;
    Fn sigma_prime_;
    double terminal_residual_;
};

}  // namespace tsmc
