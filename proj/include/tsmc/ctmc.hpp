#pragma once

#include <functional>
#include <vector>

#include "tsmc/distribution.hpp"
#include "tsmc/rate_matrix.hpp"
#include "tsmc/rng.hpp"

namespace tsmc {

// Piecewise-constant trajectory sampled on a strictly monotone time grid.
// Generation paths use the reverse-time convention t_1 = 1 > ... > t_T = 0.
struct PathRecord {
    struct Jump {
        std::size_t index;  // transition grid[index] -> grid[index + 1]
        State from;
        State to;
    };

    std::vector<double> grid;
    std::vector<State> states;

    std::vector<Jump> jumps() const;
};

// Integrates the Kolmogorov forward equation with classical RK4 on a uniform
// grid of `steps` sub-steps and renormalizes the result.  The direction of R
// must match the sign of (t_to - t_from).  If mass_drift is non-null it
// receives |sum p - 1| before renormalization; a drift above 1e-6 raises
// NumericalError.
Distribution kfe_evolve(const RateMatrix& r, const Distribution& p_init, double t_from,
                        double t_to, int steps, double* mass_drift = nullptr);

// Integrates the Kolmogorov backward equation against the flow of R: for a
// reverse-time generator, u_terminal lives at the flow's endpoint (small t)
// and is carried to larger t, giving u_t(x) = E[h(X_end) | X_t = x].
std::vector<double> kbe_evolve(const RateMatrix& r, const std::vector<double>& u_terminal,
                               double t_from, double t_to, int steps);

// One-step Euler kernel over the values of a single dimension; out has
// base() entries and sums to 1.  The stay probability is clamped at 0 and the
// kernel renormalized when the time step is too coarse.
void fill_euler_dim_kernel(const RateMatrix& r, double t, double dt, State x, std::uint32_t dim,
                           std::span<double> out);

// Full-state one-step Euler kernel for dense-support matrices.
void fill_euler_dense_kernel(const RateMatrix& r, double t, double dt, State x,
                             std::span<double> out);

// Joint one-step Euler transition distribution from x; for factorized
// matrices this is the per-dimension product kernel.
Distribution euler_transition_probs(const RateMatrix& r, State x, double t, double dt);

// log of the joint Euler transition probability (per-dimension product for
// factorized support); -inf when the move has probability 0.
double euler_log_transition(const RateMatrix& r, double t, double dt, State from, State to);

// Samples one Euler transition.
State euler_step(const RateMatrix& r, double t, double dt, State x, RngStream& rng);

// Deterministic marginal propagation through the composed one-step Euler
// kernels along the grid.  First-order accurate in the grid spacing and
// unconditionally stable (every factor is a stochastic matrix), which makes
// it the right tool for stiff guided processes whose exit rates blow up near
// the end of generation.
Distribution euler_chain_marginal(const RateMatrix& r, const Distribution& p_init,
                                  std::span<const double> grid);

// Chains euler_step along the grid.
PathRecord simulate_path(const RateMatrix& r, State x_init, std::span<const double> grid,
                         RngStream& rng);

// Time reversal: rate(t, x, y) = forward.rate(t, y, x) * m_t(y) / m_t(x),
// with zero-mass states given zero outflow.  `marginals` must return the
// chain's marginal law at time t.
RateMatrixPtr reverse_rate(RateMatrixPtr forward, std::function<Distribution(double)> marginals);

}  // namespace tsmc
