#include "tsmc/ctmc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "tsmc/errors.hpp"

namespace tsmc {

namespace {

constexpr double kMassDriftTol = 1e-6;

void check_direction(const RateMatrix& r, double t_from, double t_to, const char* who) {
    if (t_to == t_from) return;
    const bool forward_flow = t_to > t_from;
    const bool wants_forward = r.direction() == TimeDirection::forward;
    if (forward_flow != wants_forward)
        throw std::invalid_argument(std::string(who) +
                                    ": integration direction does not match rate matrix direction");
}

// RK4 for dv/dtau = rhs(t(tau), v) on tau in [0, |t_to - t_from|], where
// t(tau) walks from t_from toward t_to.
template <typename Rhs>
void rk4_integrate(double t_from, double t_to, int steps, std::vector<double>& v, Rhs&& rhs) {
    if (steps <= 0) throw std::invalid_argument("rk4_integrate: steps must be positive");
    const double span = t_to - t_from;
    if (span == 0.0) return;
    const double h = span / steps;
    const std::size_t n = v.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    for (int s = 0; s < steps; ++s) {
        const double t0 = t_from + s * h;
        rhs(t0, v, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = v[i] + 0.5 * h * k1[i];
        rhs(t0 + 0.5 * h, tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = v[i] + 0.5 * h * k2[i];
        rhs(t0 + 0.5 * h, tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = v[i] + h * k3[i];
        rhs(t0 + h, tmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            v[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

void check_finite(std::span<const double> v, const char* who) {
    for (double x : v)
        if (!std::isfinite(x)) throw NumericalError(std::string(who) + ": non-finite value");
}

}  // namespace

std::vector<PathRecord::Jump> PathRecord::jumps() const {
    std::vector<Jump> out;
    for (std::size_t i = 0; i + 1 < states.size(); ++i)
        if (states[i + 1] != states[i]) out.push_back({i, states[i], states[i + 1]});
    return out;
}

Distribution kfe_evolve(const RateMatrix& r, const Distribution& p_init, double t_from,
                        double t_to, int steps, double* mass_drift) {
    check_direction(r, t_from, t_to, "kfe_evolve");
    // In chain time (t for forward, 1 - t for reverse) the marginal obeys
    // dp/dtau = R^T p; expressed in t that picks up the direction sign.
    const double sign = (r.direction() == TimeDirection::forward) ? 1.0 : -1.0;
    std::vector<double> p(p_init.probs().begin(), p_init.probs().end());
    rk4_integrate(t_from, t_to, steps, p,
                  [&](double t, const std::vector<double>& v, std::vector<double>& out) {
                      r.apply_transpose(t, v, out);
                      for (double& x : out) x *= sign;
                  });
    check_finite(p, "kfe_evolve");
    Distribution result(p_init.space(), std::move(p));
    const double drift = std::abs(result.total_mass() - 1.0);
    if (mass_drift) *mass_drift = drift;
    if (drift > kMassDriftTol)
        throw NumericalError("kfe_evolve: normalization drift " + std::to_string(drift) +
                             " exceeds tolerance");
    result.normalize();
    return result;
}

std::vector<double> kbe_evolve(const RateMatrix& r, const std::vector<double>& u_terminal,
                               double t_from, double t_to, int steps) {
    if (u_terminal.size() != r.space().total_states())
        throw std::invalid_argument("kbe_evolve: vector size does not match state space");
    // The backward equation integrates against the flow, so the sign check is
    // the mirror image of kfe_evolve's.
    if (t_to != t_from) {
        const bool against_flow = (r.direction() == TimeDirection::forward) ? (t_to < t_from)
                                                                            : (t_to > t_from);
        if (!against_flow)
            throw std::invalid_argument("kbe_evolve: must integrate against the flow of R");
    }
    // du/dtau = -R u in chain time; against the flow of a forward chain this
    // reads du/dt = -R u, against a reverse chain du/dt = +R u.
    const double sign = (r.direction() == TimeDirection::forward) ? -1.0 : 1.0;
    std::vector<double> u = u_terminal;
    rk4_integrate(t_from, t_to, steps, u,
                  [&](double t, const std::vector<double>& v, std::vector<double>& out) {
                      r.apply(t, v, out);
                      for (double& x : out) x *= sign;
                  });
    check_finite(u, "kbe_evolve");
    return u;
}

void fill_euler_dim_kernel(const RateMatrix& r, double t, double dt, State x, std::uint32_t dim,
                           std::span<double> out) {
    const StateSpace& sp = r.space();
    r.dim_rates(t, x, dim, out);
    const std::uint32_t cur = sp.digit(x, dim);
    double exit = 0.0;
    for (std::uint32_t v = 0; v < sp.base(); ++v) {
        if (out[v] < 0.0)
            throw NumericalError("euler kernel: negative off-diagonal rate detected");
        out[v] *= dt;
        exit += out[v];
    }
    const double stay = 1.0 - exit;
    if (stay >= 0.0) {
        out[cur] = stay;  // kernel already sums to 1
        return;
    }
    // Coarse step: clamp the stay probability at 0 and renormalize.
    out[cur] = 0.0;
    for (std::uint32_t v = 0; v < sp.base(); ++v) out[v] /= exit;
}

void fill_euler_dense_kernel(const RateMatrix& r, double t, double dt, State x,
                             std::span<double> out) {
    const StateSpace& sp = r.space();
    if (sp.total_states() > kDenseStateCap)
        throw std::invalid_argument("fill_euler_dense_kernel: space exceeds dense cap");
    double exit = 0.0;
    for (State y = 0; y < sp.total_states(); ++y) {
        if (y == x) {
            out[y] = 0.0;
            continue;
        }
        const double rate = r.rate(t, x, y);
        if (rate < 0.0) throw NumericalError("euler kernel: negative off-diagonal rate detected");
        out[y] = rate * dt;
        exit += out[y];
    }
    const double stay = 1.0 - exit;
    if (stay >= 0.0) {
        out[x] = stay;
        return;
    }
    out[x] = 0.0;
    for (State y = 0; y < sp.total_states(); ++y) out[y] /= exit;
}

Distribution euler_transition_probs(const RateMatrix& r, State x, double t, double dt) {
    const StateSpace& sp = r.space();
    if (dt <= 0.0) throw std::invalid_argument("euler_transition_probs: dt must be positive");
    if (sp.total_states() > kDenseStateCap)
        throw std::invalid_argument("euler_transition_probs: space exceeds dense cap");
    std::vector<double> probs(sp.total_states(), 0.0);
    if (!r.factorized()) {
        fill_euler_dense_kernel(r, t, dt, x, probs);
        return Distribution(sp, std::move(probs));
    }
    // Product of per-dimension kernels.
    std::vector<double> kernel(sp.base());
    probs[x] = 1.0;
    std::vector<double> next(sp.total_states(), 0.0);
    for (std::uint32_t d = 0; d < sp.num_dims(); ++d) {
        fill_euler_dim_kernel(r, t, dt, x, d, kernel);
        std::fill(next.begin(), next.end(), 0.0);
        for (State s = 0; s < sp.total_states(); ++s) {
            if (probs[s] == 0.0) continue;
            for (std::uint32_t v = 0; v < sp.base(); ++v) {
                if (kernel[v] == 0.0) continue;
                next[sp.with_digit(s, d, v)] += probs[s] * kernel[v];
            }
        }
        probs.swap(next);
    }
    return Distribution(sp, std::move(probs));
}

double euler_log_transition(const RateMatrix& r, double t, double dt, State from, State to) {
    const StateSpace& sp = r.space();
    if (dt <= 0.0) throw std::invalid_argument("euler_log_transition: dt must be positive");
    thread_local std::vector<double> kernel;
    if (r.factorized()) {
        kernel.resize(sp.base());
        double log_p = 0.0;
        for (std::uint32_t d = 0; d < sp.num_dims(); ++d) {
            fill_euler_dim_kernel(r, t, dt, from, d, kernel);
            const double p = kernel[sp.digit(to, d)];
            if (p <= 0.0) return -std::numeric_limits<double>::infinity();
            log_p += std::log(p);
        }
        return log_p;
    }
    kernel.resize(sp.total_states());
    fill_euler_dense_kernel(r, t, dt, from, kernel);
    const double p = kernel[to];
    return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

State euler_step(const RateMatrix& r, double t, double dt, State x, RngStream& rng) {
    const StateSpace& sp = r.space();
    if (dt <= 0.0) throw std::invalid_argument("euler_step: dt must be positive");
    thread_local std::vector<double> kernel;
    if (r.factorized()) {
        kernel.resize(sp.base());
        State y = x;
        for (std::uint32_t d = 0; d < sp.num_dims(); ++d) {
            fill_euler_dim_kernel(r, t, dt, x, d, kernel);
            const auto v = static_cast<std::uint32_t>(sample_index(kernel, 1.0, rng));
            if (v != sp.digit(x, d)) y = sp.with_digit(y, d, v);
        }
        return y;
    }
    kernel.resize(sp.total_states());
    fill_euler_dense_kernel(r, t, dt, x, kernel);
    return static_cast<State>(sample_index(kernel, 1.0, rng));
}

Distribution euler_chain_marginal(const RateMatrix& r, const Distribution& p_init,
                                  std::span<const double> grid) {
    const StateSpace& sp = r.space();
    if (grid.size() < 2)
        throw std::invalid_argument("euler_chain_marginal: grid needs at least two points");
    std::vector<double> v(p_init.probs().begin(), p_init.probs().end());
    std::vector<double> next(v.size());
    for (std::size_t l = 0; l + 1 < grid.size(); ++l) {
        check_direction(r, grid[l], grid[l + 1], "euler_chain_marginal");
        const double t = grid[l];
        const double dt = std::abs(grid[l + 1] - grid[l]);
        std::fill(next.begin(), next.end(), 0.0);
        for (State x = 0; x < sp.total_states(); ++x) {
            if (v[x] == 0.0) continue;
            const Distribution k = euler_transition_probs(r, x, t, dt);
            for (State y = 0; y < sp.total_states(); ++y)
                if (k[y] != 0.0) next[y] += v[x] * k[y];
        }
        v.swap(next);
    }
    Distribution out(p_init.space(), std::move(v));
    out.normalize();
    return out;
}

PathRecord simulate_path(const RateMatrix& r, State x_init, std::span<const double> grid,
                         RngStream& rng) {
    if (grid.empty()) throw std::invalid_argument("simulate_path: empty grid");
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        if (grid[i + 1] == grid[i])
            throw std::invalid_argument("simulate_path: grid must be strictly monotone");
        check_direction(r, grid[i], grid[i + 1], "simulate_path");
    }
    PathRecord path;
    path.grid.assign(grid.begin(), grid.end());
    path.states.reserve(grid.size());
    path.states.push_back(x_init);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double dt = std::abs(grid[i + 1] - grid[i]);
        path.states.push_back(euler_step(r, grid[i], dt, path.states.back(), rng));
    }
    return path;
}

namespace {

class ReversedRateMatrix final : public RateMatrix {
public:
    ReversedRateMatrix(RateMatrixPtr fwd, std::function<Distribution(double)> marginals)
        : RateMatrix(fwd->space(),
                     fwd->direction() == TimeDirection::forward ? TimeDirection::reverse
                                                                : TimeDirection::forward,
                     fwd->support()),
          fwd_(std::move(fwd)),
          marginals_(std::move(marginals)) {}

    double rate(double t, State x, State y) const override {
        const Distribution m = marginals_(t);
        return ratio_rate(t, x, y, m);
    }

    void dim_rates(double t, State x, std::uint32_t dim, std::span<double> out) const override {
        const Distribution m = marginals_(t);
        const StateSpace& sp = space();
        const std::uint32_t cur = sp.digit(x, dim);
        for (std::uint32_t v = 0; v < sp.base(); ++v)
            out[v] = (v == cur) ? 0.0 : ratio_rate(t, x, sp.with_digit(x, dim, v), m);
    }

    void apply_transpose(double t, std::span<const double> p, std::span<double> out) const override {
        const Distribution m = marginals_(t);
        bulk_apply(t, p, out, m, /*transpose=*/true);
    }

    void apply(double t, std::span<const double> u, std::span<double> out) const override {
        const Distribution m = marginals_(t);
        bulk_apply(t, u, out, m, /*transpose=*/false);
    }

private:
    double ratio_rate(double t, State x, State y, const Distribution& m) const {
        const double px = m[x];
        const double py = m[y];
        // Zero-mass conventions: unreachable source states have no outflow;
        // zero-mass targets receive no flow.
        if (py == 0.0) return 0.0;
        const double incoming = fwd_->rate(t, y, x);
        if (incoming == 0.0) return 0.0;
        if (px == 0.0)
            throw NumericalError("reverse_rate: flow into zero-mass state " + std::to_string(x));
        return incoming * py / px;
    }

    void bulk_apply(double t, std::span<const double> v, std::span<double> out,
                    const Distribution& m, bool transpose) const {
        const StateSpace& sp = space();
        const State n = sp.total_states();
        for (State i = 0; i < n; ++i) out[i] = 0.0;
        std::vector<double> buf(sp.base());
        for (State x = 0; x < n; ++x) {
            double exit = 0.0;
            auto visit = [&](State y, double r) {
                exit += r;
                if (transpose)
                    out[y] += v[x] * r;
                else
                    out[x] += r * v[y];
            };
            if (factorized()) {
                for (std::uint32_t d = 0; d < sp.num_dims(); ++d) {
                    const std::uint32_t cur = sp.digit(x, d);
                    for (std::uint32_t val = 0; val < sp.base(); ++val) {
                        if (val == cur) continue;
                        const State y = sp.with_digit(x, d, val);
                        const double r = ratio_rate(t, x, y, m);
                        if (r != 0.0) visit(y, r);
                    }
                }
            } else {
                for (State y = 0; y < n; ++y) {
                    if (y == x) continue;
                    const double r = ratio_rate(t, x, y, m);
                    if (r != 0.0) visit(y, r);
                }
            }
            out[x] -= exit * v[x];
        }
    }

    RateMatrixPtr fwd_;
    std::function<Distribution(double)> marginals_;
};

}  // namespace

RateMatrixPtr reverse_rate(RateMatrixPtr forward, std::function<Distribution(double)> marginals) {
    if (!forward) throw std::invalid_argument("reverse_rate: null rate matrix");
    return std::make_shared<ReversedRateMatrix>(std::move(forward), std::move(marginals));
}

}  // namespace tsmc
