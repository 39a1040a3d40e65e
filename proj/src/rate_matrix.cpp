#include "tsmc/rate_matrix.hpp"

#include <stdexcept>
#include <vector>

namespace tsmc {

namespace {

void check_dense_cap(const StateSpace& space, const char* who) {
    if (space.total_states() > kDenseStateCap)
        throw std::invalid_argument(std::string(who) + ": space exceeds dense representation cap");
}

}  // namespace

double RateMatrix::exit_rate(double t, State x) const {
    const StateSpace& sp = space();
    double total = 0.0;
    if (factorized()) {
        thread_local std::vector<double> buf;
        buf.resize(sp.base());
        for (std::uint32_t d = 0; d < sp.num_dims(); ++d) {
            dim_rates(t, x, d, buf);
            for (double r : buf) total += r;
        }
    } else {
        check_dense_cap(sp, "RateMatrix::exit_rate");
        for (State y = 0; y < sp.total_states(); ++y)
            if (y != x) total += rate(t, x, y);
    }
    return total;
}

void RateMatrix::dim_rates(double t, State x, std::uint32_t dim, std::span<double> out) const {
    const StateSpace& sp = space();
    const std::uint32_t cur = sp.digit(x, dim);
    for (std::uint32_t v = 0; v < sp.base(); ++v)
        out[v] = (v == cur) ? 0.0 : rate(t, x, sp.with_digit(x, dim, v));
}

void RateMatrix::apply_transpose(double t, std::span<const double> p, std::span<double> out) const {
    const StateSpace& sp = space();
    check_dense_cap(sp, "RateMatrix::apply_transpose");
    const State n = sp.total_states();
    for (State y = 0; y < n; ++y) out[y] = 0.0;
    if (factorized()) {
        std::vector<double> buf(sp.base());
        for (State x = 0; x < n; ++x) {
            if (p[x] == 0.0) {
                // Diagonal still contributes 0; skip the whole row.
                continue;
            }
            for (std::uint32_t d = 0; d < sp.num_dims(); ++d) {
                dim_rates(t, x, d, buf);
                for (std::uint32_t v = 0; v < sp.base(); ++v) {
                    if (buf[v] == 0.0) continue;
                    out[sp.with_digit(x, d, v)] += p[x] * buf[v];
                }
            }
            out[x] += p[x] * diagonal(t, x);
        }
    } else {
        for (State x = 0; x < n; ++x) {
            if (p[x] == 0.0) continue;
            for (State y = 0; y < n; ++y)
                if (y != x) out[y] += p[x] * rate(t, x, y);
            out[x] += p[x] * diagonal(t, x);
        }
    }
}

void RateMatrix::apply(double t, std::span<const double> u, std::span<double> out) const {
    const StateSpace& sp = space();
    check_dense_cap(sp, "RateMatrix::apply");
    const State n = sp.total_states();
    if (factorized()) {
        std::vector<double> buf(sp.base());
        for (State x = 0; x < n; ++x) {
            double acc = 0.0;
            for (std::uint32_t d = 0; d < sp.num_dims(); ++d) {
                dim_rates(t, x, d, buf);
                for (std::uint32_t v = 0; v < sp.base(); ++v) {
                    if (buf[v] == 0.0) continue;
                    acc += buf[v] * u[sp.with_digit(x, d, v)];
                }
            }
            out[x] = acc + diagonal(t, x) * u[x];
        }
    } else {
        for (State x = 0; x < n; ++x) {
            double acc = diagonal(t, x) * u[x];
            for (State y = 0; y < n; ++y)
                if (y != x) acc += rate(t, x, y) * u[y];
            out[x] = acc;
        }
    }
}

std::optional<RateMatrixViolation> validate_rate_matrix(const RateMatrix& r, double t, double tol) {
    const StateSpace& sp = r.space();
    if (sp.total_states() > kDenseStateCap)
        throw std::invalid_argument("validate_rate_matrix: space exceeds dense representation cap");
    const double row_tol = tol * static_cast<double>(sp.total_states());
    std::vector<double> buf(sp.base());
    for (State x = 0; x < sp.total_states(); ++x) {
        double exit = 0.0;
        if (r.factorized()) {
            for (std::uint32_t d = 0; d < sp.num_dims(); ++d) {
                r.dim_rates(t, x, d, buf);
                for (std::uint32_t v = 0; v < sp.base(); ++v) {
                    if (buf[v] < -tol)
                        return RateMatrixViolation{x, buf[v], "negative off-diagonal rate"};
                    exit += buf[v];
                }
            }
        } else {
            for (State y = 0; y < sp.total_states(); ++y) {
                if (y == x) continue;
                const double v = r.rate(t, x, y);
                if (v < -tol) return RateMatrixViolation{x, v, "negative off-diagonal rate"};
                exit += v;
            }
        }
        const double row_sum = r.diagonal(t, x) + exit;
        if (std::abs(row_sum) > row_tol)
            return RateMatrixViolation{x, row_sum, "row sum violates mass conservation"};
    }
    return std::nullopt;
}

}  // namespace tsmc
