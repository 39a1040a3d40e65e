#include "tsmc/guidance.hpp"

#include <cmath>
#include <stdexcept>

#include "tsmc/errors.hpp"

namespace tsmc {

namespace {

class TiltedRateMatrix final : public RateMatrix {
public:
    TiltedRateMatrix(RateMatrixPtr base, std::shared_ptr<const std::vector<double>> tilt)
        : RateMatrix(base->space(), base->direction(), base->support()),
          base_(std::move(base)),
          static_tilt_(std::move(tilt)) {}

    TiltedRateMatrix(RateMatrixPtr base, std::function<std::vector<double>(double)> tilt_at)
        : RateMatrix(base->space(), base->direction(), base->support()),
          base_(std::move(base)),
          tilt_at_(std::move(tilt_at)) {}

    double rate(double t, State x, State y) const override {
        const double r = base_->rate(t, x, y);
        if (r == 0.0) return 0.0;
        if (static_tilt_) return scale(r, (*static_tilt_)[y], (*static_tilt_)[x], x);
        const std::vector<double> g = tilt_at_(t);
        return scale(r, g[y], g[x], x);
    }

    void dim_rates(double t, State x, std::uint32_t dim, std::span<double> out) const override {
        base_->dim_rates(t, x, dim, out);
        const StateSpace& sp = space();
        if (static_tilt_) {
            fill_scaled(sp, x, dim, *static_tilt_, out);
        } else {
            const std::vector<double> g = tilt_at_(t);
            fill_scaled(sp, x, dim, g, out);
        }
    }

    void apply_transpose(double t, std::span<const double> p, std::span<double> out) const override {
        with_tilt_vector(t, [&](const std::vector<double>& g) { bulk(t, p, out, g, true); });
    }

    void apply(double t, std::span<const double> u, std::span<double> out) const override {
        with_tilt_vector(t, [&](const std::vector<double>& g) { bulk(t, u, out, g, false); });
    }

private:
    double scale(double base_rate, double ty, double tx, State x) const {
        if (tx <= 0.0)
            throw NumericalError("tilted rate: zero tilt at source state " + std::to_string(x) +
                                 " with nonzero outflow");
        if (ty == 0.0) return 0.0;
        return base_rate * ty / tx;
    }

    void fill_scaled(const StateSpace& sp, State x, std::uint32_t dim,
                     const std::vector<double>& g, std::span<double> out) const {
        bool any = false;
        for (std::uint32_t v = 0; v < sp.base(); ++v) {
            if (out[v] == 0.0) continue;
            any = true;
            const double ty = g[sp.with_digit(x, dim, v)];
            out[v] = (ty == 0.0) ? 0.0 : out[v] * ty;
        }
        if (!any) return;
        const double tx = g[x];
        if (tx <= 0.0)
            throw NumericalError("tilted rate: zero tilt at source state " + std::to_string(x) +
                                 " with nonzero outflow");
        for (std::uint32_t v = 0; v < sp.base(); ++v) out[v] /= tx;
    }

    template <typename Fn>
    void with_tilt_vector(double t, Fn&& fn) const {
        if (static_tilt_) {
            fn(*static_tilt_);
        } else {
            const std::vector<double> g = tilt_at_(t);
            fn(g);
        }
    }

    void bulk(double t, std::span<const double> v, std::span<double> out,
              const std::vector<double>& g, bool transpose) const {
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
                    base_->dim_rates(t, x, d, buf);
                    fill_scaled(sp, x, d, g, buf);
                    for (std::uint32_t val = 0; val < sp.base(); ++val)
                        if (buf[val] != 0.0) visit(sp.with_digit(x, d, val), buf[val]);
                }
            } else {
                for (State y = 0; y < n; ++y) {
                    if (y == x) continue;
                    const double r = rate(t, x, y);
                    if (r != 0.0) visit(y, r);
                }
            }
            out[x] -= exit * v[x];
        }
    }

    RateMatrixPtr base_;
    std::shared_ptr<const std::vector<double>> static_tilt_;
    std::function<std::vector<double>(double)> tilt_at_;
};

std::shared_ptr<const std::vector<double>> check_tilt(const RateMatrix& base,
                                                      std::shared_ptr<const std::vector<double>> t) {
    if (!t || t->size() != base.space().total_states())
        throw std::invalid_argument("tilted_rate: tilt vector size mismatch");
    for (double v : *t)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("tilted_rate: tilt entries must be finite and >= 0");
    return t;
}

}  // namespace

RateMatrixPtr tilted_rate(RateMatrixPtr base, std::shared_ptr<const std::vector<double>> tilt) {
    if (!base) throw std::invalid_argument("tilted_rate: null rate matrix");
    return std::make_shared<TiltedRateMatrix>(base, check_tilt(*base, std::move(tilt)));
}

RateMatrixPtr tilted_rate(RateMatrixPtr base, std::function<std::vector<double>(double)> tilt_at) {
    if (!base) throw std::invalid_argument("tilted_rate: null rate matrix");
    if (!tilt_at) throw std::invalid_argument("tilted_rate: null tilt callback");
    return std::make_shared<TiltedRateMatrix>(std::move(base), std::move(tilt_at));
}

RateMatrixPtr guided_rate(RateMatrixPtr base, const ConditionalModel& model,
                          const NoiseSchedule& sched, double alpha) {
    if (!base) throw std::invalid_argument("guided_rate: null rate matrix");
    if (alpha < 0.0) throw std::invalid_argument("guided_rate: alpha must be >= 0");
    if (alpha == 0.0) return base;  // ratio^0 = 1
    (void)sched;  // masking conditional expectations are time-independent
    std::vector<double> g = conditional_moment_table(model, 1.0);
    if (alpha != 1.0)
        for (double& v : g) v = std::pow(v, alpha);
    return tilted_rate(std::move(base), std::make_shared<const std::vector<double>>(std::move(g)));
}

RateMatrixPtr true_tempered_rate(RateMatrixPtr base, const ConditionalModel& model,
                                 const NoiseSchedule& sched, double alpha) {
    if (!base) throw std::invalid_argument("true_tempered_rate: null rate matrix");
    if (alpha < 0.0) throw std::invalid_argument("true_tempered_rate: alpha must be >= 0");
    if (alpha == 0.0) return base;
    (void)sched;
    return tilted_rate(std::move(base), std::make_shared<const std::vector<double>>(
                                            conditional_moment_table(model, alpha)));
}

}  // namespace tsmc
