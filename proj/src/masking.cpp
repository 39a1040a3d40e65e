#include "tsmc/masking.hpp"

#include <cmath>
#include <stdexcept>

#include "tsmc/errors.hpp"

namespace tsmc {

MaskMomentTable::MaskMomentTable(const StateSpace& space, std::span<const double> w)
    : space_(space) {
    if (!space.has_mask()) throw std::invalid_argument("MaskMomentTable: space has no mask symbol");
    if (w.size() != space.total_states())
        throw std::invalid_argument("MaskMomentTable: weight vector size mismatch");
    auto table = std::make_shared<std::vector<double>>(w.begin(), w.end());
    // Fold each axis: after processing dim d, entries with dim d masked hold
    // the sum over that dimension's token values.
    const std::uint32_t mask = space.mask_symbol();
    for (std::uint32_t d = 0; d < space.num_dims(); ++d) {
        for (State s = 0; s < space.total_states(); ++s) {
            if (space.digit(s, d) != mask) continue;
            double sum = 0.0;
            for (std::uint32_t v = 0; v < space.vocab_size(); ++v)
                sum += (*table)[space.with_digit(s, d, v)];
            (*table)[s] = sum;
        }
    }
    table_ = std::move(table);
}

Distribution mask_transition(const StateSpace& space, State x0, double t,
                             const NoiseSchedule& sched) {
    if (!space.has_mask()) throw std::invalid_argument("mask_transition: space has no mask symbol");
    if (space.any_masked(x0))
        throw std::invalid_argument("mask_transition: x0 must be fully unmasked");
    const double keep = sched.survival(t);
    const double drop = 1.0 - keep;
    const std::uint32_t mask = space.mask_symbol();

    Distribution out = Distribution::zeros(space);
    // Enumerate the 2^d mask patterns reachable from x0.
    const std::uint32_t d = space.num_dims();
    if (d >= 63) throw std::invalid_argument("mask_transition: too many dimensions");
    for (std::uint64_t pattern = 0; pattern < (1ull << d); ++pattern) {
        State s = x0;
        double p = 1.0;
        for (std::uint32_t i = 0; i < d; ++i) {
            if (pattern & (1ull << i)) {
                s = space.with_digit(s, i, mask);
                p *= drop;
            } else {
                p *= keep;
            }
        }
        out[s] += p;
    }
    return out;
}

namespace {

class MaskingForwardRate final : public RateMatrix {
public:
    MaskingForwardRate(const NoiseSchedule& sched, const StateSpace& space)
        : RateMatrix(space, TimeDirection::forward, RateSupport::factorized), sched_(sched) {}

    double rate(double t, State x, State y) const override {
        const StateSpace& sp = space();
        // Nonzero only for masking exactly one currently unmasked dimension.
        std::uint32_t changed = 0, dim = 0;
        for (std::uint32_t d = 0; d < sp.num_dims(); ++d) {
            if (sp.digit(x, d) != sp.digit(y, d)) {
                ++changed;
                dim = d;
            }
        }
        if (changed != 1) return 0.0;
        if (sp.digit(y, dim) != sp.mask_symbol() || sp.dim_masked(x, dim)) return 0.0;
        return sched_.sigma_prime(t);
    }

    void dim_rates(double t, State x, std::uint32_t dim, std::span<double> out) const override {
        const StateSpace& sp = space();
        std::fill(out.begin(), out.end(), 0.0);
        if (!sp.dim_masked(x, dim)) out[sp.mask_symbol()] = sched_.sigma_prime(t);
    }

private:
    NoiseSchedule sched_;
};

class MaskingReverseRate final : public RateMatrix {
public:
    MaskingReverseRate(const StateSpace& space, const NoiseSchedule& sched,
                       std::shared_ptr<const std::vector<double>> table)
        : RateMatrix(space, TimeDirection::reverse, RateSupport::factorized),
          sched_(sched),
          table_(std::move(table)) {}

    double rate(double t, State x, State y) const override {
        const StateSpace& sp = space();
        std::uint32_t changed = 0, dim = 0;
        for (std::uint32_t d = 0; d < sp.num_dims(); ++d) {
            if (sp.digit(x, d) != sp.digit(y, d)) {
                ++changed;
                dim = d;
            }
        }
        if (changed != 1) return 0.0;
        if (!sp.dim_masked(x, dim) || sp.digit(y, dim) == sp.mask_symbol()) return 0.0;
        const double scale = unmask_scale(t, x);
        return scale == 0.0 ? 0.0 : scale * (*table_)[y];
    }

    void dim_rates(double t, State x, std::uint32_t dim, std::span<double> out) const override {
        const StateSpace& sp = space();
        if (!sp.dim_masked(x, dim)) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        const double scale = unmask_scale(t, x);
        if (scale == 0.0) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        for (std::uint32_t v = 0; v < sp.vocab_size(); ++v)
            out[v] = scale * (*table_)[sp.with_digit(x, dim, v)];
        out[sp.mask_symbol()] = 0.0;
    }

private:
    // sigma'(t) survival / (1 - survival) / table[x]: the per-move factor of
    // the exact reversal R~(x, y) = R_fwd(y, x) p_t(y) / p_t(x), with the
    // per-pattern survival powers cancelled against p_t(y) / p_t(x).
    double unmask_scale(double t, State x) const {
        const double mass = (*table_)[x];
        if (mass == 0.0) return 0.0;  // unreachable state: no outflow
        const double s = sched_.survival(t);
        const double dropped = 1.0 - s;
        if (dropped <= 0.0) return 0.0;  // t = 0: masked states carry no mass
        return sched_.sigma_prime(t) * s / dropped / mass;
    }

    NoiseSchedule sched_;
    std::shared_ptr<const std::vector<double>> table_;
};

class UniformFlipRate final : public RateMatrix {
public:
    UniformFlipRate(const NoiseSchedule& sched, const StateSpace& space)
        : RateMatrix(space, TimeDirection::forward, RateSupport::factorized), sched_(sched) {}

    double rate(double t, State x, State y) const override {
        const StateSpace& sp = space();
        std::uint32_t changed = 0;
        for (std::uint32_t d = 0; d < sp.num_dims(); ++d)
            if (sp.digit(x, d) != sp.digit(y, d)) ++changed;
        if (changed != 1) return 0.0;
        return sched_.sigma_prime(t) / sp.vocab_size();
    }

    void dim_rates(double t, State x, std::uint32_t dim, std::span<double> out) const override {
        const StateSpace& sp = space();
        const double r = sched_.sigma_prime(t) / sp.vocab_size();
        std::fill(out.begin(), out.end(), r);
        out[sp.digit(x, dim)] = 0.0;
    }

private:
    NoiseSchedule sched_;
};

}  // namespace

RateMatrixPtr masking_forward_rate(const NoiseSchedule& sched, const StateSpace& space) {
    if (!space.has_mask())
        throw std::invalid_argument("masking_forward_rate: space has no mask symbol");
    return std::make_shared<MaskingForwardRate>(sched, space);
}

Distribution forward_marginal(const Distribution& p0, double t, const NoiseSchedule& sched) {
    const StateSpace& sp = p0.space();
    if (!sp.has_mask()) throw std::invalid_argument("forward_marginal: space has no mask symbol");
    for (State s = 0; s < sp.total_states(); ++s)
        if (sp.any_masked(s) && p0[s] != 0.0)
            throw std::invalid_argument("forward_marginal: p0 must be supported off the mask");

    const MaskMomentTable table(sp, p0.probs());
    const double keep = sched.survival(t);
    const double drop = 1.0 - keep;
    Distribution out = Distribution::zeros(sp);
    for (State s = 0; s < sp.total_states(); ++s) {
        const std::uint32_t m = sp.masked_count(s);
        const std::uint32_t u = sp.num_dims() - m;
        out[s] = std::pow(keep, u) * std::pow(drop, m) * table[s];
    }
    return out;
}

RateMatrixPtr masking_reverse_rate(const StateSpace& space, const NoiseSchedule& sched,
                                   std::shared_ptr<const std::vector<double>> moment_table) {
    if (!space.has_mask())
        throw std::invalid_argument("masking_reverse_rate: space has no mask symbol");
    if (!moment_table || moment_table->size() != space.total_states())
        throw std::invalid_argument("masking_reverse_rate: bad moment table");
    return std::make_shared<MaskingReverseRate>(space, sched, std::move(moment_table));
}

RateMatrixPtr generative_reverse_rate(const Distribution& p0, const NoiseSchedule& sched) {
    const StateSpace& sp = p0.space();
    if (!sp.has_mask())
        throw std::invalid_argument("generative_reverse_rate: space has no mask symbol");
    return masking_reverse_rate(sp, sched, MaskMomentTable(sp, p0.probs()).data());
}

RateMatrixPtr uniform_flip_rate(const NoiseSchedule& sched, const StateSpace& space) {
    if (space.has_mask())
        throw std::invalid_argument("uniform_flip_rate: expects a space without mask symbol");
    return std::make_shared<UniformFlipRate>(sched, space);
}

}  // namespace tsmc
