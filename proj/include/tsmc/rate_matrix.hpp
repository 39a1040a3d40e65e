#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "tsmc/state_space.hpp"

namespace tsmc {

// Forward-time generators drive evolution 0 -> 1 (corruption); reverse-time
// generators drive evolution 1 -> 0 (generation).  Reverse-time objects are
// the forward objects of the chain under t |-> 1 - t.
enum class TimeDirection { forward, reverse };

// Factorized support: only transitions changing exactly one dimension carry
// nonzero rate, so kernels decompose per dimension.
enum class RateSupport { dense, factorized };

// Time-dependent CTMC generator over a finite state space.  Off-diagonal
// entries are jump rates (>= 0); the diagonal is mass-conserving by default,
// R_t(x,x) = -sum_{y != x} R_t(x,y).
class RateMatrix {
public:
    RateMatrix(StateSpace space, TimeDirection direction, RateSupport support)
        : space_(space), direction_(direction), support_(support) {}
    virtual ~RateMatrix() = default;

    const StateSpace& space() const { return space_; }
    TimeDirection direction() const { return direction_; }
    RateSupport support() const { return support_; }
    bool factorized() const { return support_ == RateSupport::factorized; }

    // Off-diagonal jump rate x -> y; callers pass x != y.
    virtual double rate(double t, State x, State y) const = 0;
    virtual double diagonal(double t, State x) const { return -exit_rate(t, x); }
    // Total exit rate sum_{y != x} R_t(x, y).
    virtual double exit_rate(double t, State x) const;

    // Rates for moving digit `dim` of x to each of base() values; the entry
    // for the current digit is 0.  Only meaningful for factorized support.
    virtual void dim_rates(double t, State x, std::uint32_t dim, std::span<double> out) const;

    // out = R_t^T p (KFE right-hand side).  Dense-cap sized spaces only.
    virtual void apply_transpose(double t, std::span<const double> p, std::span<double> out) const;
    // out = R_t u (KBE right-hand side).
    virtual void apply(double t, std::span<const double> u, std::span<double> out) const;

private:
    StateSpace space_;
    TimeDirection direction_;
    RateSupport support_;
};

using RateMatrixPtr = std::shared_ptr<const RateMatrix>;

// Rate matrix backed by an arbitrary evaluator covering the full matrix,
// diagonal included.  Used for hand-built generators in tests and for toy
// processes; the diagonal is taken from the evaluator as given so that
// validation can detect broken mass conservation.
class LambdaRateMatrix final : public RateMatrix {
public:
    using Evaluator = std::function<double(double, State, State)>;
    LambdaRateMatrix(StateSpace space, TimeDirection direction, RateSupport support,
                     Evaluator evaluator)
        : RateMatrix(space, direction, support), evaluator_(std::move(evaluator)) {}

    double rate(double t, State x, State y) const override { return evaluator_(t, x, y); }
    double diagonal(double t, State x) const override { return evaluator_(t, x, x); }

private:
    Evaluator evaluator_;
};

struct RateMatrixViolation {
    State row;
    double value;
    std::string what;
};

// Checks off-diagonals >= -tol and |row sum| <= tol * total_states at time t.
// Returns the first offending (row, value) or nullopt when the matrix is a
// valid generator.
std::optional<RateMatrixViolation> validate_rate_matrix(const RateMatrix& r, double t, double tol);

}  // namespace tsmc
