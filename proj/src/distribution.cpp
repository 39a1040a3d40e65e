#include "tsmc/distribution.hpp"

#include <cmath>
#include <stdexcept>

#include "tsmc/errors.hpp"

namespace tsmc {

Distribution::Distribution(StateSpace space, std::vector<double> probs)
    : space_(space), probs_(std::move(probs)) {
    if (space_.total_states() > kDenseStateCap)
        throw std::invalid_argument("Distribution: space exceeds dense representation cap");
    if (probs_.size() != space_.total_states())
        throw std::invalid_argument("Distribution: size does not match state space");
}

Distribution Distribution::point_mass(const StateSpace& space, State s) {
    std::vector<double> p(space.total_states(), 0.0);
    p.at(s) = 1.0;
    return Distribution(space, std::move(p));
}

Distribution Distribution::uniform(const StateSpace& space) {
    const double v = 1.0 / static_cast<double>(space.total_states());
    return Distribution(space, std::vector<double>(space.total_states(), v));
}

Distribution Distribution::zeros(const StateSpace& space) {
    return Distribution(space, std::vector<double>(space.total_states(), 0.0));
}

double Distribution::total_mass() const {
    double s = 0.0;
    for (double p : probs_) s += p;
    return s;
}

void Distribution::normalize() {
    const double s = total_mass();
    if (!(s > 0.0) || !std::isfinite(s))
        throw NumericalError("Distribution::normalize: total mass is not positive and finite");
    for (double& p : probs_) p /= s;
}

void Distribution::validate(double tol) const {
    double s = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
        if (!std::isfinite(probs_[i]))
            throw NumericalError("Distribution: non-finite entry at state " + std::to_string(i));
        if (probs_[i] < -tol)
            throw NumericalError("Distribution: negative mass at state " + std::to_string(i));
        s += probs_[i];
    }
    if (std::abs(s - 1.0) > tol)
        throw NumericalError("Distribution: mass " + std::to_string(s) + " not within tolerance of 1");
}

double Distribution::total_variation(const Distribution& other) const {
    if (!(space_ == other.space_))
        throw std::invalid_argument("total_variation: state spaces differ");
    double tv = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) tv += std::abs(probs_[i] - other.probs_[i]);
    return 0.5 * tv;
}

State Distribution::sample(RngStream& rng) const {
    return static_cast<State>(sample_index(probs_, total_mass(), rng));
}

}  // namespace tsmc
