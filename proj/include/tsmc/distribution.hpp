#pragma once

#include <span>
#include <vector>

#include "tsmc/rng.hpp"
#include "tsmc/state_space.hpp"

namespace tsmc {

// Dense probability vector over a StateSpace.
class Distribution {
public:
    Distribution(StateSpace space, std::vector<double> probs);
    static Distribution point_mass(const StateSpace& space, State s);
    static Distribution uniform(const StateSpace& space);
    static Distribution zeros(const StateSpace& space);

    const StateSpace& space() const { return space_; }
    std::size_t size() const { return probs_.size(); }
    double operator[](State s) const { return probs_[s]; }
    double& operator[](State s) { return probs_[s]; }
    std::span<const double> probs() const { return probs_; }
    std::vector<double>& mutable_probs() { return probs_; }

    double total_mass() const;
    // Divides by the total mass; throws NumericalError if it is not positive.
    void normalize();
    // Checks entries >= -tol and |sum - 1| <= tol; throws NumericalError.
    void validate(double tol = 1e-9) const;

    double total_variation(const Distribution& other) const;
    State sample(RngStream& rng) const;

private:
    StateSpace space_;
    std::vector<double> probs_;
};

}  // namespace tsmc
