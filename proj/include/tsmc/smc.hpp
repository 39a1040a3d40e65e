#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "tsmc/conditional.hpp"
#include "tsmc/ctmc.hpp"
#include "tsmc/rng.hpp"

namespace tsmc {

struct Particle {
    State state;
    double log_weight;  // unnormalized; -inf marks a killed particle
};

struct EnsembleDiagnostics {
    std::vector<double> ess_trace;           // ESS after each grid step
    std::vector<std::size_t> resample_steps; // grid indices where resampling fired
};

struct ParticleEnsemble {
    std::vector<Particle> particles;
    std::size_t time_index = 0;  // current position in the grid
    EnsembleDiagnostics diagnostics;
};

// Softmax of the log weights (max-subtracted); killed particles get 0.
// Throws NumericalError when every weight is -inf.
std::vector<double> normalized_weights(const ParticleEnsemble& ensemble);

// (sum w)^2 / sum w^2 in [1, K].
double ess(const ParticleEnsemble& ensemble);

// Self-normalized importance estimate sum_i w~_i phi(x_i).
double weighted_expectation(const ParticleEnsemble& ensemble,
                            const std::function<double(State)>& phi);

// One grid step of the discretized importance weight: for the realized
// transition x_s -> x_t over times s > t,
//   lw + ln p~(x_t|x_s) - ln q~(x_t|x_s) + alpha [ln p~(x_t|x_s, zeta) - ln p~(x_t|x_s)]
// with all kernels the one-step Euler transitions of R, R_cond (the alpha=1
// guided rate) and Q.  A proposal kernel of zero probability at the realized
// transition raises NumericalError; zero target kernels kill the particle
// (-inf).
double weight_update_discrete(double lw, State x_s, State x_t, double s, double t,
                              const RateMatrix& r, const RateMatrix& r_cond,
                              const RateMatrix& q, double alpha);

// Continuous-time log-weight increment along a piecewise-constant path
// segment: jump terms ln R - ln Q (+ alpha ln R_cond/R) plus left-Riemann
// exit-rate integrals (Q - R) and alpha (R - R_cond).  Cross-check oracle for
// weight_update_discrete; the two agree as the grid is refined.
double weight_increment_continuous(const PathRecord& segment, const RateMatrix& r,
                                   const RateMatrix& r_cond, const RateMatrix& q, double alpha);

// Replaces the ensemble by K iid draws from the weight categorical and
// resets all weights to equal.
void multinomial_resample(ParticleEnsemble& ensemble, RngStream& rng);

// Replaces only the floor(M/2) highest- and ceil(M/2) lowest-weight
// particles by draws from the categorical over that subset, giving each
// replacement the subset's mean weight; the rest keep state and weight.
void partial_resample(ParticleEnsemble& ensemble, std::size_t m, RngStream& rng);

enum class ProposalKind { unconditional, guided, true_tempered };
enum class ResamplerKind { multinomial, partial };

struct SmcConfig {
    std::size_t particle_count = 0;
    std::vector<double> grid;  // decreasing, grid.front() = 1, grid.back() = 0
    double alpha = 1.0;        // SMC temperature
    double beta = 1.0;         // proposal guidance temperature
    ProposalKind proposal = ProposalKind::guided;
    double ess_threshold = 0.0;  // resample when ESS <= threshold; 0 disables
    ResamplerKind resampler = ResamplerKind::multinomial;
    std::optional<std::size_t> partial_m;  // default: floor(K/2)
    std::uint64_t master_seed = 0;
    unsigned threads = 1;

    void validate() const;
    // t_k = 1 - k/steps for k = 0..steps.
    static std::vector<double> uniform_grid(std::size_t steps);
};

// Called after each grid step's weight update (before any resampling).
using StepObserver = std::function<void(std::size_t step, const ParticleEnsemble&)>;

// Algorithm: K particles start at the exact t=1 corrupted marginal with zero
// log weights; each grid step propagates them with the proposal's Euler
// kernel, updates weights with weight_update_discrete, then resamples when
// the ESS falls to the threshold (never after the final step, so the
// returned t=0 ensemble is weighted).  Bitwise deterministic for a given
// master seed regardless of thread count.
ParticleEnsemble run_smc(const SmcConfig& config, const ConditionalModel& model,
                         const NoiseSchedule& sched, const StepObserver& observer = {});

}  // namespace tsmc
