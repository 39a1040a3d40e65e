#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsmc/conditional.hpp"
#include "tsmc/smc.hpp"

namespace tsmc {

// Additively smoothed empirical distribution: (count_x + eps) / (N + eps * S).
Distribution empirical_distribution(std::span<const State> samples, const StateSpace& space,
                                    double epsilon);

// Weighted analogue with effective counts N * mass_x, mass_x the normalized
// weight landing on x.
Distribution weighted_empirical_distribution(const ParticleEnsemble& ensemble,
                                             const StateSpace& space, double epsilon);

// Forward KL sum_x pi(x) ln(pi(x) / sigma(x)), 0 ln 0 = 0.  Raises
// NumericalError when sigma has a zero on pi's support (use smoothing).
double kl_divergence(const Distribution& pi, const Distribution& sigma);

struct RandomTargetParams {
    double p0_spread = 1.0;          // scale of the Gaussian logits behind p0
    double lik_log10_min = -3.0;     // likelihood dynamic range (log-uniform)
    double lik_log10_max = 0.0;
};

// Random desk-scale tempered target: p0 from normalized exponentials of iid
// Gaussians, likelihood iid log-uniform.  alpha is only used to check that
// the tempered normalizer is positive.
ConditionalModel random_target(const StateSpace& space, double alpha,
                               const RandomTargetParams& params, RngStream& rng);

// K independent Euler generation paths of q from the exact t=1 corrupted
// marginal; returns the t=0 states.
std::vector<State> sample_generation_paths(const RateMatrix& q, const Distribution& p0,
                                           const NoiseSchedule& sched,
                                           std::span<const double> grid, std::size_t count,
                                           std::uint64_t seed, unsigned threads = 1);

struct TrialResult {
    int target_id;
    std::string method;  // "smc" | "guided" | "true_tempered"
    double alpha;
    double kl;
    std::size_t sample_count;
    std::size_t steps;
    std::uint64_t seed;
};

struct MethodSet {
    bool smc = true;
    bool guided = true;
    bool true_tempered = false;
};

struct ComparisonSpec {
    StateSpace space;
    int num_targets = 30;
    std::vector<double> alphas = {2.0, 4.0};  // cycled over targets
    RandomTargetParams target_params;
    double terminal_residual = 1e-3;

    std::size_t particle_count = 50000;
    std::size_t steps = 100;

    ProposalKind proposal = ProposalKind::guided;
    double proposal_beta_scale = 1.0;  // SMC proposal temperature = scale * alpha
    double ess_threshold_fraction = 0.5;
    ResamplerKind resampler = ResamplerKind::multinomial;
    std::optional<std::size_t> partial_m;

    double guided_beta_scale = 1.0;  // guidance baseline temperature = scale * alpha
    double epsilon_scale = 0.1;      // smoothing epsilon = scale / total_states

    std::uint64_t master_seed = 0;
    unsigned threads = 1;
    MethodSet methods;
};

struct MethodAggregate {
    std::string method;
    double kl_mean;
    double kl_std;
};

struct ComparisonResult {
    std::vector<TrialResult> trials;
    std::vector<MethodAggregate> aggregates;
    int smc_vs_guided_wins = 0;  // targets where KL(smc) < KL(guided)
};

// The desk-scale verification protocol: per random target, sample with each
// enabled method, compare empirical distributions against the exact tempered
// target by forward KL, and aggregate mean +- std across targets.
// Deterministic given master_seed; per-target seeds are emitted for replay.
ComparisonResult run_comparison(const ComparisonSpec& spec);

}  // namespace tsmc
