#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsmc/eval.hpp"

namespace tsmc {

// Declarative experiment description, loaded from a JSON file with strict
// schema validation: unknown keys are rejected and nothing is computed until
// the whole document checks out.

struct TargetConfig {
    std::uint32_t dims = 1;
    std::uint32_t vocab_size = 2;
    std::string kind = "random";  // "random" | "explicit"
    // explicit targets
    std::vector<double> p0;          // over token tuples, row-major, no mask entries
    std::vector<double> likelihood;  // same layout
    double alpha = 1.0;
    // random targets
    int count = 30;
    std::vector<double> alphas = {2.0, 4.0};
    RandomTargetParams params;
};

struct SweepRowConfig {
    std::uint32_t dims;
    std::uint32_t vocab_size;
};

struct SmcSettings {
    std::size_t particles = 1000;
    std::size_t steps = 100;
    std::string proposal = "guided";  // "unconditional" | "guided" | "true_tempered"
    double beta_scale = 1.0;          // proposal temperature = beta_scale * alpha
    double ess_threshold_fraction = 0.5;
    std::string resampler = "multinomial";  // "multinomial" | "partial"
    std::optional<std::size_t> partial_m;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string out_dir = ".";
    std::string format = "csv";  // "csv" | "json"
    double terminal_residual = 1e-3;
    std::optional<TargetConfig> target;
    SmcSettings smc;
    double guided_beta_scale = 1.0;
    double epsilon_scale = 0.1;
    std::vector<SweepRowConfig> sweep_rows;
    int sweep_targets = 30;
    std::vector<double> sweep_alphas = {2.0, 4.0};

    std::uint64_t config_hash = 0;  // FNV-1a of the canonical JSON dump
    std::string canonical_text;     // canonical JSON dump, embedded in outputs
};

ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& json_text);

// Builds the model described by an explicit target section.
ConditionalModel explicit_target_model(const TargetConfig& target);

ProposalKind parse_proposal(const std::string& name);
ResamplerKind parse_resampler(const std::string& name);

std::uint64_t fnv1a_hash(const std::string& text);

}  // namespace tsmc
