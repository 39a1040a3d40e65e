// Experiment runner: config-driven sampling, Table-1 style comparisons,
// figure data emission, and the structural verification suite.
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsmc/config.hpp"
#include "tsmc/errors.hpp"
#include "tsmc/eval.hpp"
#include "tsmc/guidance.hpp"
#include "tsmc/masking.hpp"
#include "tsmc/smc.hpp"
#include "tsmc/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct CliOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<unsigned> threads;
    std::optional<std::string> format;
};

unsigned resolve_threads(const CliOptions& cli, const tsmc::ExperimentConfig& cfg) {
    unsigned value = cfg.threads;
    if (const char* env = std::getenv("TSMC_THREADS")) {
        char* end = nullptr;
        const unsigned long parsed = std::strtoul(env, &end, 10);
        if (end && *end == '\0') value = static_cast<unsigned>(parsed);
    }
    if (cli.threads) value = *cli.threads;  // flag wins over env and config
    if (value == 0) value = std::max(1u, std::thread::hardware_concurrency());
    return value;
}

tsmc::ExperimentConfig load_with_overrides(const CliOptions& cli) {
    if (cli.config_path.empty()) throw tsmc::ConfigError("missing --config <path>");
    tsmc::ExperimentConfig cfg = tsmc::load_experiment_config(cli.config_path);
    if (cli.seed) cfg.seed = *cli.seed;
    if (cli.out_dir) cfg.out_dir = *cli.out_dir;
    if (cli.format) {
        if (*cli.format != "csv" && *cli.format != "json")
            throw tsmc::ConfigError("--format must be csv or json");
        cfg.format = *cli.format;
    }
    cfg.threads = resolve_threads(cli, cfg);
    return cfg;
}

std::ofstream open_output(const fs::path& path) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw tsmc::IoError("cannot open output file " + path.string());
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return buf;
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

// Tabular writer: CSV gets `# key=value` metadata lines before the header,
// JSON gets a {"metadata": ..., "rows": [...]} document.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

void write_table(const fs::path& path, const std::string& format, const Table& table,
                 const tsmc::ExperimentConfig& cfg) {
    std::ofstream out = open_output(path);
    if (format == "csv") {
        out << "# config_hash=" << hash_hex(cfg.config_hash) << "\n";
        out << "# master_seed=" << cfg.seed << "\n";
        for (std::size_t c = 0; c < table.columns.size(); ++c)
            out << table.columns[c] << (c + 1 < table.columns.size() ? "," : "");
        out << "\n";
        for (const auto& row : table.rows) {
            for (std::size_t c = 0; c < row.size(); ++c)
                out << row[c] << (c + 1 < row.size() ? "," : "");
            out << "\n";
        }
    } else {
        json doc;
        doc["metadata"] = {{"config_hash", hash_hex(cfg.config_hash)},
                           {"master_seed", cfg.seed}};
        json rows = json::array();
        for (const auto& row : table.rows) {
            json obj;
            for (std::size_t c = 0; c < row.size(); ++c) obj[table.columns[c]] = row[c];
            rows.push_back(obj);
        }
        doc["rows"] = rows;
        out << doc.dump(2) << "\n";
    }
    if (!out) throw tsmc::IoError("write failed for " + path.string());
}

int cmd_verify(bool quick, bool inject_fault) {
    tsmc::VerifyOptions options;
    options.quick = quick;
    options.inject_fault = inject_fault;
    const std::vector<tsmc::PropertyResult> results = tsmc::run_verification_suite(options);
    bool all_ok = true;
    for (const auto& r : results) {
        std::printf("[%s] %s%s%s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.empty() ? "" : ": ", r.detail.c_str());
        all_ok = all_ok && r.passed;
    }
    std::printf("%zu properties, %s\n", results.size(), all_ok ? "all passed" : "FAILURES");
    return all_ok ? kExitOk : 1;
}

tsmc::ConditionalModel resolve_target_model(const tsmc::ExperimentConfig& cfg, double& alpha_out) {
    if (!cfg.target) throw tsmc::ConfigError("config: this command requires a target section");
    const tsmc::TargetConfig& t = *cfg.target;
    if (t.kind == "explicit") {
        alpha_out = t.alpha;
        return tsmc::explicit_target_model(t);
    }
    const tsmc::StateSpace space(t.vocab_size, t.dims, true);
    alpha_out = t.alphas.front();
    tsmc::RngStream rng{cfg.seed, 50};
    return tsmc::random_target(space, alpha_out, t.params, rng);
}

int cmd_sample(const CliOptions& cli) {
    const tsmc::ExperimentConfig cfg = load_with_overrides(cli);
    double alpha = 1.0;
    const tsmc::ConditionalModel model = resolve_target_model(cfg, alpha);
    const tsmc::StateSpace& space = model.space();
    const tsmc::NoiseSchedule sched = tsmc::NoiseSchedule::log_linear(cfg.terminal_residual);

    tsmc::SmcConfig smc;
    smc.particle_count = cfg.smc.particles;
    smc.grid = tsmc::SmcConfig::uniform_grid(cfg.smc.steps);
    smc.alpha = alpha;
    smc.beta = cfg.smc.beta_scale * alpha;
    smc.proposal = tsmc::parse_proposal(cfg.smc.proposal);
    smc.ess_threshold = cfg.smc.ess_threshold_fraction * static_cast<double>(cfg.smc.particles);
    smc.resampler = tsmc::parse_resampler(cfg.smc.resampler);
    smc.partial_m = cfg.smc.partial_m;
    smc.master_seed = cfg.seed;
    smc.threads = cfg.threads;

    const tsmc::ParticleEnsemble ensemble = tsmc::run_smc(smc, model, sched);
    const std::vector<double> weights = tsmc::normalized_weights(ensemble);

    Table table;
    table.columns.push_back("particle_id");
    for (std::uint32_t d = 0; d < space.num_dims(); ++d)
        table.columns.push_back("dim" + std::to_string(d));
    table.columns.push_back("weight");
    for (std::size_t i = 0; i < ensemble.particles.size(); ++i) {
        std::vector<std::string> row;
        row.push_back(std::to_string(i));
        for (std::uint32_t d = 0; d < space.num_dims(); ++d)
            row.push_back(std::to_string(space.digit(ensemble.particles[i].state, d)));
        row.push_back(fmt(weights[i]));
        table.rows.push_back(std::move(row));
    }
    const fs::path out_dir(cfg.out_dir);
    write_table(out_dir / ("samples." + cfg.format), cfg.format, table, cfg);

    json diag;
    diag["config_hash"] = hash_hex(cfg.config_hash);
    diag["master_seed"] = cfg.seed;
    diag["config"] = json::parse(cfg.canonical_text);
    diag["alpha"] = alpha;
    diag["steps"] = cfg.smc.steps;
    diag["particles"] = cfg.smc.particles;
    diag["ess_trace"] = ensemble.diagnostics.ess_trace;
    diag["resample_steps"] = ensemble.diagnostics.resample_steps;
    std::ofstream diag_out = open_output(out_dir / "diagnostics.json");
    diag_out << diag.dump(2) << "\n";
    if (!diag_out) throw tsmc::IoError("write failed for diagnostics.json");
    return kExitOk;
}

int cmd_table1(const CliOptions& cli) {
    const tsmc::ExperimentConfig cfg = load_with_overrides(cli);
    if (cfg.sweep_rows.empty())
        throw tsmc::ConfigError("config: table1 requires a sweep section with rows");

    Table aggregate;
    aggregate.columns = {"dimension", "vocab_size", "kl_smc_mean", "kl_smc_std",
                         "kl_guided_mean", "kl_guided_std"};
    Table raw;
    raw.columns = {"dimension", "vocab_size", "target_id", "method", "alpha",
                   "kl", "sample_count", "steps", "seed"};

    for (const tsmc::SweepRowConfig& row : cfg.sweep_rows) {
        tsmc::ComparisonSpec spec{tsmc::StateSpace(row.vocab_size, row.dims, true)};
        spec.num_targets = cfg.sweep_targets;
        spec.alphas = cfg.sweep_alphas;
        spec.terminal_residual = cfg.terminal_residual;
        spec.particle_count = cfg.smc.particles;
        spec.steps = cfg.smc.steps;
        spec.proposal = tsmc::parse_proposal(cfg.smc.proposal);
        spec.proposal_beta_scale = cfg.smc.beta_scale;
        spec.ess_threshold_fraction = cfg.smc.ess_threshold_fraction;
        spec.resampler = tsmc::parse_resampler(cfg.smc.resampler);
        spec.partial_m = cfg.smc.partial_m;
        spec.guided_beta_scale = cfg.guided_beta_scale;
        spec.epsilon_scale = cfg.epsilon_scale;
        spec.master_seed = cfg.seed;
        spec.threads = cfg.threads;
        const tsmc::ComparisonResult result = tsmc::run_comparison(spec);

        double smc_mean = 0, smc_std = 0, guided_mean = 0, guided_std = 0;
        for (const auto& agg : result.aggregates) {
            if (agg.method == "smc") {
                smc_mean = agg.kl_mean;
                smc_std = agg.kl_std;
            } else if (agg.method == "guided") {
                guided_mean = agg.kl_mean;
                guided_std = agg.kl_std;
            }
        }
        aggregate.rows.push_back({std::to_string(row.dims), std::to_string(row.vocab_size),
                                  fmt(smc_mean), fmt(smc_std), fmt(guided_mean), fmt(guided_std)});
        for (const tsmc::TrialResult& trial : result.trials)
            raw.rows.push_back({std::to_string(row.dims), std::to_string(row.vocab_size),
                                std::to_string(trial.target_id), trial.method, fmt(trial.alpha),
                                fmt(trial.kl), std::to_string(trial.sample_count),
                                std::to_string(trial.steps), std::to_string(trial.seed)});
    }
    const fs::path out_dir(cfg.out_dir);
    write_table(out_dir / ("table1." + cfg.format), cfg.format, aggregate, cfg);
    write_table(out_dir / ("table1_trials." + cfg.format), cfg.format, raw, cfg);
    return kExitOk;
}

int cmd_figure_data(const CliOptions& cli) {
    const tsmc::ExperimentConfig cfg = load_with_overrides(cli);
    if (!cfg.target || cfg.target->kind != "explicit")
        throw tsmc::ConfigError("config: figure-data requires an explicit target");
    double alpha = 1.0;
    const tsmc::ConditionalModel model = resolve_target_model(cfg, alpha);
    const tsmc::StateSpace& space = model.space();
    const tsmc::NoiseSchedule sched = tsmc::NoiseSchedule::log_linear(cfg.terminal_residual);
    const tsmc::Distribution target = tsmc::tempered_target(model, alpha);
    const std::vector<double> grid = tsmc::SmcConfig::uniform_grid(cfg.smc.steps);

    // Guided baseline: independent Euler paths.
    const tsmc::RateMatrixPtr base = tsmc::generative_reverse_rate(model.p0, sched);
    const tsmc::RateMatrixPtr guided =
        tsmc::guided_rate(base, model, sched, cfg.guided_beta_scale * alpha);
    const std::vector<tsmc::State> guided_samples = tsmc::sample_generation_paths(
        *guided, model.p0, sched, grid, cfg.smc.particles, cfg.seed + 1, cfg.threads);
    const tsmc::Distribution guided_emp =
        tsmc::empirical_distribution(guided_samples, space, 0.0);

    // SMC run, weighted empirical law.
    tsmc::SmcConfig smc;
    smc.particle_count = cfg.smc.particles;
    smc.grid = grid;
    smc.alpha = alpha;
    smc.beta = cfg.smc.beta_scale * alpha;
    smc.proposal = tsmc::parse_proposal(cfg.smc.proposal);
    smc.ess_threshold = cfg.smc.ess_threshold_fraction * static_cast<double>(cfg.smc.particles);
    smc.resampler = tsmc::parse_resampler(cfg.smc.resampler);
    smc.partial_m = cfg.smc.partial_m;
    smc.master_seed = cfg.seed;
    smc.threads = cfg.threads;
    const tsmc::ParticleEnsemble ensemble = tsmc::run_smc(smc, model, sched);
    const tsmc::Distribution smc_emp = tsmc::weighted_empirical_distribution(ensemble, space, 0.0);

    Table table;
    table.columns.push_back("state");
    for (std::uint32_t d = 0; d < space.num_dims(); ++d)
        table.columns.push_back("dim" + std::to_string(d));
    table.columns.push_back("target");
    table.columns.push_back("guided");
    table.columns.push_back("smc");
    for (tsmc::State s = 0; s < space.total_states(); ++s) {
        if (space.any_masked(s)) continue;
        std::vector<std::string> row;
        row.push_back(std::to_string(s));
        for (std::uint32_t d = 0; d < space.num_dims(); ++d)
            row.push_back(std::to_string(space.digit(s, d)));
        row.push_back(fmt(target[s]));
        row.push_back(fmt(guided_emp[s]));
        row.push_back(fmt(smc_emp[s]));
        table.rows.push_back(std::move(row));
    }
    write_table(fs::path(cfg.out_dir) / ("figure." + cfg.format), cfg.format, table, cfg);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tempered sampling experiments for masking discrete diffusion"};
    app.require_subcommand(1);

    CliOptions cli;
    bool quick = false;
    bool inject_fault = false;

    auto add_common = [&cli](CLI::App* cmd) {
        cmd->add_option("--config", cli.config_path, "experiment config (JSON)");
        cmd->add_option("--seed", cli.seed, "override master seed");
        cmd->add_option("--out", cli.out_dir, "override output directory");
        cmd->add_option("--threads", cli.threads, "worker threads (0 = auto)");
        cmd->add_option("--format", cli.format, "output format: csv|json");
    };

    CLI::App* verify = app.add_subcommand("verify", "run the structural invariant suite");
    verify->add_flag("--quick", quick, "reduced instance sizes");
    verify->add_flag("--inject-fault", inject_fault)->group("");  // hidden test hook

    CLI::App* sample = app.add_subcommand("sample", "run the sampler and write particles");
    add_common(sample);
    CLI::App* table1 = app.add_subcommand("table1", "KL comparison sweep (SMC vs guidance)");
    add_common(table1);
    CLI::App* figure = app.add_subcommand("figure-data", "per-state masses for plotting");
    add_common(figure);

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify->parsed()) return cmd_verify(quick, inject_fault);
        if (sample->parsed()) return cmd_sample(cli);
        if (table1->parsed()) return cmd_table1(cli);
        if (figure->parsed()) return cmd_figure_data(cli);
        std::fprintf(stderr, "no subcommand\n");
        return kExitConfig;
    } catch (const tsmc::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const tsmc::NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return kExitNumerical;
    } catch (const tsmc::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
