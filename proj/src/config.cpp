#include "tsmc/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "tsmc/errors.hpp"

namespace tsmc {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& where) {
    for (const auto& item : obj.items())
        if (!known.count(item.key()))
            throw ConfigError("config: unknown key '" + item.key() + "' in " + where);
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad type for key '" + key + "'");
    }
}

std::vector<double> get_double_array(const json& obj, const std::string& key) {
    try {
        return obj.at(key).get<std::vector<double>>();
    } catch (const json::exception&) {
        throw ConfigError("config: key '" + key + "' must be an array of numbers");
    }
}

TargetConfig parse_target(const json& obj) {
    reject_unknown_keys(obj,
                        {"dims", "vocab_size", "kind", "p0", "likelihood", "alpha", "count",
                         "alphas", "p0_spread", "likelihood_log10_range"},
                        "target");
    TargetConfig t;
    t.dims = get_or<std::uint32_t>(obj, "dims", 1);
    t.vocab_size = get_or<std::uint32_t>(obj, "vocab_size", 2);
    t.kind = get_or<std::string>(obj, "kind", "random");
    if (t.kind != "random" && t.kind != "explicit")
        throw ConfigError("config: target.kind must be 'random' or 'explicit'");
    t.alpha = get_or<double>(obj, "alpha", 1.0);
    if (t.kind == "explicit") {
        if (!obj.contains("p0") || !obj.contains("likelihood"))
            throw ConfigError("config: explicit target requires p0 and likelihood");
        t.p0 = get_double_array(obj, "p0");
        t.likelihood = get_double_array(obj, "likelihood");
    } else {
        t.count = get_or<int>(obj, "count", 30);
        if (t.count <= 0) throw ConfigError("config: target.count must be positive");
        if (obj.contains("alphas")) t.alphas = get_double_array(obj, "alphas");
        if (t.alphas.empty()) throw ConfigError("config: target.alphas must be non-empty");
    }
    t.params.p0_spread = get_or<double>(obj, "p0_spread", 1.0);
    if (obj.contains("likelihood_log10_range")) {
        const auto range = get_double_array(obj, "likelihood_log10_range");
        if (range.size() != 2 || range[1] < range[0])
            throw ConfigError("config: likelihood_log10_range must be [lo, hi]");
        t.params.lik_log10_min = range[0];
        t.params.lik_log10_max = range[1];
    }
    if (t.vocab_size < 2) throw ConfigError("config: target.vocab_size must be >= 2");
    if (t.dims == 0) throw ConfigError("config: target.dims must be positive");
    return t;
}

SmcSettings parse_smc(const json& obj) {
    reject_unknown_keys(obj,
                        {"particles", "steps", "proposal", "beta_scale",
                         "ess_threshold_fraction", "resampler", "partial_m"},
                        "smc");
    SmcSettings s;
    s.particles = get_or<std::size_t>(obj, "particles", 1000);
    s.steps = get_or<std::size_t>(obj, "steps", 100);
    s.proposal = get_or<std::string>(obj, "proposal", "guided");
    s.beta_scale = get_or<double>(obj, "beta_scale", 1.0);
    s.ess_threshold_fraction = get_or<double>(obj, "ess_threshold_fraction", 0.5);
    s.resampler = get_or<std::string>(obj, "resampler", "multinomial");
    if (obj.contains("partial_m") && !obj.at("partial_m").is_null())
        s.partial_m = get_or<std::size_t>(obj, "partial_m", 0);
    if (s.particles == 0) throw ConfigError("config: smc.particles must be positive");
    if (s.steps == 0) throw ConfigError("config: smc.steps must be positive");
    parse_proposal(s.proposal);    // validates
    parse_resampler(s.resampler);  // validates
    if (s.ess_threshold_fraction < 0.0 || s.ess_threshold_fraction > 1.0)
        throw ConfigError("config: smc.ess_threshold_fraction must lie in [0, 1]");
    return s;
}

}  // namespace

std::uint64_t fnv1a_hash(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");
    reject_unknown_keys(doc,
                        {"seed", "threads", "output", "schedule", "target", "smc", "guided",
                         "eval", "sweep"},
                        "top level");

    ExperimentConfig cfg;
    cfg.seed = get_or<std::uint64_t>(doc, "seed", 0);
    cfg.threads = get_or<unsigned>(doc, "threads", 1);

    if (doc.contains("output")) {
        const json& out = doc.at("output");
        reject_unknown_keys(out, {"dir", "format"}, "output");
        cfg.out_dir = get_or<std::string>(out, "dir", ".");
        cfg.format = get_or<std::string>(out, "format", "csv");
        if (cfg.format != "csv" && cfg.format != "json")
            throw ConfigError("config: output.format must be 'csv' or 'json'");
    }
    if (doc.contains("schedule")) {
        const json& sched = doc.at("schedule");
        reject_unknown_keys(sched, {"kind", "terminal_residual"}, "schedule");
        const std::string kind = get_or<std::string>(sched, "kind", "log_linear");
        if (kind != "log_linear") throw ConfigError("config: unsupported schedule.kind");
        cfg.terminal_residual = get_or<double>(sched, "terminal_residual", 1e-3);
        if (!(cfg.terminal_residual > 0.0) || cfg.terminal_residual > 1e-3)
            throw ConfigError("config: schedule.terminal_residual must lie in (0, 1e-3]");
    }
    if (doc.contains("target")) cfg.target = parse_target(doc.at("target"));
    if (doc.contains("smc")) cfg.smc = parse_smc(doc.at("smc"));
    if (doc.contains("guided")) {
        const json& g = doc.at("guided");
        reject_unknown_keys(g, {"beta_scale"}, "guided");
        cfg.guided_beta_scale = get_or<double>(g, "beta_scale", 1.0);
    }
    if (doc.contains("eval")) {
        const json& e = doc.at("eval");
        reject_unknown_keys(e, {"epsilon_scale"}, "eval");
        cfg.epsilon_scale = get_or<double>(e, "epsilon_scale", 0.1);
        if (cfg.epsilon_scale < 0.0) throw ConfigError("config: eval.epsilon_scale must be >= 0");
    }
    if (doc.contains("sweep")) {
        const json& sweep = doc.at("sweep");
        reject_unknown_keys(sweep, {"rows", "targets", "alphas"}, "sweep");
        if (!sweep.contains("rows") || !sweep.at("rows").is_array())
            throw ConfigError("config: sweep.rows must be an array");
        for (const json& row : sweep.at("rows")) {
            reject_unknown_keys(row, {"dims", "vocab_size"}, "sweep.rows");
            SweepRowConfig r{};
            r.dims = get_or<std::uint32_t>(row, "dims", 0);
            r.vocab_size = get_or<std::uint32_t>(row, "vocab_size", 0);
            if (r.dims == 0 || r.vocab_size < 2)
                throw ConfigError("config: sweep row needs dims >= 1 and vocab_size >= 2");
            cfg.sweep_rows.push_back(r);
        }
        cfg.sweep_targets = get_or<int>(sweep, "targets", 30);
        if (cfg.sweep_targets <= 0) throw ConfigError("config: sweep.targets must be positive");
        if (sweep.contains("alphas")) cfg.sweep_alphas = get_double_array(sweep, "alphas");
        if (cfg.sweep_alphas.empty()) throw ConfigError("config: sweep.alphas must be non-empty");
    }

    cfg.canonical_text = doc.dump();
    cfg.config_hash = fnv1a_hash(cfg.canonical_text);
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("config: read error on " + path);
    return parse_experiment_config(text);
}

ConditionalModel explicit_target_model(const TargetConfig& target) {
    if (target.kind != "explicit")
        throw ConfigError("config: target section is not an explicit target");
    const StateSpace space(target.vocab_size, target.dims, true);
    const StateSpace tokens(target.vocab_size, target.dims, false);
    if (target.p0.size() != tokens.total_states() ||
        target.likelihood.size() != tokens.total_states())
        throw ConfigError("config: explicit target arrays must have vocab_size^dims entries");
    // Re-index token tuples into the mask-extended space.
    std::vector<double> p0(space.total_states(), 0.0);
    std::vector<double> lik(space.total_states(), 0.0);
    for (State s = 0; s < tokens.total_states(); ++s) {
        const auto digits = tokens.decode(s);
        const State ext = space.encode(digits);
        p0[ext] = target.p0[s];
        lik[ext] = target.likelihood[s];
    }
    ConditionalModel model{Distribution(space, std::move(p0)), std::move(lik)};
    try {
        model.p0.validate(1e-9);
        model.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: invalid explicit target: ") + e.what());
    }
    return model;
}

ProposalKind parse_proposal(const std::string& name) {
    if (name == "unconditional") return ProposalKind::unconditional;
    if (name == "guided") return ProposalKind::guided;
    if (name == "true_tempered") return ProposalKind::true_tempered;
    throw ConfigError("config: unknown proposal '" + name + "'");
}

ResamplerKind parse_resampler(const std::string& name) {
    if (name == "multinomial") return ResamplerKind::multinomial;
    if (name == "partial") return ResamplerKind::partial;
    throw ConfigError("config: unknown resampler '" + name + "'");
}

}  // namespace tsmc
