#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "latkey/errors.hpp"
#include "latkey/extractor.hpp"
#include "latkey/key_agreement.hpp"
#include "latkey/lattice.hpp"
#include "latkey/rates.hpp"
#include "latkey/source.hpp"
#include "latkey/theta.hpp"

namespace latkey {

using json = nlohmann::ordered_json;

enum class Command { Flatness, Extract, Keygen, Rates, Calibrate };

inline const char* to_string(Command c) {
    switch (c) {
        case Command::Flatness: return "flatness";
        case Command::Extract: return "extract";
        case Command::Keygen: return "keygen";
        case Command::Rates: return "rates";
        case Command::Calibrate: return "calibrate";
    }
    return "?";
}

inline Command command_from_string(const std::string& s) {
    if (s == "flatness") return Command::Flatness;
    if (s == "extract") return Command::Extract;
    if (s == "keygen") return Command::Keygen;
    if (s == "rates") return Command::Rates;
    if (s == "calibrate") return Command::Calibrate;
    throw ConfigError("unknown command: " + s);
}

namespace detail {

// full-precision, locale-independent decimal rendering for CSV cells
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

template <class T>
T require_field(const json& j, const std::string& key, const char* ctx) {
    if (!j.contains(key)) {
        throw ConfigError(std::string(ctx) + ": missing required field '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(ctx) + ": bad field '" + key + "': " + e.what());
    }
}

template <class T>
T field_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad field '") + key + "': " + e.what());
    }
}

}  // namespace detail

inline SourceParams parse_source(const json& j) {
    const std::string mode = detail::field_or<std::string>(j, "mode", "markov");
    if (mode == "explicit") {
        const auto rows = detail::require_field<std::vector<std::vector<double>>>(
            j, "cov", "source");
        if (rows.size() != 3 || rows[0].size() != 3 || rows[1].size() != 3 ||
            rows[2].size() != 3) {
            throw ConfigError("source.cov must be a 3x3 array");
        }
        Eigen::Matrix3d cov;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) cov(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
        return SourceParams::explicit_cov(cov);
    }
    if (mode != "markov") throw ConfigError("source.mode must be markov or explicit");
    return SourceParams::markov(
        detail::require_field<double>(j, "sigma_x", "source"),
        detail::require_field<double>(j, "sigma_y", "source"),
        detail::require_field<double>(j, "sigma_z", "source"),
        detail::require_field<double>(j, "rho_xy", "source"),
        detail::require_field<double>(j, "rho_xz", "source"));
}

inline LatticeBasis parse_lattice(const json& j) {
    const std::string family = detail::require_field<std::string>(j, "family", "lattice");
    const double scale = detail::field_or<double>(j, "scale", 1.0);
    if (family == "custom") {
        const auto rows = detail::require_field<std::vector<std::vector<double>>>(
            j, "basis", "lattice");
        const int n = static_cast<int>(rows.size());
        Eigen::MatrixXd basis(n, n);
        for (int r = 0; r < n; ++r) {
            if (static_cast<int>(rows[static_cast<std::size_t>(r)].size()) != n) {
                throw ConfigError("lattice.basis must be square (row-major rows)");
            }
            for (int c = 0; c < n; ++c) basis(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
        const std::string dec = detail::field_or<std::string>(j, "decoder", "enumeration");
        Decoder decoder = Decoder::Enumeration;
        if (dec == "coordinate-wise") decoder = Decoder::CoordinateWise;
        else if (dec != "enumeration") throw ConfigError("lattice.decoder must be enumeration or coordinate-wise");
        return LatticeBasis::custom(basis * scale, decoder);
    }
    return lattice_from_name(family, scale);
}

inline NestedChain parse_chain(const json& j) {
    const std::string family = detail::require_field<std::string>(j, "family", "chain");
    const double base_scale = detail::field_or<double>(j, "base_scale", 1.0);
    const int s2 = detail::require_field<int>(j, "scale2", "chain");
    const int s3 = detail::require_field<int>(j, "scale3", "chain");
    const std::string region = detail::field_or<std::string>(j, "key_region", "parallelepiped");
    RegionKind kind = RegionKind::Parallelepiped;
    if (region == "voronoi") kind = RegionKind::Voronoi;
    else if (region != "parallelepiped") throw ConfigError("chain.key_region must be parallelepiped or voronoi");
    return NestedChain(lattice_from_name(family, base_scale), s2, s3, kind);
}

struct ExperimentConfig {
    Command command = Command::Flatness;
    json echo;  // semantic fields only; execution knobs (threads, out) excluded
    std::uint64_t seed = 1;
    int threads = 1;
    json body;  // parsed config document
};

// Builds the validated config. `forced` comes from the CLI subcommand; when
// the document also names a command the two must agree.
inline ExperimentConfig make_config(const json& doc, std::optional<Command> forced) {
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
    const int version = detail::field_or<int>(doc, "schema_version", 1);
    if (version != 1) throw ConfigError("unsupported schema_version");
    std::optional<Command> from_doc;
    if (doc.contains("command")) {
        from_doc = command_from_string(doc.at("command").get<std::string>());
    }
    if (forced && from_doc && *forced != *from_doc) {
        throw ConfigError("config command disagrees with the CLI subcommand");
    }
    if (!forced && !from_doc) throw ConfigError("no command given");

    ExperimentConfig cfg;
    cfg.command = forced ? *forced : *from_doc;
    cfg.seed = detail::field_or<std::uint64_t>(doc, "seed", 1);
    cfg.threads = detail::field_or<int>(doc, "threads", 1);
    if (cfg.threads < 1 || cfg.threads > 256) {
        throw ConfigError("threads must be in [1, 256]");
    }
    cfg.body = doc;
    cfg.echo = doc;
    for (const char* volatile_key : {"threads", "out", "format"}) {
        cfg.echo.erase(volatile_key);
    }
    cfg.echo["command"] = to_string(cfg.command);
    cfg.echo["seed"] = cfg.seed;
    return cfg;
}

struct RunResult {
    json doc;
    std::string csv;
    bool has_csv = false;
};

namespace detail {

inline json provenance(const char* module, const char* operation) {
    return json{{"module", module}, {"operation", operation}};
}

inline json flatness_to_json(const LatticeBasis& lat, const FlatnessResult& f) {
    return json{{"family", lat.name()},   {"n", lat.dimension()},
                {"sigma", f.sigma},       {"vnr", f.vnr},
                {"epsilon", f.epsilon},   {"tail_bound", f.tail_bound},
                {"truncation_radius", f.truncation_radius},
                {"method", to_string(f.method)}};
}

inline ThetaOptions parse_theta_options(const json& doc) {
    ThetaOptions t;
    t.target_tail_rel = field_or<double>(doc, "target_tail_rel", 1e-12);
    t.budget = field_or<std::uint64_t>(doc, "budget", 10'000'000ull);
    return t;
}

inline RunResult run_flatness(const ExperimentConfig& cfg) {
    const json& doc = cfg.body;
    const ThetaOptions theta = parse_theta_options(doc);

    // family sweep mode: flatness versus dimension at fixed vnr
    if (doc.contains("sweep")) {
        const json& sw = doc.at("sweep");
        const auto family = require_field<std::string>(sw, "family", "sweep");
        const auto n_list = require_field<std::vector<int>>(sw, "n_list", "sweep");
        const double vnr = require_field<double>(sw, "vnr", "sweep");
        const double sigma = field_or<double>(sw, "sigma", 1.0);
        const auto rows_data = secrecy_sweep(family, sigma, n_list, vnr, theta);
        json rows = json::array();
        std::string csv = "family,n,sigma,vnr,epsilon,tail_bound,method\n";
        for (const auto& r : rows_data) {
            rows.push_back(json{{"family", r.family}, {"n", r.n},
                                {"sigma", r.sigma}, {"vnr", r.vnr},
                                {"epsilon", r.epsilon}, {"tail_bound", r.tail_bound},
                                {"method", to_string(r.method)}});
            csv += r.family + "," + std::to_string(r.n) + "," + fmt17(r.sigma) + "," +
                   fmt17(r.vnr) + "," + fmt17(r.epsilon) + "," + fmt17(r.tail_bound) +
                   "," + to_string(r.method) + "\n";
        }
        RunResult out;
        out.doc["results"] = json{{"rows", rows},
                                  {"provenance", provenance("theta-flatness", "secrecy_sweep")}};
        out.csv = csv;
        out.has_csv = true;
        return out;
    }

    if (!doc.contains("lattice")) throw ConfigError("flatness: missing lattice block");
    const LatticeBasis lat = parse_lattice(doc.at("lattice"));
    const auto sigmas = require_field<std::vector<double>>(doc, "sigmas", "flatness");
    if (sigmas.empty()) throw ConfigError("flatness: sigmas must be non-empty");
    const auto methods = field_or<std::vector<std::string>>(doc, "methods", {"theta"});
    const int grid = field_or<int>(doc, "grid_points", 128);

    json rows = json::array();
    std::string csv = "family,n,sigma,vnr,epsilon,tail_bound,method\n";
    for (double sigma : sigmas) {
        for (const auto& method : methods) {
            FlatnessResult f;
            if (method == "theta") {
                f = flatness_factor(lat, sigma, theta);
            } else if (method == "dual") {
                f = flatness_dual(lat, sigma, theta);
            } else if (method == "direct") {
                const auto d = flatness_direct(lat, sigma, grid, theta);
                f.epsilon = d.epsilon;
                f.tail_bound = d.tail_bound;
                f.sigma = sigma;
                f.vnr = lat.volume_pow_2n() / (sigma * sigma);
                f.method = FlatnessMethod::DirectGrid;
                f.truncation_radius = 0.0;
            } else {
                throw ConfigError("flatness: unknown method '" + method + "'");
            }
            rows.push_back(flatness_to_json(lat, f));
            csv += lat.name() + "," + std::to_string(lat.dimension()) + "," +
                   fmt17(sigma) + "," + fmt17(f.vnr) + "," + fmt17(f.epsilon) + "," +
                   fmt17(f.tail_bound) + "," + to_string(f.method) + "\n";
        }
    }
    RunResult out;
    out.doc["results"] = json{{"rows", rows},
                              {"provenance", provenance("theta-flatness", "flatness_factor")}};
    out.csv = csv;
    out.has_csv = true;
    return out;
}

inline RunResult run_extract(const ExperimentConfig& cfg) {
    const json& doc = cfg.body;
    if (!doc.contains("source")) throw ConfigError("extract: missing source block");
    if (!doc.contains("lattice")) throw ConfigError("extract: missing lattice block");
    const SourceParams params = parse_source(doc.at("source"));
    const LatticeBasis lat = parse_lattice(doc.at("lattice"));
    const auto samples = field_or<std::uint64_t>(doc, "samples", 100'000ull);
    const int bins = field_or<int>(doc, "bins", 16);
    const ThetaOptions theta = parse_theta_options(doc);

    const ExtractorReport r = build_extractor_report(lat, params, samples, bins,
                                                     cfg.seed, RegionKind::Parallelepiped,
                                                     theta);
    json res;
    res["flatness"] = {
        {"epsilon_sigma2", flatness_to_json(lat, r.eps_sigma2)},
        {"epsilon_sigma_x", flatness_to_json(lat, r.eps_sigma_x)},
        {"provenance", provenance("theta-flatness", "flatness_factor")}};
    res["mutual_information"] = {
        {"estimate", r.mi_estimate},
        {"stderr", r.mi_stderr},
        {"samples", r.samples},
        {"bound_log", r.mi_bound_vacuous ? json(nullptr) : json(r.mi_bound_log)},
        {"bound_vacuous", r.mi_bound_vacuous},
        {"bound_linear", r.mi_bound_linear},
        {"bound_three_eps", r.mi_bound_three},
        {"provenance", provenance("randomness-extractor", "mi_estimate")}};
    if (r.tv_available) {
        res["uniformity"] = {
            {"tv", r.tv},
            {"tv_stderr", r.tv_stderr},
            {"bins_per_dim", bins},
            {"provenance", provenance("randomness-extractor", "uniformity_tv")}};
    }
    res["entropy_rate"] = {
        {"lower_bound", r.entropy_rate_lower_bound},
        {"sigma_ordering_ok", r.sigma_ordering_ok},
        {"relaxation_ordering_ok", r.relaxation_ordering_ok},
        {"provenance", provenance("randomness-extractor", "marginal_density")}};

    RunResult out;
    out.doc["results"] = res;
    out.csv = "sigma2,epsilon,mi_estimate,mi_stderr,bound\n" +
              fmt17(params.sigma2()) + "," + fmt17(r.eps_sigma2.epsilon) + "," +
              fmt17(r.mi_estimate) + "," + fmt17(r.mi_stderr) + "," +
              fmt17(r.mi_bound_three) + "\n";
    out.has_csv = true;
    return out;
}

inline RunResult run_keygen(const ExperimentConfig& cfg) {
    const json& doc = cfg.body;
    if (!doc.contains("source")) throw ConfigError("keygen: missing source block");
    if (!doc.contains("chain")) throw ConfigError("keygen: missing chain block");
    const SourceParams params = parse_source(doc.at("source"));
    const NestedChain chain = parse_chain(doc.at("chain"));
    const auto trials = field_or<std::uint64_t>(doc, "trials", 0ull);
    if (trials == 0) throw ConfigError("keygen: trials must be positive");
    RunOptions opts;
    opts.threads = cfg.threads;
    opts.z_bins = field_or<int>(doc, "z_bins", 8);
    opts.bootstrap_reps = field_or<int>(doc, "bootstrap_reps", 50);
    opts.collect_records = field_or<bool>(doc, "dump_trials", false);

    std::vector<TrialRecord> records;
    const TrialMetrics m = run_trials(chain, params, trials, cfg.seed, opts,
                                      opts.collect_records ? &records : nullptr);

    json metrics{{"trials", m.trials},
                 {"error_rate", m.error_rate},
                 {"error_rate_se", m.error_rate_se},
                 {"xq_error_rate", m.xq_error_rate},
                 {"xq_error_rate_se", m.xq_error_rate_se},
                 {"key_histogram", m.key_histogram},
                 {"key_entropy", m.key_entropy},
                 {"key_uniformity_deviation", m.key_uniformity_deviation},
                 {"key_uniformity_max_se", m.key_uniformity_max_se},
                 {"d_av", m.d_av},
                 {"d_av_se", m.d_av_se},
                 {"d_av_cells", m.d_av_cells},
                 {"d_av_sparse", m.d_av_sparse},
                 {"secrecy_bound", m.secrecy_bound},
                 {"reliability_predicate_agreement", m.reliability_predicate_agreement},
                 {"predicate_soundness_violations", m.predicate_soundness_violations},
                 {"decomposition_max_dev", m.eq_decomposition_max_dev},
                 {"z_bins", m.z_bins},
                 {"key_cardinality", chain.key_cardinality()},
                 {"public_cardinality", chain.public_cardinality()}};
    RunResult out;
    out.doc["results"] = json{{"metrics", metrics},
                              {"provenance", provenance("key-agreement", "run_trials")}};
    if (opts.collect_records) {
        std::string csv = "trial,s_index,k_index,k_hat_index,match,xq_match,predicate\n";
        for (const auto& rec : records) {
            csv += std::to_string(rec.trial) + "," + std::to_string(rec.s_index) + "," +
                   std::to_string(rec.k_index) + "," + std::to_string(rec.k_hat_index) +
                   "," + std::to_string(rec.match ? 1 : 0) + "," +
                   std::to_string(rec.xq_match ? 1 : 0) + "," +
                   std::to_string(rec.predicate ? 1 : 0) + "\n";
        }
        out.csv = csv;
        out.has_csv = true;
    }
    return out;
}

inline RunResult run_rates(const ExperimentConfig& cfg) {
    const json& doc = cfg.body;
    if (!doc.contains("source")) throw ConfigError("rates: missing source block");
    const SourceParams params = parse_source(doc.at("source"));
    const double g = field_or<double>(doc, "g_lambda1", kIdealSecondMoment);

    json res;
    if (doc.contains("chain")) {
        const NestedChain chain = parse_chain(doc.at("chain"));
        const RateReport r = rate_report(chain, params, g);
        res["report"] = {{"r_k", r.r_k},
                         {"r_p", r.r_p},
                         {"r_k_bound", r.bounds.r_k_bound},
                         {"r_p_bound", r.bounds.r_p_bound},
                         {"quasi_optimal", r.bounds.quasi_optimal},
                         {"upper_bound", r.bounds.upper_bound},
                         {"gap", r.bounds.gap},
                         {"awgn_condition", r.awgn_condition},
                         {"secrecy_condition", r.secrecy_condition},
                         {"degraded", r.degraded},
                         {"feasible", r.feasible},
                         {"g_lambda1", r.g_lambda1},
                         {"v1_pow_2n", r.v1_pow},
                         {"v2_pow_2n", r.v2_pow},
                         {"v3_pow_2n", r.v3_pow},
                         {"provenance", provenance("rate-analysis", "rate_report")}};
    }

    // V1 sweep parameterized by the substitution ratio
    // (1/(2 pi e)) V1^(2/n) / sigma1^2; the gap tends to 1/2 nat as it drops.
    std::vector<double> ratios = field_or<std::vector<double>>(
        doc, "v1_ratios", {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7});
    const double s1 = params.sigma1();
    json rows = json::array();
    std::string csv = "v1_ratio,v1_pow_2n,r_k_bound,r_p_bound,upper_bound,gap\n";
    for (double ratio : ratios) {
        const double v1_pow = ratio * s1 * s1 / kIdealSecondMoment;
        const RateBounds b = rate_bounds(params, v1_pow, g);
        rows.push_back(json{{"v1_ratio", ratio},
                            {"v1_pow_2n", v1_pow},
                            {"r_k_bound", b.r_k_bound},
                            {"r_p_bound", b.r_p_bound},
                            {"upper_bound", b.upper_bound},
                            {"gap", b.gap}});
        csv += fmt17(ratio) + "," + fmt17(v1_pow) + "," + fmt17(b.r_k_bound) + "," +
               fmt17(b.r_p_bound) + "," + fmt17(b.upper_bound) + "," + fmt17(b.gap) +
               "\n";
    }
    res["sweep"] = json{{"rows", rows},
                        {"provenance", provenance("rate-analysis", "rate_bounds")}};
    RunResult out;
    out.doc["results"] = res;
    out.csv = csv;
    out.has_csv = true;
    return out;
}

inline RunResult run_calibrate(const ExperimentConfig& cfg) {
    const json& doc = cfg.body;
    if (!doc.contains("source")) throw ConfigError("calibrate: missing source block");
    const SourceParams params = parse_source(doc.at("source"));
    const std::string family = require_field<std::string>(doc, "family", "calibrate");
    const int n = require_field<int>(doc, "n", "calibrate");
    const double target = require_field<double>(doc, "target_epsilon", "calibrate");
    CalibrateOptions opts;
    opts.eq9_margin = field_or<double>(doc, "eq9_margin", 1.0);
    opts.max_scale2 = field_or<int>(doc, "max_scale2", 16);
    opts.max_scale3 = field_or<int>(doc, "max_scale3", 64);
    opts.mc_samples = field_or<std::uint64_t>(doc, "mc_samples", 0ull);
    opts.seed = cfg.seed;
    opts.theta = parse_theta_options(doc);

    const CalibrationResult r = chain_calibrate(params, family, n, target, opts);
    RunResult out;
    out.doc["results"] = json{
        {"chain",
         {{"family", family},
          {"n", n},
          {"base_scale", r.base_scale},
          {"scale2", r.chain.scale2()},
          {"scale3", r.chain.scale3()},
          {"lambda3_scale", r.lambda3_scale},
          {"key_cardinality", r.chain.key_cardinality()},
          {"public_cardinality", r.chain.public_cardinality()}}},
        {"margins",
         {{"achieved_epsilon", r.achieved_epsilon},
          {"target_epsilon", target},
          {"eq9_ratio", r.eq9_ratio},
          {"eq9_margin", opts.eq9_margin},
          {"g_lambda1", r.g_lambda1}}},
        {"rates",
         {{"r_k", r.rates.r_k},
          {"r_p", r.rates.r_p},
          {"r_k_bound", r.rates.bounds.r_k_bound},
          {"r_p_bound", r.rates.bounds.r_p_bound},
          {"upper_bound", r.rates.bounds.upper_bound},
          {"gap", r.rates.bounds.gap}}},
        {"provenance", provenance("rate-analysis", "chain_calibrate")}};
    return out;
}

}  // namespace detail

// Dispatches a validated config. Output is a function of (config, seed)
// alone: no timestamps, no environment state, ordered keys.
inline RunResult run_experiment(const ExperimentConfig& cfg) {
    RunResult out;
    switch (cfg.command) {
        case Command::Flatness: out = detail::run_flatness(cfg); break;
        case Command::Extract: out = detail::run_extract(cfg); break;
        case Command::Keygen: out = detail::run_keygen(cfg); break;
        case Command::Rates: out = detail::run_rates(cfg); break;
        case Command::Calibrate: out = detail::run_calibrate(cfg); break;
    }
    json doc;
    doc["schema_version"] = 1;
    doc["command"] = to_string(cfg.command);
    doc["seed"] = cfg.seed;
    doc["config"] = cfg.echo;
    for (auto& [key, value] : out.doc.items()) doc[key] = value;
    out.doc = std::move(doc);
    return out;
}

inline ExperimentConfig config_from_string(const std::string& text,
                                           std::optional<Command> forced) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // e.what() carries the byte/line position of the failure
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return make_config(doc, forced);
}

}  // namespace latkey
