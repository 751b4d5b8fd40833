// Command-line front end: experiment configs in, JSON/CSV results out.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "latkey/experiment.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::uint64_t> trials;
    std::string out_path;
    std::string format = "json";
    std::string dump_trials_path;
    std::string chain_spec;
    std::string source_config_path;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "experiment config (JSON)");
    sub->add_option("--seed", args.seed, "master seed override");
    sub->add_option("--threads", args.threads, "worker count (results are thread-count independent)");
    sub->add_option("--out", args.out_path, "output file (default: stdout)");
    sub->add_option("--format", args.format, "json|csv")
        ->check(CLI::IsMember({"json", "csv"}));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw latkey::ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw latkey::ConfigError("cannot write file: " + path);
    out << data;
}

// compact chain spec: family,base_scale,scale2,scale3  e.g.  Zn:4,0.5,2,4
latkey::json parse_chain_spec(const std::string& spec) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : spec) {
        if (ch == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    if (parts.size() != 4) {
        throw latkey::ConfigError(
            "chain spec must be family,base_scale,scale2,scale3 (got '" + spec + "')");
    }
    try {
        return latkey::json{{"family", parts[0]},
                            {"base_scale", std::stod(parts[1])},
                            {"scale2", std::stoi(parts[2])},
                            {"scale3", std::stoi(parts[3])}};
    } catch (const std::exception&) {
        throw latkey::ConfigError("bad numeric field in chain spec '" + spec + "'");
    }
}

int run(latkey::Command command, const CommonArgs& args) {
    latkey::json doc = latkey::json::object();
    if (!args.config_path.empty()) {
        doc = latkey::config_from_string(read_file(args.config_path), command).body;
    }
    if (!args.chain_spec.empty()) doc["chain"] = parse_chain_spec(args.chain_spec);
    if (!args.source_config_path.empty()) {
        latkey::json src = latkey::json::parse(read_file(args.source_config_path), nullptr, false);
        if (src.is_discarded()) {
            throw latkey::ConfigError("source config parse error in " + args.source_config_path);
        }
        doc["source"] = src.contains("source") ? src.at("source") : src;
    }
    if (args.seed) doc["seed"] = *args.seed;
    if (args.threads) doc["threads"] = *args.threads;
    if (args.trials) doc["trials"] = *args.trials;
    if (!args.dump_trials_path.empty()) doc["dump_trials"] = true;
    doc["command"] = latkey::to_string(command);

    const latkey::ExperimentConfig cfg = latkey::make_config(doc, command);
    const latkey::RunResult result = latkey::run_experiment(cfg);

    std::string payload;
    if (args.format == "csv") {
        if (!result.has_csv) {
            throw latkey::ConfigError("this command has no CSV output");
        }
        payload = result.csv;
    } else {
        payload = result.doc.dump(2) + "\n";
    }
    if (args.out_path.empty()) {
        std::cout << payload;
    } else {
        write_file(args.out_path, payload);
    }
    if (!args.dump_trials_path.empty()) {
        if (!result.has_csv) {
            throw latkey::ConfigError("no per-trial records were produced");
        }
        write_file(args.dump_trials_path, result.csv);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lattice-hashing key generation simulator"};
    app.require_subcommand(1);

    CommonArgs args;
    auto* flatness = app.add_subcommand("flatness", "flatness factor sweeps (CSV/JSON)");
    add_common(flatness, args);
    auto* extract = app.add_subcommand("extract", "randomness-extractor report");
    add_common(extract, args);
    auto* keygen = app.add_subcommand("keygen", "run key-agreement trials");
    add_common(keygen, args);
    keygen->add_option("--chain", args.chain_spec, "chain spec: family,base_scale,scale2,scale3");
    keygen->add_option("--source-config", args.source_config_path, "JSON file with the source block");
    keygen->add_option("--trials", args.trials, "number of trials");
    keygen->add_option("--dump-trials", args.dump_trials_path, "write per-trial CSV here");
    auto* rates = app.add_subcommand("rates", "closed-form rate report and V1 sweep");
    add_common(rates, args);
    auto* calibrate = app.add_subcommand("calibrate", "search a feasible nested chain");
    add_common(calibrate, args);

    CLI11_PARSE(app, argc, argv);

    latkey::Command command = latkey::Command::Flatness;
    if (flatness->parsed()) command = latkey::Command::Flatness;
    if (extract->parsed()) command = latkey::Command::Extract;
    if (keygen->parsed()) command = latkey::Command::Keygen;
    if (rates->parsed()) command = latkey::Command::Rates;
    if (calibrate->parsed()) command = latkey::Command::Calibrate;

    try {
        return run(command, args);
    } catch (const latkey::Error& e) {
        latkey::json err{{"error",
                          {{"exit_code", e.exit_code()},
                           {"kind", e.kind() == latkey::ErrorKind::Config ? "config"
                                    : e.kind() == latkey::ErrorKind::Infeasible
                                        ? "infeasible"
                                        : "numerical_guard"},
                           {"message", e.what()}}}};
        std::cerr << err.dump(2) << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        latkey::json err{{"error", {{"exit_code", 1}, {"kind", "internal"}, {"message", e.what()}}}};
        std::cerr << err.dump(2) << "\n";
        return 1;
    }
}
