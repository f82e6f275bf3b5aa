// crossgru command-line driver: data ingestion, synthetic fixtures,
// training, prediction, backtesting, parameter sweeps and report printing.
//
// Exit codes: 0 success, 1 validation/config error, 2 runtime or numerical
// error.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crossgru/pipeline.hpp"

namespace {

using crossgru::pipe::Paths;
using crossgru::pipe::RunConfig;
using nlohmann::json;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::vector<std::string> sets;
    std::string seeds_csv;
    int k = 0; // 0 = not given
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--set", args.sets, "Override a config key (key=value, repeatable)")
        ->take_all();
    cmd->add_option("--out", args.out_dir, "Output directory for all artifacts");
    cmd->add_option("--seeds", args.seeds_csv, "Comma-separated training seeds");
    cmd->add_option("--k", args.k, "Portfolio size for the top-k strategy");
}

std::vector<double> parse_csv_doubles(const std::string& s) {
    std::vector<double> out;
    std::string cur;
    for (char ch : s + ",") {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(std::stod(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    return out;
}

RunConfig resolve_config(const CommonArgs& args) {
    json j = crossgru::pipe::run_config_to_json(RunConfig{});
    if (!args.config_path.empty()) {
        json file = json::parse(crossgru::pipe::read_text(args.config_path), nullptr, false);
        if (file.is_discarded())
            throw crossgru::ConfigError("cannot parse config file " + args.config_path);
        j.update(file);
    }
    for (const auto& kv : args.sets) crossgru::pipe::apply_override(j, kv);
    if (!args.seeds_csv.empty()) {
        json seeds = json::array();
        for (double v : parse_csv_doubles(args.seeds_csv)) seeds.push_back(static_cast<std::uint64_t>(v));
        j["seeds"] = seeds;
    }
    if (args.k > 0) j["k"] = args.k;
    return crossgru::pipe::run_config_from_json(j);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"crossgru: graph-and-attention stock return forecaster with trading simulation"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string sweep_parameter;
    std::string sweep_values;

    auto* synth = app.add_subcommand("synth", "Generate the planted-signal synthetic market");
    add_common(synth, args);
    auto* ingest = app.add_subcommand("ingest", "Load, validate and preprocess a bar CSV into a panel cache");
    add_common(ingest, args);
    auto* train = app.add_subcommand("train", "Train one checkpoint per seed");
    add_common(train, args);
    auto* predict = app.add_subcommand("predict", "Write seed-averaged test scores");
    add_common(predict, args);
    auto* backtest = app.add_subcommand("backtest", "Predict, simulate the top-k strategy and write the report");
    add_common(backtest, args);
    auto* sweep = app.add_subcommand("sweep", "Train+backtest across one parameter's values");
    add_common(sweep, args);
    sweep->add_option("--parameter", sweep_parameter, "Parameter to sweep")->required();
    sweep->add_option("--values", sweep_values, "Comma-separated values")->required();
    auto* report = app.add_subcommand("report", "Print the metrics from an existing report.json");
    add_common(report, args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        const Paths paths{args.out_dir};
        if (report->parsed()) {
            std::fputs(crossgru::pipe::cmd_report(paths).c_str(), stdout);
            return 0;
        }
        const RunConfig cfg = resolve_config(args);
        if (synth->parsed()) {
            crossgru::pipe::cmd_synth(cfg, paths);
            std::printf("wrote %s and %s\n", paths.market_csv().c_str(), paths.truth_graph().c_str());
        } else if (ingest->parsed()) {
            const auto rep = crossgru::pipe::cmd_ingest(cfg, paths);
            std::printf("%s\n", crossgru::serde::load_report_to_json(rep).dump().c_str());
        } else if (train->parsed()) {
            crossgru::pipe::cmd_train(cfg, paths);
            std::printf("wrote %zu checkpoint(s) to %s\n", cfg.seeds.size(), paths.out.c_str());
        } else if (predict->parsed()) {
            const auto table = crossgru::pipe::cmd_predict(cfg, paths);
            std::printf("wrote scores for %zu day(s) to %s\n", table.days.size(), paths.scores().c_str());
        } else if (backtest->parsed()) {
            crossgru::pipe::cmd_backtest(cfg, paths);
            std::fputs(crossgru::pipe::cmd_report(paths).c_str(), stdout);
        } else if (sweep->parsed()) {
            crossgru::pipe::cmd_sweep(cfg, paths, sweep_parameter, parse_csv_doubles(sweep_values));
            std::printf("wrote %s\n", paths.sweep().c_str());
        }
        return 0;
    } catch (const crossgru::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const crossgru::DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
