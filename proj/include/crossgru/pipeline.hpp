#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "crossgru/backtest.hpp"
#include "crossgru/dataset.hpp"
#include "crossgru/model.hpp"
#include "crossgru/relgraph.hpp"
#include "crossgru/serde.hpp"
#include "crossgru/synth.hpp"

namespace crossgru::pipe {

namespace fs = std::filesystem;
using nlohmann::json;

// Full run configuration: model hyperparameters plus data, split, graph,
// strategy and ensembling settings. Serialized flat; every run writes its
// resolved config next to its outputs.
struct RunConfig {
    net::ModelConfig model;

    std::string data_csv;
    std::string train_start = "2018-01-01", train_end = "2021-12-31";
    std::string valid_start = "2022-01-01", valid_end = "2022-12-31";
    std::string test_start = "2023-01-01", test_end = "2023-12-31";

    double mad_clip = 5.0;
    int min_train_days = 20;
    int max_ffill = 5;

    int graph_lookback = 252;
    rel::CorrMode corr_mode = rel::CorrMode::Signed;

    int k = 10;
    std::vector<std::uint64_t> seeds = {1};
    std::string precision = "f32"; // f32 | f64
    bt::ReturnTiming timing = bt::ReturnTiming::CloseToClose;
    std::string benchmark = "universe"; // universe | riskfree
    double risk_free_daily = 0.0;

    synth::SynthConfig synth;

    data::SplitRanges split_ranges() const {
        return {{train_start, train_end}, {valid_start, valid_end}, {test_start, test_end}};
    }

    void validate() const {
        model.validate();
        if (graph_lookback < 2) throw ConfigError("config: graph_lookback must be >= 2");
        if (k < 1) throw ConfigError("config: k must be >= 1");
        if (seeds.empty()) throw ConfigError("config: seeds must not be empty");
        if (precision != "f32" && precision != "f64")
            throw ConfigError("config: precision must be f32 or f64");
        if (benchmark != "universe" && benchmark != "riskfree")
            throw ConfigError("config: benchmark must be universe or riskfree");
        if (!(mad_clip > 0)) throw ConfigError("config: mad_clip must be positive");
        if (max_ffill < 0) throw ConfigError("config: max_ffill must be >= 0");
    }
};

inline json run_config_to_json(const RunConfig& c) {
    const auto& m = c.model;
    json j;
    j["his_t"] = m.his_t;
    j["label_t"] = m.label_t;
    j["judge_value"] = m.judge_value;
    j["gru_sizes"] = m.gru_sizes;
    j["hidden_size"] = m.hidden_size;
    j["gat_hidden"] = m.gat_hidden;
    j["gat_out"] = m.gat_out;
    j["gat_heads"] = m.gat_heads;
    j["head_hidden"] = m.head_hidden;
    j["cross_heads"] = m.cross_heads;
    j["d_r"] = m.d_r;
    j["d_i"] = m.d_i;
    j["learning_rate"] = m.learning_rate;
    j["batch_size"] = m.batch_size;
    j["epochs"] = m.epochs;
    j["use_agru_attention"] = m.use_agru_attention;
    j["use_gat_encoder"] = m.use_gat_encoder;
    j["use_latent"] = m.use_latent;
    j["use_head_gat"] = m.use_head_gat;
    j["gru_mode"] = m.gru_mode == agru::GruMode::Classic ? "classic" : "improved";
    j["attn_scope"] = m.attn_scope == agru::AttnScope::Current ? "current" : "window";

    j["data_csv"] = c.data_csv;
    j["train_start"] = c.train_start;
    j["train_end"] = c.train_end;
    j["valid_start"] = c.valid_start;
    j["valid_end"] = c.valid_end;
    j["test_start"] = c.test_start;
    j["test_end"] = c.test_end;
    j["mad_clip"] = c.mad_clip;
    j["min_train_days"] = c.min_train_days;
    j["max_ffill"] = c.max_ffill;
    j["graph_lookback"] = c.graph_lookback;
    j["corr_mode"] = c.corr_mode == rel::CorrMode::Absolute ? "abs" : "signed";
    j["k"] = c.k;
    j["seeds"] = c.seeds;
    j["precision"] = c.precision;
    j["return_timing"] = c.timing == bt::ReturnTiming::OpenToOpen ? "open" : "close";
    j["benchmark"] = c.benchmark;
    j["risk_free_daily"] = c.risk_free_daily;

    j["synth_n_stocks"] = c.synth.n_stocks;
    j["synth_n_days"] = c.synth.n_days;
    j["synth_group_size"] = c.synth.group_size;
    j["synth_seed"] = c.synth.seed;
    j["synth_rho"] = c.synth.rho;
    j["synth_group_sd"] = c.synth.group_sd;
    j["synth_idio_sd"] = c.synth.idio_sd;
    j["synth_beta"] = c.synth.beta;
    j["synth_gamma"] = c.synth.gamma;
    j["synth_noise_sd"] = c.synth.noise_sd;
    j["synth_vol_coef"] = c.synth.vol_coef;
    j["synth_start_date"] = c.synth.start_date;
    return j;
}

// Strict parse: unknown keys are rejected so flag typos fail loudly instead
// of silently running defaults.
inline RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    auto& m = c.model;
    for (const auto& [key, val] : j.items()) {
        try {
            if (key == "his_t") m.his_t = val.get<int>();
            else if (key == "label_t") m.label_t = val.get<int>();
            else if (key == "judge_value") m.judge_value = val.get<double>();
            else if (key == "gru_sizes") m.gru_sizes = val.get<std::vector<int>>();
            else if (key == "hidden_size") m.hidden_size = val.get<int>();
            else if (key == "gat_hidden") m.gat_hidden = val.get<int>();
            else if (key == "gat_out") m.gat_out = val.get<int>();
            else if (key == "gat_heads") m.gat_heads = val.get<int>();
            else if (key == "head_hidden") m.head_hidden = val.get<int>();
            else if (key == "cross_heads") m.cross_heads = val.get<int>();
            else if (key == "d_r") m.d_r = val.get<int>();
            else if (key == "d_i") m.d_i = val.get<int>();
            else if (key == "learning_rate") m.learning_rate = val.get<double>();
            else if (key == "batch_size") m.batch_size = val.get<int>();
            else if (key == "epochs") m.epochs = val.get<int>();
            else if (key == "use_agru_attention") m.use_agru_attention = val.get<bool>();
            else if (key == "use_gat_encoder") m.use_gat_encoder = val.get<bool>();
            else if (key == "use_latent") m.use_latent = val.get<bool>();
            else if (key == "use_head_gat") m.use_head_gat = val.get<bool>();
            else if (key == "gru_mode") {
                const auto s = val.get<std::string>();
                if (s == "classic") m.gru_mode = agru::GruMode::Classic;
                else if (s == "improved") m.gru_mode = agru::GruMode::Improved;
                else throw ConfigError("config: gru_mode must be improved or classic");
            } else if (key == "attn_scope") {
                const auto s = val.get<std::string>();
                if (s == "current") m.attn_scope = agru::AttnScope::Current;
                else if (s == "window") m.attn_scope = agru::AttnScope::Window;
                else throw ConfigError("config: attn_scope must be window or current");
            } else if (key == "data_csv") c.data_csv = val.get<std::string>();
            else if (key == "train_start") c.train_start = val.get<std::string>();
            else if (key == "train_end") c.train_end = val.get<std::string>();
            else if (key == "valid_start") c.valid_start = val.get<std::string>();
            else if (key == "valid_end") c.valid_end = val.get<std::string>();
            else if (key == "test_start") c.test_start = val.get<std::string>();
            else if (key == "test_end") c.test_end = val.get<std::string>();
            else if (key == "mad_clip") c.mad_clip = val.get<double>();
            else if (key == "min_train_days") c.min_train_days = val.get<int>();
            else if (key == "max_ffill") c.max_ffill = val.get<int>();
            else if (key == "graph_lookback") c.graph_lookback = val.get<int>();
            else if (key == "corr_mode") {
                const auto s = val.get<std::string>();
                if (s == "abs") c.corr_mode = rel::CorrMode::Absolute;
                else if (s == "signed") c.corr_mode = rel::CorrMode::Signed;
                else throw ConfigError("config: corr_mode must be signed or abs");
            } else if (key == "k") c.k = val.get<int>();
            else if (key == "seeds") c.seeds = val.get<std::vector<std::uint64_t>>();
            else if (key == "precision") c.precision = val.get<std::string>();
            else if (key == "return_timing") {
                const auto s = val.get<std::string>();
                if (s == "open") c.timing = bt::ReturnTiming::OpenToOpen;
                else if (s == "close") c.timing = bt::ReturnTiming::CloseToClose;
                else throw ConfigError("config: return_timing must be close or open");
            } else if (key == "benchmark") c.benchmark = val.get<std::string>();
            else if (key == "risk_free_daily") c.risk_free_daily = val.get<double>();
            else if (key == "synth_n_stocks") c.synth.n_stocks = val.get<int>();
            else if (key == "synth_n_days") c.synth.n_days = val.get<int>();
            else if (key == "synth_group_size") c.synth.group_size = val.get<int>();
            else if (key == "synth_seed") c.synth.seed = val.get<std::uint64_t>();
            else if (key == "synth_rho") c.synth.rho = val.get<double>();
            else if (key == "synth_group_sd") c.synth.group_sd = val.get<double>();
            else if (key == "synth_idio_sd") c.synth.idio_sd = val.get<double>();
            else if (key == "synth_beta") c.synth.beta = val.get<double>();
            else if (key == "synth_gamma") c.synth.gamma = val.get<double>();
            else if (key == "synth_noise_sd") c.synth.noise_sd = val.get<double>();
            else if (key == "synth_vol_coef") c.synth.vol_coef = val.get<double>();
            else if (key == "synth_start_date") c.synth.start_date = val.get<std::string>();
            else throw ConfigError("config: unknown key '" + key + "'");
        } catch (const json::exception& e) {
            throw ConfigError("config: bad value for '" + key + "': " + e.what());
        }
    }
    return c;
}

// `--set key=value` override. Values parse as JSON when possible (numbers,
// bools, arrays) and fall back to plain strings.
inline void apply_override(json& j, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);
    json parsed = json::parse(raw, nullptr, false);
    if (parsed.is_discarded()) parsed = raw;
    j[key] = parsed;
}

// ---------------------------------------------------------------------------
// Artifact paths and small file helpers.

struct Paths {
    fs::path out;
    fs::path config() const { return out / "config.resolved.json"; }
    fs::path panel_cache() const { return out / "panel.cache"; }
    fs::path market_csv() const { return out / "market.csv"; }
    fs::path truth_graph() const { return out / "truth_graph.json"; }
    fs::path graph() const { return out / "graph.json"; }
    fs::path checkpoint(std::uint64_t seed) const { return out / ("ckpt.seed" + std::to_string(seed)); }
    fs::path losses() const { return out / "losses.csv"; }
    fs::path scores() const { return out / "scores.csv"; }
    fs::path report() const { return out / "report.json"; }
    fs::path curve() const { return out / "curve.csv"; }
    fs::path sweep() const { return out / "sweep.csv"; }
};

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    os << text;
    if (!os) throw DataError("write failed for " + path.string());
}

inline std::string read_text(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    std::string s((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return s;
}

inline void write_resolved_config(const RunConfig& cfg, const Paths& paths) {
    fs::create_directories(paths.out);
    write_text(paths.config(), run_config_to_json(cfg).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Panel cache: versioned binary, bitwise round-trip.

inline constexpr char kPanelMagic[9] = "CGPNL001";

inline void save_panel(const data::Panel& p, const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("save_panel: cannot write " + path.string());
    os.write(kPanelMagic, 8);
    net::io::put_u64(os, static_cast<std::uint64_t>(p.n()));
    net::io::put_u64(os, static_cast<std::uint64_t>(p.t()));
    for (const auto& s : p.tickers) net::io::put_str(os, s);
    for (const auto& s : p.dates) net::io::put_str(os, s);
    auto put_vec = [&](const std::vector<double>& v) {
        os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    put_vec(p.features);
    put_vec(p.raw_close);
    put_vec(p.raw_open);
    put_vec(p.returns);
    os.write(reinterpret_cast<const char*>(p.valid.data()), static_cast<std::streamsize>(p.valid.size()));
    os.write(reinterpret_cast<const char*>(p.split_tag.data()), static_cast<std::streamsize>(p.split_tag.size()));
    const std::uint64_t flags = (p.split_assigned ? 1u : 0u) | (p.returns_computed ? 2u : 0u) |
                                (p.preprocessed ? 4u : 0u);
    net::io::put_u64(os, flags);
    if (!os) throw DataError("save_panel: write failed for " + path.string());
}

inline data::Panel load_panel_cache(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("load_panel_cache: cannot open " + path.string() + " (run ingest first)");
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kPanelMagic, 8) != 0)
        throw DataError("load_panel_cache: bad magic in " + path.string());
    data::Panel p;
    const auto n = net::io::get_u64(is);
    const auto t = net::io::get_u64(is);
    p.tickers.resize(n);
    for (auto& s : p.tickers) s = net::io::get_str(is);
    p.dates.resize(t);
    for (auto& s : p.dates) s = net::io::get_str(is);
    auto get_vec = [&](std::vector<double>& v, std::size_t count) {
        v.resize(count);
        is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)));
    };
    get_vec(p.features, n * t * data::kFeatureCount);
    get_vec(p.raw_close, n * t);
    get_vec(p.raw_open, n * t);
    get_vec(p.returns, n * t);
    p.valid.resize(n * t);
    is.read(reinterpret_cast<char*>(p.valid.data()), static_cast<std::streamsize>(p.valid.size()));
    p.split_tag.resize(t);
    is.read(reinterpret_cast<char*>(p.split_tag.data()), static_cast<std::streamsize>(p.split_tag.size()));
    const std::uint64_t flags = net::io::get_u64(is);
    p.split_assigned = flags & 1u;
    p.returns_computed = flags & 2u;
    p.preprocessed = flags & 4u;
    if (!is) throw DataError("load_panel_cache: truncated file " + path.string());
    return p;
}

// ---------------------------------------------------------------------------
// Commands.

inline void cmd_synth(const RunConfig& cfg, const Paths& paths) {
    cfg.validate();
    synth::SynthMarket mk = synth::generate(cfg.synth);
    fs::create_directories(paths.out);
    synth::write_csv(mk, paths.market_csv().string());
    write_text(paths.truth_graph(), serde::graph_to_json(synth::truth_graph(mk), mk.tickers).dump(2) + "\n");
    write_resolved_config(cfg, paths);
}

inline data::LoadReport cmd_ingest(RunConfig cfg, const Paths& paths) {
    if (cfg.data_csv.empty()) {
        if (fs::exists(paths.market_csv())) cfg.data_csv = paths.market_csv().string();
        else throw ConfigError("ingest: data_csv not set and no market.csv in the output directory");
    }
    cfg.validate();
    auto [raw, report] = data::load_panel(cfg.data_csv, data::CsvSchema{}, cfg.max_ffill);
    data::Panel panel = data::split_by_date(raw, cfg.split_ranges());
    data::compute_daily_returns(panel);
    panel = data::preprocess(panel, cfg.mad_clip, data::Split::Train, cfg.min_train_days);
    fs::create_directories(paths.out);
    save_panel(panel, paths.panel_cache());
    write_resolved_config(cfg, paths);
    return report;
}

inline rel::CorrelationGraph build_run_graph(const RunConfig& cfg, const data::Panel& panel) {
    int as_of = -1;
    for (int d = 0; d < panel.t(); ++d)
        if (panel.split_tag[static_cast<std::size_t>(d)] == data::Split::Train) as_of = d;
    if (as_of < 0) throw ConfigError("graph: no train-tagged dates in panel");
    return rel::build_graph(panel, as_of, cfg.graph_lookback, cfg.model.judge_value, cfg.corr_mode);
}

namespace detail {

template <typename T>
void run_train_typed(const RunConfig& cfg, const Paths& paths, const data::Panel& panel,
                     const rel::CorrelationGraph& graph, const std::vector<data::Sample>& samples,
                     std::string& losses_csv) {
    const auto train_set = data::samples_for_split(samples, data::Split::Train);
    const auto valid_set = data::samples_for_split(samples, data::Split::Valid);
    if (train_set.empty()) throw DataError("train: no eligible training anchors");

    for (std::uint64_t seed : cfg.seeds) {
        net::ModelConfig mc = cfg.model;
        mc.seed = seed;
        net::Model<T> model(mc);
        const auto log = net::train(model, train_set, valid_set, graph);
        net::save_checkpoint(model, paths.checkpoint(seed).string());
        for (const auto& e : log) {
            losses_csv += std::to_string(seed) + "," + std::to_string(e.epoch) + "," +
                          serde::fmt_double(e.train) + "," + serde::fmt_double(e.valid) + "\n";
        }
    }
}

template <typename T>
bt::ScoreTable run_predict_typed(const RunConfig& cfg, const Paths& paths,
                                 const rel::CorrelationGraph& graph,
                                 const std::vector<data::Sample>& samples) {
    const auto test_set = data::samples_for_split(samples, data::Split::Test);
    if (test_set.empty()) throw DataError("predict: no eligible test anchors");

    std::vector<std::vector<net::DayPrediction>> per_seed;
    for (std::uint64_t seed : cfg.seeds) {
        const fs::path ck = paths.checkpoint(seed);
        if (!fs::exists(ck)) throw DataError("predict: missing checkpoint " + ck.string());
        net::Model<T> model = net::load_checkpoint<T>(ck.string());
        per_seed.push_back(net::predict_scores(model, test_set, graph));
    }

    // Ensemble: average scores per (date,ticker) across seeds. Every seed
    // sees the same anchors, so the tables align row for row.
    bt::ScoreTable table;
    const auto& first = per_seed.front();
    for (std::size_t d = 0; d < first.size(); ++d) {
        bt::ScoreTable::Day day;
        day.day = first[d].day;
        day.stocks = first[d].stocks;
        day.labels = first[d].labels;
        day.scores.assign(first[d].scores.size(), 0.0);
        for (const auto& seed_preds : per_seed) {
            if (seed_preds[d].day != day.day || seed_preds[d].stocks != day.stocks)
                throw Error("predict: seed ensembles disagree on anchor layout");
            for (std::size_t i = 0; i < day.scores.size(); ++i)
                day.scores[i] += seed_preds[d].scores[i];
        }
        for (auto& s : day.scores) s /= static_cast<double>(per_seed.size());
        table.days.push_back(std::move(day));
    }
    return table;
}

} // namespace detail

inline void cmd_train(const RunConfig& cfg, const Paths& paths) {
    cfg.validate();
    const data::Panel panel = load_panel_cache(paths.panel_cache());
    const auto samples = data::build_windows(panel, cfg.model.his_t, cfg.model.label_t);
    const rel::CorrelationGraph graph = build_run_graph(cfg, panel);
    write_text(paths.graph(), serde::graph_to_json(graph, panel.tickers).dump(2) + "\n");

    std::string losses_csv = "seed,epoch,train_loss,valid_loss\n";
    if (cfg.precision == "f64")
        detail::run_train_typed<double>(cfg, paths, panel, graph, samples, losses_csv);
    else
        detail::run_train_typed<float>(cfg, paths, panel, graph, samples, losses_csv);
    write_text(paths.losses(), losses_csv);
    write_resolved_config(cfg, paths);
}

inline bt::ScoreTable cmd_predict(const RunConfig& cfg, const Paths& paths) {
    cfg.validate();
    const data::Panel panel = load_panel_cache(paths.panel_cache());
    const auto samples = data::build_windows(panel, cfg.model.his_t, cfg.model.label_t);
    const rel::CorrelationGraph graph = build_run_graph(cfg, panel);

    bt::ScoreTable table = cfg.precision == "f64"
                               ? detail::run_predict_typed<double>(cfg, paths, graph, samples)
                               : detail::run_predict_typed<float>(cfg, paths, graph, samples);

    std::string csv = "date,ticker,score\n";
    for (const auto& day : table.days)
        for (std::size_t i = 0; i < day.stocks.size(); ++i)
            csv += panel.dates[static_cast<std::size_t>(day.day)] + "," +
                   panel.tickers[static_cast<std::size_t>(day.stocks[i])] + "," +
                   serde::fmt_double(day.scores[i]) + "\n";
    write_text(paths.scores(), csv);
    write_resolved_config(cfg, paths);
    return table;
}

inline bt::Report cmd_backtest(const RunConfig& cfg, const Paths& paths) {
    const bt::ScoreTable table = cmd_predict(cfg, paths);
    const data::Panel panel = load_panel_cache(paths.panel_cache());

    bt::Report rep = bt::evaluate(table, panel, cfg.k, cfg.timing);
    if (cfg.benchmark == "riskfree") {
        std::vector<double> rf(rep.curve.size(), cfg.risk_free_daily);
        rep.benchmark = bt::EquityCurve::from_returns(rep.curve.dates, std::move(rf));
        rep.ir = bt::metric_ratios(rep.arr, rep.avol, rep.mdd, rep.curve, rep.benchmark).ir;
    }
    rep.ablation = cfg.model.ablation_label();

    write_text(paths.report(), serde::report_to_json(rep).dump(2) + "\n");
    std::string csv = "date,value,ret\n";
    for (std::size_t i = 0; i < rep.curve.size(); ++i)
        csv += rep.curve.dates[i] + "," + serde::fmt_double(rep.curve.values[i]) + "," +
               serde::fmt_double(rep.curve.rets[i]) + "\n";
    write_text(paths.curve(), csv);
    return rep;
}

inline const std::set<std::string>& sweep_parameters() {
    static const std::set<std::string> names = {"judge_value", "label_t", "his_t",
                                                "hidden_size", "gat_heads", "num_hidden_states"};
    return names;
}

inline void apply_sweep_value(RunConfig& cfg, const std::string& parameter, double value) {
    if (parameter == "judge_value") {
        cfg.model.judge_value = value;
    } else if (parameter == "label_t") {
        cfg.model.label_t = static_cast<int>(value);
    } else if (parameter == "his_t") {
        cfg.model.his_t = static_cast<int>(value);
    } else if (parameter == "hidden_size") {
        cfg.model.hidden_size = static_cast<int>(value);
        cfg.model.gru_sizes.front() = static_cast<int>(value);
    } else if (parameter == "gat_heads") {
        cfg.model.gat_heads = static_cast<int>(value);
    } else if (parameter == "num_hidden_states") {
        cfg.model.d_r = static_cast<int>(value);
    } else {
        std::string valid;
        for (const auto& n : sweep_parameters()) valid += (valid.empty() ? "" : ", ") + n;
        throw ConfigError("sweep: unknown parameter '" + parameter + "' (valid: " + valid + ")");
    }
}

struct SweepRow {
    double value = 0.0;
    bt::Report report;
};

// One full train + backtest per value, each in its own subdirectory, then a
// consolidated comparison table.
inline std::vector<SweepRow> cmd_sweep(const RunConfig& cfg, const Paths& paths,
                                       const std::string& parameter, const std::vector<double>& values) {
    if (values.empty()) throw ConfigError("sweep: empty values list");
    if (!sweep_parameters().count(parameter)) {
        std::string valid;
        for (const auto& n : sweep_parameters()) valid += (valid.empty() ? "" : ", ") + n;
        throw ConfigError("sweep: unknown parameter '" + parameter + "' (valid: " + valid + ")");
    }

    std::vector<SweepRow> rows;
    std::string csv = "parameter,value,arr,avol,mdd,asr,cr,ir,mse,mae\n";
    for (double v : values) {
        RunConfig sub = cfg;
        apply_sweep_value(sub, parameter, v);
        Paths subpaths{paths.out / ("sweep_" + parameter + "_" + serde::fmt_double(v))};
        fs::create_directories(subpaths.out);
        if (!fs::exists(subpaths.panel_cache())) fs::copy_file(paths.panel_cache(), subpaths.panel_cache());
        cmd_train(sub, subpaths);
        bt::Report rep = cmd_backtest(sub, subpaths);
        auto opt = [](const std::optional<double>& o) { return o ? serde::fmt_double(*o) : "null"; };
        csv += parameter + "," + serde::fmt_double(v) + "," + serde::fmt_double(rep.arr) + "," +
               serde::fmt_double(rep.avol) + "," + serde::fmt_double(-rep.mdd) + "," + opt(rep.asr) + "," +
               opt(rep.cr) + "," + opt(rep.ir) + "," + serde::fmt_double(rep.mse) + "," +
               serde::fmt_double(rep.mae) + "\n";
        rows.push_back({v, std::move(rep)});
    }
    write_text(paths.sweep(), csv);
    return rows;
}

inline std::string format_report_summary(const json& j) {
    auto num = [&](const char* key) {
        const auto& v = j.at(key);
        return v.is_null() ? std::string("undefined") : serde::fmt_double(v.get<double>());
    };
    std::string s;
    s += "k          " + std::to_string(j.at("k").get<int>()) + "\n";
    s += "ablation   " + j.at("ablation").get<std::string>() + "\n";
    s += "ARR        " + num("arr") + "\n";
    s += "AVoL       " + num("avol") + "\n";
    s += "MDD        " + num("mdd") + "\n";
    s += "ASR        " + num("asr") + "\n";
    s += "CR         " + num("cr") + "\n";
    s += "IR         " + num("ir") + "\n";
    s += "MSE        " + num("mse") + "\n";
    s += "MAE        " + num("mae") + "\n";
    s += "days       " + std::to_string(j.at("curve").size()) + "\n";
    return s;
}

inline std::string cmd_report(const Paths& paths) {
    const json j = json::parse(read_text(paths.report()));
    return format_report_summary(j);
}

} // namespace crossgru::pipe
