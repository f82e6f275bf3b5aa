#pragma once

#include <charconv>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossgru/backtest.hpp"
#include "crossgru/dataset.hpp"
#include "crossgru/relgraph.hpp"

namespace crossgru::serde {

using nlohmann::json;

// Shortest round-trip decimal rendering; used everywhere a float lands in a
// CSV so reruns are byte-identical.
inline std::string fmt_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

inline json load_report_to_json(const data::LoadReport& r) {
    return json{{"rows_read", r.rows_read},
                {"rows_rejected", r.rows_rejected},
                {"tickers", r.tickers},
                {"date_range", {r.date_range.first, r.date_range.second}}};
}

// Graph dump: undirected edges listed once (i < j); self-loops are implied
// and re-added on load.
inline json graph_to_json(const rel::CorrelationGraph& g, const std::vector<std::string>& tickers) {
    json edges = json::array();
    for (int i = 0; i < g.n; ++i)
        for (const auto& e : g.neighbors(i))
            if (e.to > i) edges.push_back({i, e.to, e.w});
    return json{{"n", g.n},
                {"tickers", tickers},
                {"edges", edges},
                {"judge_value", g.judge_value},
                {"window", {g.window.first, g.window.second}}};
}

inline rel::CorrelationGraph graph_from_json(const json& j) {
    rel::CorrelationGraph g;
    g.n = j.at("n").get<int>();
    g.judge_value = j.at("judge_value").get<double>();
    const auto& w = j.at("window");
    g.window = {w.at(0).get<std::string>(), w.at(1).get<std::string>()};
    g.adjacency.resize(static_cast<std::size_t>(g.n));
    for (const auto& e : j.at("edges")) {
        const int a = e.at(0).get<int>();
        const int b = e.at(1).get<int>();
        const double wt = e.at(2).get<double>();
        if (a < 0 || b < 0 || a >= g.n || b >= g.n) throw DataError("graph_from_json: edge index out of range");
        g.adjacency[static_cast<std::size_t>(a)].push_back({b, wt});
        g.adjacency[static_cast<std::size_t>(b)].push_back({a, wt});
    }
    for (int i = 0; i < g.n; ++i) {
        g.adjacency[static_cast<std::size_t>(i)].push_back({i, 1.0});
        std::sort(g.adjacency[static_cast<std::size_t>(i)].begin(),
                  g.adjacency[static_cast<std::size_t>(i)].end(),
                  [](const rel::CorrelationGraph::Edge& x, const rel::CorrelationGraph::Edge& y) {
                      return x.to < y.to;
                  });
    }
    return g;
}

inline json curve_to_json(const bt::EquityCurve& c) {
    json rows = json::array();
    for (std::size_t i = 0; i < c.size(); ++i)
        rows.push_back({{"date", c.dates[i]}, {"value", c.values[i]}, {"ret", c.rets[i]}});
    return rows;
}

// MDD is stored positive and rendered negative, matching the usual sign
// convention in performance tables.
inline json report_to_json(const bt::Report& r) {
    json j{{"k", r.k},
           {"arr", r.arr},
           {"avol", r.avol},
           {"mdd", -r.mdd},
           {"asr", r.asr ? json(*r.asr) : json(nullptr)},
           {"cr", r.cr ? json(*r.cr) : json(nullptr)},
           {"ir", r.ir ? json(*r.ir) : json(nullptr)},
           {"mse", r.mse},
           {"mae", r.mae},
           {"ablation", r.ablation},
           {"curve", curve_to_json(r.curve)},
           {"benchmark", curve_to_json(r.benchmark)}};
    return j;
}

} // namespace crossgru::serde
