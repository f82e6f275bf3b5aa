#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "crossgru/common.hpp"
#include "crossgru/dataset.hpp"

namespace crossgru::rel {

// Pearson correlation over two equal-length series. Returns nullopt when
// the coefficient is undefined (fewer than two observations or a constant
// series); callers treat that as "no edge".
inline std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw Error("pearson: series length mismatch");
    const std::size_t n = a.size();
    if (n < 2) return std::nullopt;
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt;
    return sab / (std::sqrt(saa) * std::sqrt(sbb));
}

// Thresholded correlation graph over the stock universe. Symmetric, with a
// weight-1 self-loop on every node so attention neighborhoods are never
// empty. Neighbor lists are kept sorted; aggregation order is therefore
// fixed and results reproducible.
struct CorrelationGraph {
    struct Edge {
        int to = 0;
        double w = 0.0;
    };
    int n = 0;
    std::vector<std::vector<Edge>> adjacency; // sorted by `to`, includes self
    double judge_value = 0.0;
    std::pair<std::string, std::string> window;

    const std::vector<Edge>& neighbors(int i) const { return adjacency[static_cast<std::size_t>(i)]; }

    long long cross_edge_count() const {
        long long c = 0;
        for (int i = 0; i < n; ++i)
            for (const auto& e : adjacency[static_cast<std::size_t>(i)])
                if (e.to != i) ++c;
        return c / 2;
    }

    // Subgraph on `nodes` (ascending panel indices), renumbered 0..m-1.
    // Self-loops survive by construction.
    CorrelationGraph induce(const std::vector<int>& nodes) const {
        std::vector<int> remap(static_cast<std::size_t>(n), -1);
        for (std::size_t k = 0; k < nodes.size(); ++k) remap[static_cast<std::size_t>(nodes[k])] = static_cast<int>(k);
        CorrelationGraph g;
        g.n = static_cast<int>(nodes.size());
        g.judge_value = judge_value;
        g.window = window;
        g.adjacency.resize(nodes.size());
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            for (const auto& e : adjacency[static_cast<std::size_t>(nodes[k])]) {
                const int m = remap[static_cast<std::size_t>(e.to)];
                if (m >= 0) g.adjacency[k].push_back({m, e.w});
            }
        }
        return g;
    }
};

enum class CorrMode { Signed, Absolute };

// Builds the relationship graph from trailing return correlations over the
// `lookback_days` window ending at `as_of` (a panel date index). An edge
// (i,j) is kept when rho >= judge_value (or |rho| >= judge_value in
// Absolute mode). Undefined correlations simply produce no edge.
inline CorrelationGraph build_graph(const data::Panel& panel, int as_of, int lookback_days,
                                    double judge_value, CorrMode mode = CorrMode::Signed) {
    if (!panel.returns_computed) throw ConfigError("build_graph: returns not computed");
    if (as_of < 0 || as_of >= panel.t()) throw ConfigError("build_graph: as_of outside panel dates");
    if (lookback_days < 2) throw ConfigError("build_graph: lookback_days must be >= 2");
    if (lookback_days > as_of + 1)
        throw ConfigError("build_graph: lookback window of " + std::to_string(lookback_days) +
                          " days exceeds available history (" + std::to_string(as_of + 1) + ")");

    const int start = as_of - lookback_days + 1;
    const int n = panel.n();
    CorrelationGraph g;
    g.n = n;
    g.judge_value = judge_value;
    g.window = {panel.dates[static_cast<std::size_t>(start)], panel.dates[static_cast<std::size_t>(as_of)]};
    g.adjacency.resize(static_cast<std::size_t>(n));

    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            std::vector<double> a, b;
            for (int d = start; d <= as_of; ++d) {
                if (panel.return_defined(i, d) && panel.return_defined(j, d)) {
                    a.push_back(panel.return_at(i, d));
                    b.push_back(panel.return_at(j, d));
                }
            }
            const auto rho = pearson(a, b);
            if (!rho) continue;
            const double score = mode == CorrMode::Absolute ? std::abs(*rho) : *rho;
            if (score >= judge_value) {
                g.adjacency[static_cast<std::size_t>(i)].push_back({j, *rho});
                g.adjacency[static_cast<std::size_t>(j)].push_back({i, *rho});
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        g.adjacency[static_cast<std::size_t>(i)].push_back({i, 1.0});
        std::sort(g.adjacency[static_cast<std::size_t>(i)].begin(), g.adjacency[static_cast<std::size_t>(i)].end(),
                  [](const CorrelationGraph::Edge& x, const CorrelationGraph::Edge& y) { return x.to < y.to; });
    }
    if (g.cross_edge_count() == 0)
        warn("build_graph: no cross edges at judge_value=" + std::to_string(judge_value));
    return g;
}

} // namespace crossgru::rel
