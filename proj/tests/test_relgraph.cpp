#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "crossgru/relgraph.hpp"
#include "crossgru/rng.hpp"
#include "oracles.hpp"

using namespace crossgru;

namespace {

// Panel with returns assigned directly (close prices consistent by cumprod).
data::Panel panel_from_returns(const std::vector<std::vector<double>>& rets) {
    data::Panel p;
    const int n = static_cast<int>(rets.size());
    const int t = static_cast<int>(rets[0].size()) + 1;
    for (int i = 0; i < n; ++i) p.tickers.push_back("S" + std::to_string(i));
    std::string d = "2020-01-01";
    for (int k = 0; k < t; ++k) {
        p.dates.push_back(d);
        d = dates::next(d);
    }
    p.features.assign(static_cast<std::size_t>(n) * t * data::kFeatureCount, 0.0);
    p.raw_close.assign(static_cast<std::size_t>(n) * t, 0.0);
    p.raw_open.assign(static_cast<std::size_t>(n) * t, 0.0);
    p.returns.assign(static_cast<std::size_t>(n) * t, std::nan(""));
    p.valid.assign(static_cast<std::size_t>(n) * t, 1);
    p.split_tag.assign(static_cast<std::size_t>(t), data::Split::Train);
    p.split_assigned = true;
    for (int i = 0; i < n; ++i) {
        double px = 100.0;
        p.raw_close[p.cell(i, 0)] = px;
        for (int k = 1; k < t; ++k) {
            px *= 1.0 + rets[static_cast<std::size_t>(i)][static_cast<std::size_t>(k - 1)];
            p.raw_close[p.cell(i, k)] = px;
        }
    }
    data::compute_daily_returns(p);
    return p;
}

std::set<std::pair<int, int>> cross_edges(const rel::CorrelationGraph& g) {
    std::set<std::pair<int, int>> out;
    for (int i = 0; i < g.n; ++i)
        for (const auto& e : g.neighbors(i))
            if (e.to != i) out.insert({std::min(i, e.to), std::max(i, e.to)});
    return out;
}

} // namespace

TEST_CASE("pearson basic identities", "[relgraph]") {
    std::vector<double> a{1.0, 2.0, 3.5, 2.5, 4.0};
    std::vector<double> neg;
    for (double x : a) neg.push_back(-x);
    CHECK(*rel::pearson(a, a) == Catch::Approx(1.0).margin(1e-14));
    CHECK(*rel::pearson(a, neg) == Catch::Approx(-1.0).margin(1e-14));
}

TEST_CASE("pearson hand example", "[relgraph]") {
    CHECK(*rel::pearson({1, 2, 3, 4}, {2, 1, 4, 3}) == Catch::Approx(0.6).margin(1e-14));
}

TEST_CASE("pearson undefined cases signal no-edge", "[relgraph]") {
    CHECK_FALSE(rel::pearson({1.0}, {2.0}).has_value());
    CHECK_FALSE(rel::pearson({3.0, 3.0, 3.0}, {1.0, 2.0, 3.0}).has_value());
    CHECK_THROWS_AS(rel::pearson({1.0, 2.0}, {1.0}), Error);
}

TEST_CASE("pearson matches the two-pass oracle on random pairs", "[relgraph]") {
    Rng rng(31);
    for (int rep = 0; rep < 100; ++rep) {
        const int len = 2 + static_cast<int>(rng.below(63));
        std::vector<double> a, b;
        for (int i = 0; i < len; ++i) {
            a.push_back(rng.normal());
            b.push_back(rng.normal() + 0.3 * a.back());
        }
        const auto got = rel::pearson(a, b);
        const auto ref = oracles::naive_pearson(a, b);
        REQUIRE(got.has_value() == ref.has_value());
        if (got) CHECK(std::abs(*got - *ref) < 1e-12);
    }
}

TEST_CASE("pearson symmetry and affine invariance", "[relgraph]") {
    Rng rng(32);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> a, b;
        for (int i = 0; i < 16; ++i) {
            a.push_back(rng.normal());
            b.push_back(rng.normal());
        }
        CHECK(*rel::pearson(a, b) == Catch::Approx(*rel::pearson(b, a)).margin(1e-14));
        std::vector<double> scaled;
        for (double x : a) scaled.push_back(2.5 * x + 7.0);
        CHECK(*rel::pearson(scaled, b) == Catch::Approx(*rel::pearson(a, b)).margin(1e-12));
    }
}

TEST_CASE("build_graph keeps identical series and drops orthogonal ones", "[relgraph]") {
    // Stocks 0 and 1 share a return series; stock 2's is exactly orthogonal
    // to it (zero correlation by construction).
    std::vector<double> base{0.01, -0.01, 0.02, -0.02, 0.01, -0.01, 0.02, -0.02};
    std::vector<double> ortho{0.01, 0.01, -0.01, -0.01, 0.01, 0.01, -0.01, -0.01};
    auto p = panel_from_returns({base, base, ortho});
    auto g = rel::build_graph(p, p.t() - 1, 8, 0.8);

    auto edges = cross_edges(g);
    CHECK(edges.count({0, 1}) == 1);
    CHECK(edges.count({0, 2}) == 0);
    CHECK(edges.count({1, 2}) == 0);

    // retained weight is the correlation itself
    for (const auto& e : g.neighbors(0))
        if (e.to == 1) CHECK(e.w == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("build_graph adds weight-1 self-loops everywhere", "[relgraph]") {
    auto p = panel_from_returns({{0.01, -0.02, 0.03}, {0.0, 0.0, 0.0}});
    auto g = rel::build_graph(p, p.t() - 1, 3, 0.8);
    for (int i = 0; i < g.n; ++i) {
        bool self = false;
        for (const auto& e : g.neighbors(i))
            if (e.to == i) {
                self = true;
                CHECK(e.w == 1.0);
            }
        CHECK(self);
    }
    // stock 1 is constant: undefined correlation, no cross edge, no error
    CHECK(cross_edges(g).empty());
}

TEST_CASE("graph symmetry and threshold rule on random panels", "[relgraph]") {
    Rng rng(33);
    for (int rep = 0; rep < 5; ++rep) {
        const int n = 6;
        const int t = 40;
        std::vector<std::vector<double>> rets(static_cast<std::size_t>(n));
        std::vector<double> common;
        for (int k = 0; k < t; ++k) common.push_back(0.01 * rng.normal());
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < t; ++k)
                rets[static_cast<std::size_t>(i)].push_back(common[static_cast<std::size_t>(k)] +
                                                            0.01 * rng.normal());
        auto p = panel_from_returns(rets);
        const double judge = 0.3;
        auto g = rel::build_graph(p, p.t() - 1, t, judge);
        for (int i = 0; i < n; ++i) {
            for (const auto& e : g.neighbors(i)) {
                bool mirrored = false;
                for (const auto& e2 : g.neighbors(e.to))
                    if (e2.to == i && e2.w == e.w) mirrored = true;
                CHECK(mirrored);
                if (e.to != i) CHECK(e.w >= judge);
            }
        }
    }
}

TEST_CASE("raising judge_value never adds an edge", "[relgraph]") {
    Rng rng(34);
    const int n = 5, t = 60;
    std::vector<std::vector<double>> rets(static_cast<std::size_t>(n));
    std::vector<double> common;
    for (int k = 0; k < t; ++k) common.push_back(0.01 * rng.normal());
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < t; ++k)
            rets[static_cast<std::size_t>(i)].push_back(common[static_cast<std::size_t>(k)] +
                                                        0.005 * (i + 1) * rng.normal());
    auto p = panel_from_returns(rets);
    std::set<std::pair<int, int>> prev;
    bool first = true;
    for (double judge : {0.2, 0.5, 0.8, 0.95}) {
        auto edges = cross_edges(rel::build_graph(p, p.t() - 1, t, judge));
        if (!first)
            for (const auto& e : edges) CHECK(prev.count(e) == 1);
        prev = edges;
        first = false;
    }
}

TEST_CASE("absolute mode keeps anticorrelated pairs", "[relgraph]") {
    std::vector<double> base{0.01, -0.01, 0.02, -0.02, 0.015, -0.015};
    std::vector<double> anti;
    for (double r : base) anti.push_back(-r);
    auto p = panel_from_returns({base, anti});
    auto signed_g = rel::build_graph(p, p.t() - 1, 6, 0.8, rel::CorrMode::Signed);
    CHECK(cross_edges(signed_g).empty());
    auto abs_g = rel::build_graph(p, p.t() - 1, 6, 0.8, rel::CorrMode::Absolute);
    CHECK(cross_edges(abs_g).count({0, 1}) == 1);
}

TEST_CASE("build_graph validates the lookback window", "[relgraph]") {
    auto p = panel_from_returns({{0.01, 0.02, 0.01}, {0.02, 0.01, 0.02}});
    CHECK_THROWS_AS(rel::build_graph(p, p.t() - 1, 100, 0.8), ConfigError);
    CHECK_THROWS_AS(rel::build_graph(p, p.t() + 5, 2, 0.8), ConfigError);
}

TEST_CASE("induce keeps self-loops and renumbers", "[relgraph]") {
    std::vector<double> base{0.01, -0.01, 0.02, -0.02, 0.01, -0.01};
    auto p = panel_from_returns({base, base, base, base});
    auto g = rel::build_graph(p, p.t() - 1, 6, 0.8);
    auto sub = g.induce({1, 3});
    CHECK(sub.n == 2);
    auto edges = cross_edges(sub);
    CHECK(edges.count({0, 1}) == 1);
    for (int i = 0; i < 2; ++i) {
        bool self = false;
        for (const auto& e : sub.neighbors(i)) self = self || (e.to == i && e.w == 1.0);
        CHECK(self);
    }
}
