#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "crossgru/common.hpp"
#include "crossgru/dates.hpp"
#include "crossgru/relgraph.hpp"
#include "crossgru/rng.hpp"

namespace crossgru::synth {

// Planted-signal market: next-day returns are a fixed linear function of
// each stock's own lagged signal and its group's lagged average, plus
// noise. The signal is an AR(1) process observable through the volume and
// turnover columns, and group membership is the ground-truth relationship
// graph. Stocks inside a group co-move strongly enough for a correlation
// threshold of 0.8 to recover the groups from a year of returns.
struct SynthConfig {
    int n_stocks = 20;
    int n_days = 600;
    int group_size = 5;
    std::uint64_t seed = 7;
    double rho = 0.9;        // AR(1) persistence of the planted signals
    double group_sd = 1.0;   // shared group-signal scale
    double idio_sd = 0.4;    // per-stock signal scale
    double beta = 0.004;     // loading on the stock's own lagged signal
    double gamma = 0.006;    // loading on the group's lagged average signal
    double noise_sd = 0.002; // unpredictable daily return component
    double vol_coef = 0.35;  // volume = base * exp(vol_coef * signal)
    std::string start_date = "2018-01-02";

    void validate() const {
        if (n_stocks < 2) throw ConfigError("synth: need at least 2 stocks");
        if (n_days < 10) throw ConfigError("synth: need at least 10 days");
        if (group_size < 1) throw ConfigError("synth: group_size must be >= 1");
        if (!(rho > -1.0 && rho < 1.0)) throw ConfigError("synth: rho must lie in (-1,1)");
        if (!dates::valid(start_date)) throw ConfigError("synth: bad start_date");
    }
};

struct SynthMarket {
    std::vector<std::string> tickers;
    std::vector<std::string> dates;
    std::vector<std::vector<int>> groups;
    // n_stocks x n_days, row-major
    std::vector<double> open, high, low, close, volume, turnover;

    int n() const { return static_cast<int>(tickers.size()); }
    int t() const { return static_cast<int>(dates.size()); }
    std::size_t cell(int i, int d) const {
        return static_cast<std::size_t>(i) * dates.size() + static_cast<std::size_t>(d);
    }
};

inline SynthMarket generate(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const int n = cfg.n_stocks, t = cfg.n_days;
    const int n_groups = (n + cfg.group_size - 1) / cfg.group_size;

    SynthMarket mk;
    int width = 1;
    for (int x = n - 1; x >= 10; x /= 10) ++width;
    for (int i = 0; i < n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "S%0*d", width, i);
        mk.tickers.push_back(buf);
    }
    std::string d = cfg.start_date;
    for (int k = 0; k < t; ++k) {
        mk.dates.push_back(d);
        d = dates::next(d);
    }
    mk.groups.resize(static_cast<std::size_t>(n_groups));
    for (int i = 0; i < n; ++i) mk.groups[static_cast<std::size_t>(i / cfg.group_size)].push_back(i);

    // AR(1) driver per group, then per stock, both started from their
    // stationary distributions.
    const double innov = std::sqrt(1.0 - cfg.rho * cfg.rho);
    std::vector<double> group_sig(static_cast<std::size_t>(n_groups) * t);
    for (int g = 0; g < n_groups; ++g) {
        double x = cfg.group_sd * rng.normal();
        for (int k = 0; k < t; ++k) {
            if (k > 0) x = cfg.rho * x + cfg.group_sd * innov * rng.normal();
            group_sig[static_cast<std::size_t>(g) * t + k] = x;
        }
    }
    std::vector<double> signal(static_cast<std::size_t>(n) * t);
    for (int i = 0; i < n; ++i) {
        const int g = i / cfg.group_size;
        double w = cfg.idio_sd * rng.normal();
        for (int k = 0; k < t; ++k) {
            if (k > 0) w = cfg.rho * w + cfg.idio_sd * innov * rng.normal();
            signal[mk.cell(i, k)] = group_sig[static_cast<std::size_t>(g) * t + k] + w;
        }
    }

    std::vector<double> group_mean(static_cast<std::size_t>(n) * t);
    for (int g = 0; g < n_groups; ++g) {
        const auto& members = mk.groups[static_cast<std::size_t>(g)];
        for (int k = 0; k < t; ++k) {
            double acc = 0.0;
            for (int i : members) acc += signal[mk.cell(i, k)];
            acc /= static_cast<double>(members.size());
            for (int i : members) group_mean[mk.cell(i, k)] = acc;
        }
    }

    const auto sz = static_cast<std::size_t>(n) * t;
    mk.open.resize(sz);
    mk.high.resize(sz);
    mk.low.resize(sz);
    mk.close.resize(sz);
    mk.volume.resize(sz);
    mk.turnover.resize(sz);

    for (int i = 0; i < n; ++i) {
        double px = rng.uniform(20.0, 80.0);
        for (int k = 0; k < t; ++k) {
            if (k > 0) {
                const double r = cfg.beta * signal[mk.cell(i, k - 1)] +
                                 cfg.gamma * group_mean[mk.cell(i, k - 1)] +
                                 cfg.noise_sd * rng.normal();
                px *= 1.0 + r;
            }
            const double prev = k > 0 ? mk.close[mk.cell(i, k - 1)] : px;
            const double open = prev * (1.0 + 0.002 * rng.normal());
            const double hi = std::max(open, px) * (1.0 + 0.001 + 0.003 * std::abs(rng.normal()));
            const double lo = std::min(open, px) * (1.0 - 0.001 - 0.003 * std::abs(rng.normal()));
            const double vol = 1.0e6 * std::exp(cfg.vol_coef * signal[mk.cell(i, k)]);
            mk.close[mk.cell(i, k)] = px;
            mk.open[mk.cell(i, k)] = open;
            mk.high[mk.cell(i, k)] = hi;
            mk.low[mk.cell(i, k)] = lo;
            mk.volume[mk.cell(i, k)] = vol;
            mk.turnover[mk.cell(i, k)] = vol * px;
        }
    }
    return mk;
}

// Ground-truth relationship graph: a clique per group, unit weights.
inline rel::CorrelationGraph truth_graph(const SynthMarket& mk) {
    rel::CorrelationGraph g;
    g.n = mk.n();
    g.judge_value = 1.0;
    g.window = {mk.dates.front(), mk.dates.back()};
    g.adjacency.resize(static_cast<std::size_t>(g.n));
    for (const auto& members : mk.groups)
        for (int i : members)
            for (int j : members)
                g.adjacency[static_cast<std::size_t>(i)].push_back({j, 1.0});
    return g;
}

inline void write_csv(const SynthMarket& mk, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("synth: cannot write " + path);
    os << "date,ticker,open,high,low,close,volume,turnover\n";
    char buf[512];
    for (int d = 0; d < mk.t(); ++d) {
        for (int i = 0; i < mk.n(); ++i) {
            std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%.6f,%.6f,%.4f,%.4f\n",
                          mk.dates[static_cast<std::size_t>(d)].c_str(),
                          mk.tickers[static_cast<std::size_t>(i)].c_str(), mk.open[mk.cell(i, d)],
                          mk.high[mk.cell(i, d)], mk.low[mk.cell(i, d)], mk.close[mk.cell(i, d)],
                          mk.volume[mk.cell(i, d)], mk.turnover[mk.cell(i, d)]);
            os << buf;
        }
    }
    if (!os) throw DataError("synth: write failed for " + path);
}

} // namespace crossgru::synth
