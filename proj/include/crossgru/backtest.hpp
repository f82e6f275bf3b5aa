#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "crossgru/common.hpp"
#include "crossgru/dataset.hpp"

namespace crossgru::bt {

// Portfolio value path compounded from daily strategy returns. The path
// starts at 1.0 immediately before the first row, so values[t] =
// values[t-1] * (1 + rets[t]) with values[-1] == 1.
struct EquityCurve {
    std::vector<std::string> dates;
    std::vector<double> rets;
    std::vector<double> values;

    static EquityCurve from_returns(std::vector<std::string> dates, std::vector<double> rets) {
        EquityCurve c;
        c.dates = std::move(dates);
        c.rets = std::move(rets);
        c.values.reserve(c.rets.size());
        double p = 1.0;
        for (double r : c.rets) {
            p *= 1.0 + r;
            c.values.push_back(p);
        }
        return c;
    }

    std::size_t size() const { return rets.size(); }
};

// Annualized rate of return: (prod(1+r))^(252/T) - 1.
inline double metric_arr(const EquityCurve& curve) {
    if (curve.size() < 1) throw Error("metric_arr: empty curve");
    double prod = 1.0;
    for (double r : curve.rets) {
        if (r <= -1.0) throw NumericError("metric_arr: daily return <= -100% (bankrupt path)");
        prod *= 1.0 + r;
    }
    return std::pow(prod, static_cast<double>(kTradingDaysPerYear) / static_cast<double>(curve.size())) - 1.0;
}

// Annualized volatility: sample standard deviation of daily returns * sqrt(252).
inline double metric_avol(const EquityCurve& curve) {
    const std::size_t t = curve.size();
    if (t < 2) throw Error("metric_avol: need at least two daily returns");
    double mean = 0.0;
    for (double r : curve.rets) mean += r;
    mean /= static_cast<double>(t);
    double ss = 0.0;
    for (double r : curve.rets) ss += (r - mean) * (r - mean);
    return std::sqrt(ss / static_cast<double>(t - 1)) * std::sqrt(static_cast<double>(kTradingDaysPerYear));
}

// Maximum peak-to-trough decline of a positive price path, as a fraction of
// the peak. Zero iff the path never dips below its running maximum.
inline double metric_mdd(const std::vector<double>& values) {
    if (values.empty()) throw Error("metric_mdd: empty path");
    double peak = 0.0;
    double worst = 0.0;
    for (double p : values) {
        if (!(p > 0.0)) throw NumericError("metric_mdd: non-positive portfolio value");
        peak = std::max(peak, p);
        worst = std::max(worst, (peak - p) / peak);
    }
    return worst;
}

// MDD of an equity curve, including the implicit starting value of 1.
inline double metric_mdd(const EquityCurve& curve) {
    std::vector<double> path;
    path.reserve(curve.values.size() + 1);
    path.push_back(1.0);
    path.insert(path.end(), curve.values.begin(), curve.values.end());
    return metric_mdd(path);
}

struct RatioMetrics {
    std::optional<double> asr; // ARR / AVoL
    std::optional<double> cr;  // ARR / |MDD|
    std::optional<double> ir;  // mean daily excess over benchmark / its std
};

// Risk-adjusted ratios. Undefined denominators yield nullopt (rendered as
// JSON null), never infinity. IR pairs curve and benchmark days by date.
inline RatioMetrics metric_ratios(double arr, double avol, double mdd, const EquityCurve& curve,
                                  const EquityCurve& benchmark) {
    RatioMetrics out;
    if (avol > 0.0) out.asr = arr / avol;
    if (mdd > 0.0) out.cr = arr / std::abs(mdd);

    std::vector<double> excess;
    std::size_t bi = 0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        while (bi < benchmark.size() && benchmark.dates[bi] < curve.dates[i]) ++bi;
        if (bi < benchmark.size() && benchmark.dates[bi] == curve.dates[i])
            excess.push_back(curve.rets[i] - benchmark.rets[bi]);
    }
    if (excess.size() >= 2) {
        double mean = 0.0;
        for (double e : excess) mean += e;
        mean /= static_cast<double>(excess.size());
        double ss = 0.0;
        for (double e : excess) ss += (e - mean) * (e - mean);
        const double sd = std::sqrt(ss / static_cast<double>(excess.size() - 1));
        if (sd > 0.0) out.ir = mean / sd;
    }
    return out;
}

// Prediction error pair over aligned (date,ticker) observations.
inline std::pair<double, double> metric_errors(const std::vector<double>& predictions,
                                               const std::vector<double>& labels) {
    if (predictions.size() != labels.size()) throw Error("metric_errors: length mismatch");
    if (predictions.empty()) throw Error("metric_errors: empty intersection");
    double mse = 0.0, mae = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - labels[i];
        mse += d * d;
        mae += std::abs(d);
    }
    const double n = static_cast<double>(predictions.size());
    return {mse / n, mae / n};
}

// Model scores for a set of anchor days, keyed by panel indices. Labels are
// carried along when known so the error metrics can reuse the same rows.
struct ScoreTable {
    struct Day {
        int day = 0;
        std::vector<int> stocks;    // ascending panel stock indices
        std::vector<double> scores; // aligned with stocks
        std::vector<double> labels; // empty when unknown
    };
    std::vector<Day> days; // ascending by day
};

enum class ReturnTiming { CloseToClose, OpenToOpen };

namespace detail {

// Realized holding-period return for a score issued at the close of `day`:
// close(day)->close(day+1), or open(day+1)->open(day+2) for open execution.
inline std::optional<double> realized_return(const data::Panel& panel, int stock, int day,
                                             ReturnTiming timing) {
    if (timing == ReturnTiming::CloseToClose) {
        if (day + 1 >= panel.t() || !panel.is_valid(stock, day) || !panel.is_valid(stock, day + 1))
            return std::nullopt;
        const double c0 = panel.close_at(stock, day);
        return (panel.close_at(stock, day + 1) - c0) / c0;
    }
    if (day + 2 >= panel.t() || !panel.is_valid(stock, day + 1) || !panel.is_valid(stock, day + 2))
        return std::nullopt;
    const double o0 = panel.raw_open[panel.cell(stock, day + 1)];
    return (panel.raw_open[panel.cell(stock, day + 2)] - o0) / o0;
}

} // namespace detail

// Daily top-k strategy: at each scored day select the k best-scored stocks
// (ties broken by ticker order), hold them equal-weighted for the next
// return period, zero transaction costs. With equal weights and no costs,
// re-forming the basket daily is numerically identical to letting repeat
// names ride. k = number of stocks reproduces the equal-weighted benchmark
// exactly, because selected returns are summed in ticker order either way.
inline EquityCurve simulate_topk(const ScoreTable& scores, const data::Panel& panel, int k,
                                 ReturnTiming timing = ReturnTiming::CloseToClose) {
    if (k < 1) throw ConfigError("simulate_topk: k must be >= 1");
    std::vector<std::string> dates;
    std::vector<double> rets;
    int short_days = 0;

    for (const auto& day : scores.days) {
        struct Cand {
            int stock;
            double score;
            double ret;
        };
        std::vector<Cand> cands;
        for (std::size_t i = 0; i < day.stocks.size(); ++i) {
            const auto r = detail::realized_return(panel, day.stocks[i], day.day, timing);
            if (r) cands.push_back({day.stocks[i], day.scores[i], *r});
        }
        if (cands.empty()) continue;
        if (static_cast<int>(cands.size()) < k) ++short_days;

        const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), cands.size());
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.stock < b.stock;
        });
        cands.resize(take);
        std::sort(cands.begin(), cands.end(),
                  [](const Cand& a, const Cand& b) { return a.stock < b.stock; });

        double acc = 0.0;
        for (const auto& c : cands) acc += c.ret;
        rets.push_back(acc / static_cast<double>(take));
        const int realization = timing == ReturnTiming::CloseToClose ? day.day + 1 : day.day + 2;
        dates.push_back(panel.dates[static_cast<std::size_t>(realization)]);
    }
    if (short_days > 0)
        warn("simulate_topk: " + std::to_string(short_days) + " day(s) had fewer than k=" +
             std::to_string(k) + " scorable tickers; used all available");
    return EquityCurve::from_returns(std::move(dates), std::move(rets));
}

// Equal-weighted benchmark over the scored universe = top-k with k
// unbounded.
inline EquityCurve simulate_benchmark(const ScoreTable& scores, const data::Panel& panel,
                                      ReturnTiming timing = ReturnTiming::CloseToClose) {
    int max_k = 1;
    for (const auto& d : scores.days) max_k = std::max(max_k, static_cast<int>(d.stocks.size()));
    return simulate_topk(scores, panel, max_k, timing);
}

// Full evaluation artifact: the six strategy metrics plus prediction
// errors. MDD is held positive here and rendered negative in reports.
struct Report {
    int k = 0;
    double arr = 0.0;
    double avol = 0.0;
    double mdd = 0.0;
    std::optional<double> asr, cr, ir;
    double mse = 0.0;
    double mae = 0.0;
    EquityCurve curve;
    EquityCurve benchmark;
    std::string ablation;
};

inline Report evaluate(const ScoreTable& scores, const data::Panel& panel, int k,
                       ReturnTiming timing = ReturnTiming::CloseToClose) {
    Report rep;
    rep.k = k;
    rep.curve = simulate_topk(scores, panel, k, timing);
    rep.benchmark = simulate_benchmark(scores, panel, timing);
    if (rep.curve.size() == 0) throw DataError("evaluate: no tradable scored days");
    rep.arr = metric_arr(rep.curve);
    rep.avol = rep.curve.size() >= 2 ? metric_avol(rep.curve) : 0.0;
    rep.mdd = metric_mdd(rep.curve);
    const RatioMetrics ratios = metric_ratios(rep.arr, rep.avol, rep.mdd, rep.curve, rep.benchmark);
    rep.asr = ratios.asr;
    rep.cr = ratios.cr;
    rep.ir = ratios.ir;

    std::vector<double> preds, labels;
    for (const auto& day : scores.days) {
        if (day.labels.size() != day.stocks.size()) continue;
        for (std::size_t i = 0; i < day.stocks.size(); ++i) {
            preds.push_back(day.scores[i]);
            labels.push_back(day.labels[i]);
        }
    }
    if (!preds.empty()) {
        const auto [mse, mae] = metric_errors(preds, labels);
        rep.mse = mse;
        rep.mae = mae;
    }
    return rep;
}

} // namespace crossgru::bt
