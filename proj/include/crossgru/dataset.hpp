#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "crossgru/common.hpp"
#include "crossgru/dates.hpp"
#include "crossgru/matrix.hpp"

namespace crossgru::data {

// Feature order matches the input CSV columns.
enum Feature : int { kOpen = 0, kHigh, kLow, kClose, kVolume, kTurnover };
inline constexpr int kFeatureCount = 6;

enum class Split : std::int8_t { None = -1, Train = 0, Valid = 1, Test = 2 };

struct StockBar {
    std::string ticker;
    std::string date;
    double open = 0, high = 0, low = 0, close = 0;
    double volume = 0, turnover = 0;
};

// Maps logical fields to CSV header names. Defaults match the canonical
// layout: date,ticker,open,high,low,close,volume,turnover.
struct CsvSchema {
    std::string date = "date";
    std::string ticker = "ticker";
    std::string open = "open";
    std::string high = "high";
    std::string low = "low";
    std::string close = "close";
    std::string volume = "volume";
    std::string turnover = "turnover";
};

struct LoadReport {
    long long rows_read = 0;
    long long rows_rejected = 0;
    int tickers = 0;
    std::pair<std::string, std::string> date_range;
};

// Aligned (stock x day x feature) dataset. Immutable once the pipeline
// stages have run; every consumer reads it concurrently without locks.
//
// `features` is normalized in place by preprocess(); prices used for
// returns, labels and trading stay in raw_close/raw_open untouched.
struct Panel {
    std::vector<std::string> tickers; // sorted lexicographically
    std::vector<std::string> dates;   // strictly increasing
    std::vector<double> features;     // N*T*kFeatureCount, row-major
    std::vector<double> raw_close;    // N*T
    std::vector<double> raw_open;     // N*T
    std::vector<double> returns;      // N*T, NaN where undefined
    std::vector<std::uint8_t> valid;  // N*T
    std::vector<Split> split_tag;     // per date
    bool split_assigned = false;
    bool returns_computed = false;
    bool preprocessed = false;

    int n() const { return static_cast<int>(tickers.size()); }
    int t() const { return static_cast<int>(dates.size()); }

    std::size_t cell(int stock, int day) const {
        return static_cast<std::size_t>(stock) * dates.size() + static_cast<std::size_t>(day);
    }
    std::size_t fcell(int stock, int day, int feature) const {
        return (static_cast<std::size_t>(stock) * dates.size() + static_cast<std::size_t>(day)) * kFeatureCount +
               static_cast<std::size_t>(feature);
    }
    bool is_valid(int stock, int day) const { return valid[cell(stock, day)] != 0; }
    double feature_at(int stock, int day, int f) const { return features[fcell(stock, day, f)]; }
    double close_at(int stock, int day) const { return raw_close[cell(stock, day)]; }
    double return_at(int stock, int day) const { return returns[cell(stock, day)]; }
    bool return_defined(int stock, int day) const { return !std::isnan(returns[cell(stock, day)]); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stod(s, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == s.size() && std::isfinite(out);
}

} // namespace detail

// Reads per-stock daily bars from CSV. Rows with non-positive prices,
// negative volume/turnover, bad dates or unparseable numbers are rejected
// and counted; duplicate (ticker,date) pairs are a hard error. Stocks
// missing a date get valid=false there, except interior gaps of at most
// `max_ffill` days, which are bridged by carrying the last close forward
// (volume and turnover go to zero) so return continuity survives short
// suspensions.
inline std::pair<Panel, LoadReport> load_panel(const std::string& path,
                                               const CsvSchema& schema = CsvSchema{},
                                               int max_ffill = 5) {
    std::ifstream in(path);
    if (!in) throw DataError("load_panel: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError("load_panel: empty file " + path);
    const auto header = detail::split_csv_line(line);

    auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw DataError("load_panel: missing column '" + name + "' in " + path);
    };
    const int c_date = col(schema.date), c_ticker = col(schema.ticker);
    const int c_open = col(schema.open), c_high = col(schema.high), c_low = col(schema.low);
    const int c_close = col(schema.close), c_volume = col(schema.volume), c_turnover = col(schema.turnover);
    const std::size_t min_cols = static_cast<std::size_t>(
        std::max({c_date, c_ticker, c_open, c_high, c_low, c_close, c_volume, c_turnover}) + 1);

    LoadReport report;
    std::map<std::pair<std::string, std::string>, StockBar> bars;
    std::vector<std::string> duplicates;
    std::set<std::string> tickers, dateset;

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++report.rows_read;
        const auto f = detail::split_csv_line(line);
        StockBar bar;
        bool ok = f.size() >= min_cols;
        if (ok) {
            bar.date = f[static_cast<std::size_t>(c_date)];
            bar.ticker = f[static_cast<std::size_t>(c_ticker)];
            ok = dates::valid(bar.date) && !bar.ticker.empty() &&
                 detail::parse_double(f[static_cast<std::size_t>(c_open)], bar.open) &&
                 detail::parse_double(f[static_cast<std::size_t>(c_high)], bar.high) &&
                 detail::parse_double(f[static_cast<std::size_t>(c_low)], bar.low) &&
                 detail::parse_double(f[static_cast<std::size_t>(c_close)], bar.close) &&
                 detail::parse_double(f[static_cast<std::size_t>(c_volume)], bar.volume) &&
                 detail::parse_double(f[static_cast<std::size_t>(c_turnover)], bar.turnover);
        }
        if (ok) ok = bar.open > 0 && bar.high > 0 && bar.low > 0 && bar.close > 0 &&
                     bar.volume >= 0 && bar.turnover >= 0;
        if (!ok) {
            ++report.rows_rejected;
            continue;
        }
        auto key = std::make_pair(bar.ticker, bar.date);
        if (!bars.emplace(key, bar).second) {
            duplicates.push_back(bar.ticker + "@" + bar.date);
            continue;
        }
        tickers.insert(bar.ticker);
        dateset.insert(bar.date);
    }
    if (!duplicates.empty()) {
        std::string msg = "load_panel: duplicate (ticker,date) rows:";
        for (const auto& d : duplicates) msg += " " + d;
        throw DataError(msg);
    }
    if (bars.empty()) throw DataError("load_panel: no usable rows in " + path);

    Panel p;
    p.tickers.assign(tickers.begin(), tickers.end());
    p.dates.assign(dateset.begin(), dateset.end());
    const int n = p.n(), t = p.t();
    p.features.assign(static_cast<std::size_t>(n) * t * kFeatureCount, 0.0);
    p.raw_close.assign(static_cast<std::size_t>(n) * t, 0.0);
    p.raw_open.assign(static_cast<std::size_t>(n) * t, 0.0);
    p.returns.assign(static_cast<std::size_t>(n) * t, std::nan(""));
    p.valid.assign(static_cast<std::size_t>(n) * t, 0);
    p.split_tag.assign(static_cast<std::size_t>(t), Split::None);

    std::map<std::string, int> date_idx;
    for (int d = 0; d < t; ++d) date_idx[p.dates[static_cast<std::size_t>(d)]] = d;
    for (int i = 0; i < n; ++i) {
        const std::string& tk = p.tickers[static_cast<std::size_t>(i)];
        for (int d = 0; d < t; ++d) {
            auto it = bars.find({tk, p.dates[static_cast<std::size_t>(d)]});
            if (it == bars.end()) continue;
            const StockBar& b = it->second;
            p.valid[p.cell(i, d)] = 1;
            p.raw_close[p.cell(i, d)] = b.close;
            p.raw_open[p.cell(i, d)] = b.open;
            p.features[p.fcell(i, d, kOpen)] = b.open;
            p.features[p.fcell(i, d, kHigh)] = b.high;
            p.features[p.fcell(i, d, kLow)] = b.low;
            p.features[p.fcell(i, d, kClose)] = b.close;
            p.features[p.fcell(i, d, kVolume)] = b.volume;
            p.features[p.fcell(i, d, kTurnover)] = b.turnover;
        }
    }

    // Bridge short interior gaps with the last observed close.
    for (int i = 0; i < n; ++i) {
        int first = -1, last = -1;
        for (int d = 0; d < t; ++d)
            if (p.is_valid(i, d)) {
                if (first < 0) first = d;
                last = d;
            }
        if (first < 0) continue;
        int d = first + 1;
        while (d < last) {
            if (p.is_valid(i, d)) {
                ++d;
                continue;
            }
            int end = d;
            while (end < last && !p.is_valid(i, end)) ++end;
            const int gap = end - d;
            if (gap <= max_ffill) {
                const double prev_close = p.close_at(i, d - 1);
                for (int g = d; g < end; ++g) {
                    p.valid[p.cell(i, g)] = 1;
                    p.raw_close[p.cell(i, g)] = prev_close;
                    p.raw_open[p.cell(i, g)] = prev_close;
                    p.features[p.fcell(i, g, kOpen)] = prev_close;
                    p.features[p.fcell(i, g, kHigh)] = prev_close;
                    p.features[p.fcell(i, g, kLow)] = prev_close;
                    p.features[p.fcell(i, g, kClose)] = prev_close;
                    p.features[p.fcell(i, g, kVolume)] = 0.0;
                    p.features[p.fcell(i, g, kTurnover)] = 0.0;
                }
            }
            d = end;
        }
    }

    report.tickers = n;
    report.date_range = {p.dates.front(), p.dates.back()};
    return {std::move(p), report};
}

struct DateRange {
    std::string start;
    std::string end; // inclusive
};

struct SplitRanges {
    DateRange train, valid, test;
};

// Tags every date with its split and drops dates outside all three ranges.
// Ranges must be ordered train < valid < test without overlap.
inline Panel split_by_date(const Panel& panel, const SplitRanges& ranges) {
    for (const DateRange* r : {&ranges.train, &ranges.valid, &ranges.test}) {
        if (!dates::valid(r->start) || !dates::valid(r->end))
            throw ConfigError("split_by_date: malformed date in split ranges");
        if (r->end < r->start) throw ConfigError("split_by_date: range end precedes start");
    }
    if (!(ranges.train.end < ranges.valid.start && ranges.valid.end < ranges.test.start))
        throw ConfigError("split_by_date: ranges must be ordered train < valid < test without overlap");

    std::vector<int> keep;
    std::vector<Split> tags;
    for (int d = 0; d < panel.t(); ++d) {
        const std::string& date = panel.dates[static_cast<std::size_t>(d)];
        Split tag = Split::None;
        if (date >= ranges.train.start && date <= ranges.train.end) tag = Split::Train;
        else if (date >= ranges.valid.start && date <= ranges.valid.end) tag = Split::Valid;
        else if (date >= ranges.test.start && date <= ranges.test.end) tag = Split::Test;
        if (tag == Split::None) continue;
        keep.push_back(d);
        tags.push_back(tag);
    }
    if (keep.empty()) throw ConfigError("split_by_date: no panel dates fall inside the split ranges");

    Panel out;
    out.tickers = panel.tickers;
    out.dates.reserve(keep.size());
    for (int d : keep) out.dates.push_back(panel.dates[static_cast<std::size_t>(d)]);
    const int n = panel.n();
    const int t = static_cast<int>(keep.size());
    out.features.assign(static_cast<std::size_t>(n) * t * kFeatureCount, 0.0);
    out.raw_close.assign(static_cast<std::size_t>(n) * t, 0.0);
    out.raw_open.assign(static_cast<std::size_t>(n) * t, 0.0);
    out.returns.assign(static_cast<std::size_t>(n) * t, std::nan(""));
    out.valid.assign(static_cast<std::size_t>(n) * t, 0);
    out.split_tag = tags;
    for (int i = 0; i < n; ++i) {
        for (int dd = 0; dd < t; ++dd) {
            const int src = keep[static_cast<std::size_t>(dd)];
            out.raw_close[out.cell(i, dd)] = panel.raw_close[panel.cell(i, src)];
            out.raw_open[out.cell(i, dd)] = panel.raw_open[panel.cell(i, src)];
            out.valid[out.cell(i, dd)] = panel.valid[panel.cell(i, src)];
            for (int f = 0; f < kFeatureCount; ++f)
                out.features[out.fcell(i, dd, f)] = panel.features[panel.fcell(i, src, f)];
        }
    }
    out.split_assigned = true;
    return out;
}

// Simple close-to-close returns on consecutive valid days.
inline void compute_daily_returns(Panel& panel) {
    for (int i = 0; i < panel.n(); ++i) {
        for (int d = 1; d < panel.t(); ++d) {
            if (panel.is_valid(i, d) && panel.is_valid(i, d - 1)) {
                const double prev = panel.close_at(i, d - 1);
                panel.returns[panel.cell(i, d)] = (panel.close_at(i, d) - prev) / prev;
            }
        }
    }
    panel.returns_computed = true;
}

namespace detail {

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace detail

// Per stock, per feature: clip to median +- mad_clip * MAD, then z-score.
// Every statistic comes from days tagged `stats_split` only, so nothing
// from validation or test days can leak into the transform. Stocks with
// fewer than `min_stat_days` valid stats-split days are dropped from the
// universe with a warning. Zero-spread features map to all zeros.
inline Panel preprocess(const Panel& panel, double mad_clip, Split stats_split = Split::Train,
                        int min_stat_days = 20) {
    if (!panel.split_assigned) throw ConfigError("preprocess: split tags not assigned");
    if (panel.preprocessed) throw ConfigError("preprocess: panel already preprocessed");
    if (!(mad_clip > 0)) throw ConfigError("preprocess: mad_clip must be positive");

    std::vector<int> stat_days;
    for (int d = 0; d < panel.t(); ++d)
        if (panel.split_tag[static_cast<std::size_t>(d)] == stats_split) stat_days.push_back(d);

    std::vector<int> kept;
    for (int i = 0; i < panel.n(); ++i) {
        int count = 0;
        for (int d : stat_days) count += panel.is_valid(i, d) ? 1 : 0;
        if (count >= min_stat_days) {
            kept.push_back(i);
        } else {
            warn("preprocess: dropping " + panel.tickers[static_cast<std::size_t>(i)] + " (" +
                 std::to_string(count) + " valid stats days, need " + std::to_string(min_stat_days) + ")");
        }
    }
    if (kept.empty()) throw DataError("preprocess: no stock has enough stats-split history");

    Panel out;
    out.dates = panel.dates;
    out.split_tag = panel.split_tag;
    out.split_assigned = true;
    out.returns_computed = panel.returns_computed;
    const int t = panel.t();
    const int n = static_cast<int>(kept.size());
    out.tickers.reserve(kept.size());
    for (int i : kept) out.tickers.push_back(panel.tickers[static_cast<std::size_t>(i)]);
    out.features.assign(static_cast<std::size_t>(n) * t * kFeatureCount, 0.0);
    out.raw_close.assign(static_cast<std::size_t>(n) * t, 0.0);
    out.raw_open.assign(static_cast<std::size_t>(n) * t, 0.0);
    out.returns.assign(static_cast<std::size_t>(n) * t, std::nan(""));
    out.valid.assign(static_cast<std::size_t>(n) * t, 0);

    for (int row = 0; row < n; ++row) {
        const int src = kept[static_cast<std::size_t>(row)];
        for (int d = 0; d < t; ++d) {
            out.raw_close[out.cell(row, d)] = panel.raw_close[panel.cell(src, d)];
            out.raw_open[out.cell(row, d)] = panel.raw_open[panel.cell(src, d)];
            out.returns[out.cell(row, d)] = panel.returns[panel.cell(src, d)];
            out.valid[out.cell(row, d)] = panel.valid[panel.cell(src, d)];
            for (int f = 0; f < kFeatureCount; ++f)
                out.features[out.fcell(row, d, f)] = panel.features[panel.fcell(src, d, f)];
        }
    }

    for (int row = 0; row < n; ++row) {
        for (int f = 0; f < kFeatureCount; ++f) {
            std::vector<double> train_vals;
            train_vals.reserve(stat_days.size());
            for (int d : stat_days)
                if (out.is_valid(row, d)) train_vals.push_back(out.feature_at(row, d, f));

            const double med = detail::median_of(train_vals);
            std::vector<double> dev;
            dev.reserve(train_vals.size());
            for (double x : train_vals) dev.push_back(std::abs(x - med));
            const double mad = detail::median_of(dev);
            const double lo = med - mad_clip * mad;
            const double hi = med + mad_clip * mad;

            auto clip = [&](double x) { return std::min(std::max(x, lo), hi); };

            double mean = 0.0;
            for (double x : train_vals) mean += clip(x);
            mean /= static_cast<double>(train_vals.size());
            double ss = 0.0;
            for (double x : train_vals) {
                const double dx = clip(x) - mean;
                ss += dx * dx;
            }
            const double stdev = train_vals.size() > 1
                                     ? std::sqrt(ss / static_cast<double>(train_vals.size() - 1))
                                     : 0.0;

            for (int d = 0; d < t; ++d) {
                if (!out.is_valid(row, d)) continue;
                auto& cellv = out.features[out.fcell(row, d, f)];
                cellv = stdev > 0.0 ? (clip(cellv) - mean) / stdev : 0.0;
            }
        }
    }
    out.preprocessed = true;
    return out;
}

// One anchor day's worth of model input, compacted to the stocks that are
// fully observable over the window and at the label horizon.
struct Sample {
    int day = 0;                  // panel date index of the anchor
    Split split = Split::None;
    std::vector<int> stocks;      // panel stock indices, ascending
    std::vector<num::Mat<double>> window; // his_t matrices of m x kFeatureCount
    num::Mat<double> day_features;        // m x kFeatureCount (anchor day)
    std::vector<double> labels;           // forward return over label_t days
};

// Enumerates every eligible anchor day. An anchor t needs its his_t-day
// input window and label_t-day horizon inside one split; a stock joins the
// sample if it is valid on every window day and on the label day. Windows
// never overlap their own label horizon.
inline std::vector<Sample> build_windows(const Panel& panel, int his_t, int label_t) {
    if (his_t < 1) throw ConfigError("build_windows: his_t must be >= 1");
    if (label_t < 1) throw ConfigError("build_windows: label_t must be >= 1");
    if (!panel.split_assigned) throw ConfigError("build_windows: split tags not assigned");

    std::vector<Sample> out;
    const int t = panel.t();
    for (int anchor = his_t - 1; anchor + label_t < t; ++anchor) {
        const Split tag = panel.split_tag[static_cast<std::size_t>(anchor)];
        if (tag == Split::None) continue;
        bool same_split = true;
        for (int d = anchor - his_t + 1; d <= anchor + label_t && same_split; ++d)
            same_split = panel.split_tag[static_cast<std::size_t>(d)] == tag;
        if (!same_split) continue;

        std::vector<int> stocks;
        for (int i = 0; i < panel.n(); ++i) {
            bool ok = panel.is_valid(i, anchor + label_t);
            for (int d = anchor - his_t + 1; d <= anchor && ok; ++d) ok = panel.is_valid(i, d);
            if (ok) stocks.push_back(i);
        }
        if (stocks.empty()) continue;

        Sample s;
        s.day = anchor;
        s.split = tag;
        s.stocks = stocks;
        const int m = static_cast<int>(stocks.size());
        s.window.reserve(static_cast<std::size_t>(his_t));
        for (int d = anchor - his_t + 1; d <= anchor; ++d) {
            num::Mat<double> step(m, kFeatureCount);
            for (int r = 0; r < m; ++r)
                for (int f = 0; f < kFeatureCount; ++f)
                    step(r, f) = panel.feature_at(stocks[static_cast<std::size_t>(r)], d, f);
            s.window.push_back(std::move(step));
        }
        s.day_features = s.window.back();
        s.labels.resize(static_cast<std::size_t>(m));
        for (int r = 0; r < m; ++r) {
            const int i = stocks[static_cast<std::size_t>(r)];
            const double c0 = panel.close_at(i, anchor);
            const double c1 = panel.close_at(i, anchor + label_t);
            s.labels[static_cast<std::size_t>(r)] = (c1 - c0) / c0;
        }
        out.push_back(std::move(s));
    }
    if (out.empty())
        warn("build_windows: no eligible anchors (his_t=" + std::to_string(his_t) +
             ", label_t=" + std::to_string(label_t) + ")");
    return out;
}

inline std::vector<const Sample*> samples_for_split(const std::vector<Sample>& all, Split tag) {
    std::vector<const Sample*> out;
    for (const auto& s : all)
        if (s.split == tag) out.push_back(&s);
    return out;
}

} // namespace crossgru::data
