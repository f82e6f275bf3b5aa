// Independent brute-force references used by the test suites. These stay
// deliberately naive (direct formula evaluation, no shared code with the
// library paths they check).
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace oracles {

inline std::vector<double> naive_softmax(const std::vector<double>& x) {
    double sum = 0.0;
    std::vector<double> e(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        e[i] = std::exp(x[i]);
        sum += e[i];
    }
    for (auto& v : e) v /= sum;
    return e;
}

inline std::optional<double> naive_pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    if (n < 2) return std::nullopt;
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) ma += a[i];
    for (std::size_t i = 0; i < n; ++i) mb += b[i];
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < n; ++i) num += (a[i] - ma) * (b[i] - mb);
    for (std::size_t i = 0; i < n; ++i) da += (a[i] - ma) * (a[i] - ma);
    for (std::size_t i = 0; i < n; ++i) db += (b[i] - mb) * (b[i] - mb);
    if (da == 0 || db == 0) return std::nullopt;
    return num / (std::sqrt(da) * std::sqrt(db));
}

inline double naive_arr(const std::vector<double>& rets) {
    double prod = 1.0;
    for (double r : rets) prod *= 1.0 + r;
    return std::pow(prod, 252.0 / static_cast<double>(rets.size())) - 1.0;
}

inline double naive_avol(const std::vector<double>& rets) {
    double mean = 0.0;
    for (double r : rets) mean += r;
    mean /= static_cast<double>(rets.size());
    double ss = 0.0;
    for (double r : rets) ss += (r - mean) * (r - mean);
    return std::sqrt(ss / static_cast<double>(rets.size() - 1)) * std::sqrt(252.0);
}

inline double naive_mdd(const std::vector<double>& path) {
    double worst = 0.0;
    for (std::size_t t = 0; t < path.size(); ++t) {
        double peak = path[0];
        for (std::size_t i = 1; i <= t; ++i) peak = std::max(peak, path[i]);
        worst = std::max(worst, (peak - path[t]) / peak);
    }
    return worst;
}

inline double naive_mean(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return m / static_cast<double>(v.size());
}

inline double naive_sample_std(const std::vector<double>& v) {
    const double m = naive_mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline std::pair<double, double> naive_errors(const std::vector<double>& pred,
                                              const std::vector<double>& label) {
    double mse = 0.0, mae = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        mse += (pred[i] - label[i]) * (pred[i] - label[i]);
        mae += std::abs(pred[i] - label[i]);
    }
    return {mse / static_cast<double>(pred.size()), mae / static_cast<double>(pred.size())};
}

} // namespace oracles
