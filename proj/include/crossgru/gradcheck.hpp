#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "crossgru/kernels.hpp"
#include "crossgru/rng.hpp"

namespace crossgru::num {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    long long worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
};

// Central-difference gradient check against the analytic backward pass.
//
// `loss_fn` must be a pure, deterministic function of the current parameter
// values; `backward_fn` must populate every parameter's grad buffer for the
// unperturbed point. Entries are checked exhaustively up to
// `max_entries_per_param`, then by seeded sampling. Only the 64-bit path is
// accepted: float lacks the headroom for step sizes near 1e-4.
template <typename T>
GradCheckResult finite_diff_check(const std::function<double()>& loss_fn,
                                  const std::function<void()>& backward_fn,
                                  const std::vector<ParamRef<T>>& params,
                                  double step,
                                  int max_entries_per_param,
                                  Rng& rng) {
    static_assert(sizeof(T) > 0, "instantiation guard");
    if constexpr (!std::is_same_v<T, double>) {
        throw ConfigError("finite_diff_check requires the 64-bit precision mode");
    } else {
        const double l0 = loss_fn();
        const double l0_again = loss_fn();
        if (std::bit_cast<std::uint64_t>(l0) != std::bit_cast<std::uint64_t>(l0_again)) {
            throw NumericError("finite_diff_check: loss function is not deterministic "
                               "across identical calls");
        }

        for (const auto& pr : params) pr.p->zero_grad();
        backward_fn();

        GradCheckResult res;
        for (const auto& pr : params) {
            Param<T>& p = *pr.p;
            const long long n = static_cast<long long>(p.value.v.size());
            std::vector<long long> indices;
            if (n <= max_entries_per_param) {
                indices.resize(static_cast<std::size_t>(n));
                for (long long i = 0; i < n; ++i) indices[static_cast<std::size_t>(i)] = i;
            } else {
                indices.reserve(static_cast<std::size_t>(max_entries_per_param));
                for (int i = 0; i < max_entries_per_param; ++i)
                    indices.push_back(static_cast<long long>(rng.below(static_cast<std::uint64_t>(n))));
            }
            for (long long idx : indices) {
                const double saved = p.value.v[static_cast<std::size_t>(idx)];
                p.value.v[static_cast<std::size_t>(idx)] = saved + step;
                const double lp = loss_fn();
                p.value.v[static_cast<std::size_t>(idx)] = saved - step;
                const double lm = loss_fn();
                p.value.v[static_cast<std::size_t>(idx)] = saved;

                const double numeric = (lp - lm) / (2.0 * step);
                const double analytic = p.grad.v[static_cast<std::size_t>(idx)];
                const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
                const double rel = std::abs(analytic - numeric) / denom;
                if (rel > res.max_rel_err) {
                    res.max_rel_err = rel;
                    res.worst_param = pr.name;
                    res.worst_index = idx;
                    res.analytic = analytic;
                    res.numeric = numeric;
                }
            }
        }
        return res;
    }
}

} // namespace crossgru::num
