#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "crossgru/matrix.hpp"
#include "crossgru/rng.hpp"

namespace crossgru::num {

enum class Act { Sigmoid, Tanh, LeakyRelu };

template <typename T>
T sigmoid(T x) {
    // Split on sign so exp never overflows.
    if (x >= 0) {
        const T e = std::exp(-x);
        return T(1) / (T(1) + e);
    }
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
T leaky_relu(T x, T slope) {
    return x >= 0 ? x : slope * x;
}

// Elementwise activation. Rejects non-finite inputs with the offending entry
// named, so upstream bugs surface where the value first goes bad.
template <typename T>
Mat<T> activation(const Mat<T>& m, Act kind, T slope = T(0.2)) {
    require_finite(m, "activation");
    Mat<T> out = m;
    switch (kind) {
        case Act::Sigmoid:
            for (auto& x : out.v) x = sigmoid(x);
            break;
        case Act::Tanh:
            for (auto& x : out.v) x = std::tanh(x);
            break;
        case Act::LeakyRelu:
            for (auto& x : out.v) x = leaky_relu(x, slope);
            break;
    }
    return out;
}

namespace detail {

// Stable softmax of `n` values into `out`; entries with mask[i]==0 get
// exactly zero weight. Returns false if every entry is masked.
template <typename T>
bool softmax_span(const T* in, T* out, int n, const std::uint8_t* mask) {
    T hi = 0;
    bool any = false;
    for (int i = 0; i < n; ++i) {
        if (mask && !mask[i]) continue;
        if (!any || in[i] > hi) hi = in[i];
        any = true;
    }
    if (!any) return false;
    T sum = 0;
    for (int i = 0; i < n; ++i) {
        if (mask && !mask[i]) {
            out[i] = 0;
        } else {
            out[i] = std::exp(in[i] - hi);
            sum += out[i];
        }
    }
    for (int i = 0; i < n; ++i) out[i] /= sum;
    return true;
}

// d(in) for y = softmax(in): dIn_i = y_i * (dY_i - sum_j y_j dY_j).
template <typename T>
void softmax_backward_span(const T* y, const T* dy, T* din, int n) {
    T acc = 0;
    for (int i = 0; i < n; ++i) acc += y[i] * dy[i];
    for (int i = 0; i < n; ++i) din[i] = y[i] * (dy[i] - acc);
}

} // namespace detail

template <typename T>
Mat<T> softmax_rows(const Mat<T>& m) {
    require_finite(m, "softmax_rows");
    Mat<T> out(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i)
        detail::softmax_span(m.row(i), out.row(i), m.cols, nullptr);
    return out;
}

// Masked variant: mask has one byte per entry (row-major, nonzero = keep).
template <typename T>
Mat<T> softmax_rows(const Mat<T>& m, const std::vector<std::uint8_t>& mask) {
    require_finite(m, "softmax_rows");
    if (mask.size() != m.v.size()) throw Error("softmax_rows: mask size mismatch");
    Mat<T> out(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i) {
        if (!detail::softmax_span(m.row(i), out.row(i), m.cols,
                                  mask.data() + static_cast<std::size_t>(i) * m.cols))
            throw Error("softmax_rows: row " + std::to_string(i) + " is fully masked");
    }
    return out;
}

// Trainable tensor: value plus gradient buffer and Adam moments.
template <typename T>
struct Param {
    Mat<T> value;
    Mat<T> grad;
    Mat<T> m;
    Mat<T> v;
    long long step = 0;

    Param() = default;
    explicit Param(Mat<T> init)
        : value(std::move(init)),
          grad(value.rows, value.cols),
          m(value.rows, value.cols),
          v(value.rows, value.cols) {}

    void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
struct ParamRef {
    std::string name;
    Param<T>* p = nullptr;
};

template <typename T>
struct AdamConfig {
    T lr = T(0.0002);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);

    void validate() const {
        if (!(lr > 0)) throw ConfigError("adam: learning rate must be positive");
        if (!(beta1 > 0 && beta1 < 1)) throw ConfigError("adam: beta1 must lie in (0,1)");
        if (!(beta2 > 0 && beta2 < 1)) throw ConfigError("adam: beta2 must lie in (0,1)");
        if (!(eps > 0)) throw ConfigError("adam: eps must be positive");
    }
};

// Bias-corrected Adam update. Consumes and zeroes the gradient buffer.
template <typename T>
void adam_step(Param<T>& p, const AdamConfig<T>& cfg) {
    cfg.validate();
    p.step += 1;
    const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(cfg.beta1), static_cast<double>(p.step)));
    const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(cfg.beta2), static_cast<double>(p.step)));
    for (std::size_t i = 0; i < p.value.v.size(); ++i) {
        const T g = p.grad.v[i];
        p.m.v[i] = cfg.beta1 * p.m.v[i] + (T(1) - cfg.beta1) * g;
        p.v.v[i] = cfg.beta2 * p.v.v[i] + (T(1) - cfg.beta2) * g * g;
        const T mhat = p.m.v[i] / bc1;
        const T vhat = p.v.v[i] / bc2;
        p.value.v[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    p.zero_grad();
}

// Uniform +-sqrt(6 / (fan_in + fan_out)); keeps early attention logits tame.
template <typename T>
Mat<T> xavier_uniform(int rows, int cols, int fan_in, int fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Mat<T> m(rows, cols);
    for (auto& x : m.v) x = static_cast<T>(rng.uniform(-bound, bound));
    return m;
}

} // namespace crossgru::num
