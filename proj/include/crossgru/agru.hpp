#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "crossgru/kernels.hpp"
#include "crossgru/matrix.hpp"

namespace crossgru::agru {

using num::Act;
using num::Mat;
using num::Param;
using num::ParamRef;

enum class GruMode { Improved, Classic };

// Improved mode replaces the reset gate with scaled dot-product attention:
// the previous hidden state queries the window inputs seen so far. Scope
// selects the key/value set: the whole window up to the current step, or
// the current step alone (which collapses the softmax to a singleton).
enum class AttnScope { Window, Current };

// One recurrent layer. Query/key/value dims all equal the hidden dim, which
// the candidate update r' .* (U_h h) requires anyway.
template <typename T>
struct AgruLayer {
    int in_dim = 0;
    int hidden = 0;
    GruMode mode = GruMode::Improved;

    Param<T> W_z, U_z, b_z;
    Param<T> W_h, U_h, b_h;
    Param<T> W_q, W_k, W_v; // improved
    Param<T> W_r, U_r, b_r; // classic

    AgruLayer() = default;
    AgruLayer(int in, int h, GruMode m, Rng& rng) : in_dim(in), hidden(h), mode(m) {
        W_z = Param<T>(num::xavier_uniform<T>(h, in, in, h, rng));
        U_z = Param<T>(num::xavier_uniform<T>(h, h, h, h, rng));
        b_z = Param<T>(Mat<T>(1, h));
        W_h = Param<T>(num::xavier_uniform<T>(h, in, in, h, rng));
        U_h = Param<T>(num::xavier_uniform<T>(h, h, h, h, rng));
        b_h = Param<T>(Mat<T>(1, h));
        if (mode == GruMode::Improved) {
            W_q = Param<T>(num::xavier_uniform<T>(h, h, h, h, rng));
            W_k = Param<T>(num::xavier_uniform<T>(h, in, in, h, rng));
            W_v = Param<T>(num::xavier_uniform<T>(h, in, in, h, rng));
        } else {
            W_r = Param<T>(num::xavier_uniform<T>(h, in, in, h, rng));
            U_r = Param<T>(num::xavier_uniform<T>(h, h, h, h, rng));
            b_r = Param<T>(Mat<T>(1, h));
        }
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".W_z", &W_z});
        out.push_back({prefix + ".U_z", &U_z});
        out.push_back({prefix + ".b_z", &b_z});
        out.push_back({prefix + ".W_h", &W_h});
        out.push_back({prefix + ".U_h", &U_h});
        out.push_back({prefix + ".b_h", &b_h});
        if (mode == GruMode::Improved) {
            out.push_back({prefix + ".W_q", &W_q});
            out.push_back({prefix + ".W_k", &W_k});
            out.push_back({prefix + ".W_v", &W_v});
        } else {
            out.push_back({prefix + ".W_r", &W_r});
            out.push_back({prefix + ".U_r", &U_r});
            out.push_back({prefix + ".b_r", &b_r});
        }
    }
};

// Everything backward needs, per step: hidden states, gate and candidate
// activations, the attention pieces. alpha[t] holds one attention
// distribution per stock row (width = steps attended at t).
template <typename T>
struct AgruLayerTrace {
    std::vector<Mat<T>> h;
    std::vector<Mat<T>> zg;    // update gate, post-sigmoid
    std::vector<Mat<T>> hc;    // candidate, post-tanh
    std::vector<Mat<T>> rp;    // improved: r'_t; classic: reset gate post-sigmoid
    std::vector<Mat<T>> uhh;   // H_{t-1} U_h^T
    std::vector<Mat<T>> q;     // improved
    std::vector<Mat<T>> alpha; // improved, N x width(t)
    std::vector<Mat<T>> k, v;  // improved, per input step
};

namespace detail {

// Attention over cached keys/values for steps [lo, t]. Returns r' and the
// per-row weights.
template <typename T>
std::pair<Mat<T>, Mat<T>> attend(const Mat<T>& q, const std::vector<Mat<T>>& k,
                                 const std::vector<Mat<T>>& v, int lo, int t, int hidden) {
    const int n = q.rows;
    const int width = t - lo + 1;
    const T scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(hidden)));
    Mat<T> logits(n, width);
    for (int i = 0; i < n; ++i)
        for (int s = lo; s <= t; ++s)
            logits(i, s - lo) = num::dot_rows(q, i, k[static_cast<std::size_t>(s)], i) * scale;
    Mat<T> alpha(n, width);
    for (int i = 0; i < n; ++i)
        num::detail::softmax_span(logits.row(i), alpha.row(i), width, nullptr);
    Mat<T> rp(n, hidden);
    for (int i = 0; i < n; ++i) {
        T* out = rp.row(i);
        for (int s = lo; s <= t; ++s) {
            const T a = alpha(i, s - lo);
            const T* vs = v[static_cast<std::size_t>(s)].row(i);
            for (int c = 0; c < hidden; ++c) out[c] += a * vs[c];
        }
    }
    return {std::move(rp), std::move(alpha)};
}

} // namespace detail

// Convenience single-step form of the attention reset: h_prev queries the
// inputs x_1..x_t. Used directly by tests; forward() uses the cached-K/V
// path that computes the same thing.
template <typename T>
std::pair<Mat<T>, Mat<T>> attn_reset(const AgruLayer<T>& layer, const Mat<T>& h_prev,
                                     const std::vector<Mat<T>>& inputs) {
    if (inputs.empty()) throw Error("attn_reset: needs at least one input step");
    std::vector<Mat<T>> k, v;
    for (const auto& x : inputs) {
        k.push_back(num::matmul_nt(x, layer.W_k.value));
        v.push_back(num::matmul_nt(x, layer.W_v.value));
    }
    Mat<T> q = num::matmul_nt(h_prev, layer.W_q.value);
    return detail::attend(q, k, v, 0, static_cast<int>(inputs.size()) - 1, layer.hidden);
}

// Runs the recurrence over `inputs` (one N x in_dim matrix per step, stocks
// as rows) from h_0 = 0. Row independence is structural: every operation is
// row-wise or a per-row reduction.
template <typename T>
AgruLayerTrace<T> layer_forward(const AgruLayer<T>& layer, const std::vector<Mat<T>>& inputs,
                                AttnScope scope) {
    const int steps = static_cast<int>(inputs.size());
    if (steps == 0) throw Error("agru: empty input sequence");
    const int n = inputs[0].rows;
    const int h = layer.hidden;

    AgruLayerTrace<T> tr;
    tr.h.reserve(static_cast<std::size_t>(steps));
    if (layer.mode == GruMode::Improved) {
        for (const auto& x : inputs) {
            tr.k.push_back(num::matmul_nt(x, layer.W_k.value));
            tr.v.push_back(num::matmul_nt(x, layer.W_v.value));
        }
    }

    Mat<T> hprev(n, h);
    for (int t = 0; t < steps; ++t) {
        const Mat<T>& x = inputs[static_cast<std::size_t>(t)];

        Mat<T> az = num::matmul_nt(x, layer.W_z.value);
        num::add_inplace(az, num::matmul_nt(hprev, layer.U_z.value));
        num::add_row_inplace(az, layer.b_z.value);
        Mat<T> zg = num::activation(az, Act::Sigmoid);

        Mat<T> rp;
        if (layer.mode == GruMode::Improved) {
            Mat<T> q = num::matmul_nt(hprev, layer.W_q.value);
            const int lo = scope == AttnScope::Window ? 0 : t;
            auto [r, alpha] = detail::attend(q, tr.k, tr.v, lo, t, h);
            rp = std::move(r);
            tr.q.push_back(std::move(q));
            tr.alpha.push_back(std::move(alpha));
        } else {
            Mat<T> ar = num::matmul_nt(x, layer.W_r.value);
            num::add_inplace(ar, num::matmul_nt(hprev, layer.U_r.value));
            num::add_row_inplace(ar, layer.b_r.value);
            rp = num::activation(ar, Act::Sigmoid);
        }

        Mat<T> uhh = num::matmul_nt(hprev, layer.U_h.value);
        Mat<T> ac = num::matmul_nt(x, layer.W_h.value);
        num::add_inplace(ac, num::hadamard(rp, uhh));
        num::add_row_inplace(ac, layer.b_h.value);
        Mat<T> hc = num::activation(ac, Act::Tanh);

        Mat<T> hnew(n, h);
        for (std::size_t i = 0; i < hnew.v.size(); ++i)
            hnew.v[i] = (T(1) - zg.v[i]) * hprev.v[i] + zg.v[i] * hc.v[i];

        tr.zg.push_back(std::move(zg));
        tr.hc.push_back(std::move(hc));
        tr.rp.push_back(std::move(rp));
        tr.uhh.push_back(std::move(uhh));
        tr.h.push_back(hnew);
        hprev = std::move(hnew);
    }
    return tr;
}

// Reverse pass for one layer. `d_h_ext[t]` is the gradient arriving at h_t
// from outside the recurrence (empty matrix = none); input gradients
// accumulate into `d_inputs`, parameter gradients into the layer.
template <typename T>
void layer_backward(AgruLayer<T>& layer, const std::vector<Mat<T>>& inputs,
                    const AgruLayerTrace<T>& tr, AttnScope scope,
                    const std::vector<Mat<T>>& d_h_ext, std::vector<Mat<T>>& d_inputs) {
    const int steps = static_cast<int>(inputs.size());
    const int n = inputs[0].rows;
    const int h = layer.hidden;
    const T scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(h)));

    if (d_inputs.size() != inputs.size()) {
        d_inputs.assign(inputs.size(), Mat<T>());
        for (int t = 0; t < steps; ++t)
            d_inputs[static_cast<std::size_t>(t)] = Mat<T>(n, layer.in_dim);
    }

    std::vector<Mat<T>> dk, dv;
    if (layer.mode == GruMode::Improved) {
        dk.assign(inputs.size(), Mat<T>());
        dv.assign(inputs.size(), Mat<T>());
        for (int t = 0; t < steps; ++t) {
            dk[static_cast<std::size_t>(t)] = Mat<T>(n, h);
            dv[static_cast<std::size_t>(t)] = Mat<T>(n, h);
        }
    }

    const Mat<T> zero_state(n, h);
    Mat<T> carry(n, h);
    for (int t = steps - 1; t >= 0; --t) {
        const Mat<T>& x = inputs[static_cast<std::size_t>(t)];
        const Mat<T>& hprev = t > 0 ? tr.h[static_cast<std::size_t>(t - 1)] : zero_state;
        const Mat<T>& zg = tr.zg[static_cast<std::size_t>(t)];
        const Mat<T>& hc = tr.hc[static_cast<std::size_t>(t)];
        const Mat<T>& rp = tr.rp[static_cast<std::size_t>(t)];
        const Mat<T>& uhh = tr.uhh[static_cast<std::size_t>(t)];

        Mat<T> g = carry;
        if (!d_h_ext[static_cast<std::size_t>(t)].v.empty())
            num::add_inplace(g, d_h_ext[static_cast<std::size_t>(t)]);

        Mat<T> dzg(n, h), dhc(n, h), dcarry(n, h);
        for (std::size_t i = 0; i < g.v.size(); ++i) {
            dzg.v[i] = g.v[i] * (hc.v[i] - hprev.v[i]);
            dhc.v[i] = g.v[i] * zg.v[i];
            dcarry.v[i] = g.v[i] * (T(1) - zg.v[i]);
        }

        // candidate: hc = tanh(x W_h^T + rp .* uhh + b_h)
        Mat<T> dc(n, h);
        for (std::size_t i = 0; i < dc.v.size(); ++i)
            dc.v[i] = dhc.v[i] * (T(1) - hc.v[i] * hc.v[i]);
        num::add_inplace(layer.W_h.grad, num::matmul_tn(dc, x));
        num::add_inplace(d_inputs[static_cast<std::size_t>(t)], num::matmul(dc, layer.W_h.value));
        num::add_inplace(layer.b_h.grad, num::colsum(dc));
        Mat<T> drp = num::hadamard(dc, uhh);
        Mat<T> duhh = num::hadamard(dc, rp);
        num::add_inplace(layer.U_h.grad, num::matmul_tn(duhh, hprev));
        num::add_inplace(dcarry, num::matmul(duhh, layer.U_h.value));

        // update gate: zg = sigmoid(x W_z^T + hprev U_z^T + b_z)
        Mat<T> daz(n, h);
        for (std::size_t i = 0; i < daz.v.size(); ++i)
            daz.v[i] = dzg.v[i] * zg.v[i] * (T(1) - zg.v[i]);
        num::add_inplace(layer.W_z.grad, num::matmul_tn(daz, x));
        num::add_inplace(d_inputs[static_cast<std::size_t>(t)], num::matmul(daz, layer.W_z.value));
        num::add_inplace(layer.U_z.grad, num::matmul_tn(daz, hprev));
        num::add_inplace(dcarry, num::matmul(daz, layer.U_z.value));
        num::add_inplace(layer.b_z.grad, num::colsum(daz));

        if (layer.mode == GruMode::Improved) {
            const Mat<T>& q = tr.q[static_cast<std::size_t>(t)];
            const Mat<T>& alpha = tr.alpha[static_cast<std::size_t>(t)];
            const int lo = scope == AttnScope::Window ? 0 : t;
            const int width = t - lo + 1;

            Mat<T> dalpha(n, width);
            for (int i = 0; i < n; ++i)
                for (int s = lo; s <= t; ++s) {
                    dalpha(i, s - lo) = num::dot_rows(drp, i, tr.v[static_cast<std::size_t>(s)], i);
                    T* dvs = dv[static_cast<std::size_t>(s)].row(i);
                    const T* drpi = drp.row(i);
                    const T a = alpha(i, s - lo);
                    for (int c = 0; c < h; ++c) dvs[c] += a * drpi[c];
                }

            Mat<T> dlogit(n, width);
            for (int i = 0; i < n; ++i)
                num::detail::softmax_backward_span(alpha.row(i), dalpha.row(i), dlogit.row(i), width);

            Mat<T> dq(n, h);
            for (int i = 0; i < n; ++i) {
                T* dqi = dq.row(i);
                const T* qi = q.row(i);
                for (int s = lo; s <= t; ++s) {
                    const T dl = dlogit(i, s - lo) * scale;
                    const T* ks = tr.k[static_cast<std::size_t>(s)].row(i);
                    T* dks = dk[static_cast<std::size_t>(s)].row(i);
                    for (int c = 0; c < h; ++c) {
                        dqi[c] += dl * ks[c];
                        dks[c] += dl * qi[c];
                    }
                }
            }
            num::add_inplace(layer.W_q.grad, num::matmul_tn(dq, hprev));
            num::add_inplace(dcarry, num::matmul(dq, layer.W_q.value));
        } else {
            // classic reset gate: rp = sigmoid(x W_r^T + hprev U_r^T + b_r)
            Mat<T> dar(n, h);
            for (std::size_t i = 0; i < dar.v.size(); ++i)
                dar.v[i] = drp.v[i] * rp.v[i] * (T(1) - rp.v[i]);
            num::add_inplace(layer.W_r.grad, num::matmul_tn(dar, x));
            num::add_inplace(d_inputs[static_cast<std::size_t>(t)], num::matmul(dar, layer.W_r.value));
            num::add_inplace(layer.U_r.grad, num::matmul_tn(dar, hprev));
            num::add_inplace(dcarry, num::matmul(dar, layer.U_r.value));
            num::add_inplace(layer.b_r.grad, num::colsum(dar));
        }

        carry = std::move(dcarry);
    }

    if (layer.mode == GruMode::Improved) {
        for (int s = 0; s < steps; ++s) {
            num::add_inplace(layer.W_k.grad, num::matmul_tn(dk[static_cast<std::size_t>(s)], inputs[static_cast<std::size_t>(s)]));
            num::add_inplace(d_inputs[static_cast<std::size_t>(s)], num::matmul(dk[static_cast<std::size_t>(s)], layer.W_k.value));
            num::add_inplace(layer.W_v.grad, num::matmul_tn(dv[static_cast<std::size_t>(s)], inputs[static_cast<std::size_t>(s)]));
            num::add_inplace(d_inputs[static_cast<std::size_t>(s)], num::matmul(dv[static_cast<std::size_t>(s)], layer.W_v.value));
        }
    }
}

// Stacked encoder. Layer l > 1 consumes layer l-1's hidden sequence, both
// as gate inputs and as attention keys/values. The sequence representation
// is the top layer's final hidden state, one row per stock.
template <typename T>
struct Encoder {
    std::vector<AgruLayer<T>> layers;
    AttnScope scope = AttnScope::Window;

    Encoder() = default;
    Encoder(int in_dim, const std::vector<int>& sizes, GruMode mode, AttnScope sc, Rng& rng)
        : scope(sc) {
        int d = in_dim;
        for (int hsize : sizes) {
            layers.emplace_back(d, hsize, mode, rng);
            d = hsize;
        }
        if (layers.empty()) throw ConfigError("agru: encoder needs at least one layer");
    }

    int out_dim() const { return layers.back().hidden; }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        for (std::size_t l = 0; l < layers.size(); ++l)
            layers[l].collect(prefix + ".l" + std::to_string(l), out);
    }
};

template <typename T>
struct EncoderTrace {
    std::vector<AgruLayerTrace<T>> layers;
    const Mat<T>& final_state() const { return layers.back().h.back(); }
};

template <typename T>
EncoderTrace<T> encode(const Encoder<T>& enc, const std::vector<Mat<T>>& inputs) {
    EncoderTrace<T> tr;
    const std::vector<Mat<T>>* x = &inputs;
    for (const auto& layer : enc.layers) {
        tr.layers.push_back(layer_forward(layer, *x, enc.scope));
        x = &tr.layers.back().h;
    }
    return tr;
}

// Returns the gradient with respect to the original inputs.
template <typename T>
std::vector<Mat<T>> encode_backward(Encoder<T>& enc, const std::vector<Mat<T>>& inputs,
                                    const EncoderTrace<T>& tr, const Mat<T>& d_final) {
    const int steps = static_cast<int>(inputs.size());
    std::vector<Mat<T>> d_ext(static_cast<std::size_t>(steps));
    d_ext[static_cast<std::size_t>(steps - 1)] = d_final;
    for (int l = static_cast<int>(enc.layers.size()) - 1; l >= 0; --l) {
        const std::vector<Mat<T>>& x = l == 0 ? inputs : tr.layers[static_cast<std::size_t>(l - 1)].h;
        std::vector<Mat<T>> d_x;
        layer_backward(enc.layers[static_cast<std::size_t>(l)], x, tr.layers[static_cast<std::size_t>(l)],
                       enc.scope, d_ext, d_x);
        d_ext = std::move(d_x);
    }
    return d_ext;
}

} // namespace crossgru::agru
