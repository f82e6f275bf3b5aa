#pragma once

#include <string>
#include <utility>
#include <vector>

#include "crossgru/kernels.hpp"
#include "crossgru/matrix.hpp"
#include "crossgru/relgraph.hpp"

namespace crossgru::gat {

using num::Mat;
using num::Param;
using num::ParamRef;

enum class Combine { Concat, Average };
enum class OutAct { Relu, Identity };

// One graph-attention layer. Per head: project, score every neighbor pair
// with a learnable vector over [h_i || h_j], softmax over the neighborhood,
// aggregate. Heads are concatenated (hidden layers) or averaged (output
// layers), then the layer nonlinearity applies. Attention uses features
// only; stored correlation weights gate edge existence, not magnitude.
template <typename T>
struct GatLayer {
    int in_dim = 0;
    int out_dim = 0;
    int heads = 1;
    Combine combine = Combine::Concat;
    OutAct act = OutAct::Relu;
    T slope = T(0.2);

    struct Head {
        Param<T> W; // head_dim x in_dim
        Param<T> a; // 1 x (2 * head_dim)
    };
    std::vector<Head> head_params;

    GatLayer() = default;
    GatLayer(int in, int out, int nheads, Combine cmb, OutAct activation, Rng& rng)
        : in_dim(in), out_dim(out), heads(nheads), combine(cmb), act(activation) {
        if (heads < 1) throw ConfigError("gat: heads must be >= 1");
        if (combine == Combine::Concat && out % heads != 0)
            throw ConfigError("gat: concat mode needs out_dim divisible by heads");
        const int hd = head_dim();
        for (int m = 0; m < heads; ++m) {
            Head hp;
            hp.W = Param<T>(num::xavier_uniform<T>(hd, in, in, hd, rng));
            hp.a = Param<T>(num::xavier_uniform<T>(1, 2 * hd, 2 * hd, 1, rng));
            head_params.push_back(std::move(hp));
        }
    }

    int head_dim() const { return combine == Combine::Concat ? out_dim / heads : out_dim; }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        for (std::size_t m = 0; m < head_params.size(); ++m) {
            out.push_back({prefix + ".h" + std::to_string(m) + ".W", &head_params[m].W});
            out.push_back({prefix + ".h" + std::to_string(m) + ".a", &head_params[m].a});
        }
    }
};

template <typename T>
struct GatLayerTrace {
    struct HeadTrace {
        Mat<T> hp;                         // N x head_dim projected features
        std::vector<std::vector<T>> sigma; // per node, softmax over neighbors
        std::vector<std::vector<T>> pre;   // per node, pre-LeakyReLU scores
        Mat<T> agg;                        // N x head_dim aggregated
    };
    std::vector<HeadTrace> heads;
    Mat<T> combined; // pre-activation
    Mat<T> out;
};

template <typename T>
GatLayerTrace<T> layer_forward(const GatLayer<T>& layer, const Mat<T>& x,
                               const rel::CorrelationGraph& graph) {
    if (x.rows != graph.n) throw Error("gat: feature rows != graph nodes");
    const int n = x.rows;
    const int hd = layer.head_dim();

    GatLayerTrace<T> tr;
    tr.combined = Mat<T>(n, layer.out_dim);

    for (int m = 0; m < layer.heads; ++m) {
        const auto& hp = layer.head_params[static_cast<std::size_t>(m)];
        typename GatLayerTrace<T>::HeadTrace ht;
        ht.hp = num::matmul_nt(x, hp.W.value);

        // Split the attention vector: score(i,j) = a_src . h_i + a_dst . h_j.
        std::vector<T> s_src(static_cast<std::size_t>(n)), s_dst(static_cast<std::size_t>(n));
        const T* a_src = hp.a.value.v.data();
        const T* a_dst = a_src + hd;
        for (int i = 0; i < n; ++i) {
            const T* row = ht.hp.row(i);
            T acc_s = 0, acc_d = 0;
            for (int c = 0; c < hd; ++c) {
                acc_s += a_src[c] * row[c];
                acc_d += a_dst[c] * row[c];
            }
            s_src[static_cast<std::size_t>(i)] = acc_s;
            s_dst[static_cast<std::size_t>(i)] = acc_d;
        }

        ht.sigma.resize(static_cast<std::size_t>(n));
        ht.pre.resize(static_cast<std::size_t>(n));
        ht.agg = Mat<T>(n, hd);
        for (int i = 0; i < n; ++i) {
            const auto& nbrs = graph.neighbors(i);
            auto& pre = ht.pre[static_cast<std::size_t>(i)];
            auto& sig = ht.sigma[static_cast<std::size_t>(i)];
            pre.resize(nbrs.size());
            sig.resize(nbrs.size());
            std::vector<T> scored(nbrs.size());
            for (std::size_t e = 0; e < nbrs.size(); ++e) {
                pre[e] = s_src[static_cast<std::size_t>(i)] + s_dst[static_cast<std::size_t>(nbrs[e].to)];
                scored[e] = num::leaky_relu(pre[e], layer.slope);
            }
            num::detail::softmax_span(scored.data(), sig.data(), static_cast<int>(nbrs.size()), nullptr);
            T* out = ht.agg.row(i);
            for (std::size_t e = 0; e < nbrs.size(); ++e) {
                const T* hj = ht.hp.row(nbrs[e].to);
                for (int c = 0; c < hd; ++c) out[c] += sig[e] * hj[c];
            }
        }

        if (layer.combine == Combine::Concat) {
            for (int i = 0; i < n; ++i)
                for (int c = 0; c < hd; ++c) tr.combined(i, m * hd + c) = ht.agg(i, c);
        } else {
            const T inv = T(1) / static_cast<T>(layer.heads);
            for (int i = 0; i < n; ++i)
                for (int c = 0; c < hd; ++c) tr.combined(i, c) += inv * ht.agg(i, c);
        }
        tr.heads.push_back(std::move(ht));
    }

    tr.out = layer.act == OutAct::Relu
                 ? num::activation(tr.combined, num::Act::LeakyRelu, T(0)) // slope 0 == ReLU
                 : tr.combined;
    return tr;
}

// Accumulates parameter gradients and returns d(input).
template <typename T>
Mat<T> layer_backward(GatLayer<T>& layer, const Mat<T>& x, const rel::CorrelationGraph& graph,
                      const GatLayerTrace<T>& tr, const Mat<T>& d_out) {
    const int n = x.rows;
    const int hd = layer.head_dim();

    Mat<T> d_comb = d_out;
    if (layer.act == OutAct::Relu) {
        for (std::size_t i = 0; i < d_comb.v.size(); ++i)
            if (tr.combined.v[i] <= 0) d_comb.v[i] = 0;
    }

    Mat<T> d_x(n, layer.in_dim);
    for (int m = 0; m < layer.heads; ++m) {
        auto& hp = layer.head_params[static_cast<std::size_t>(m)];
        const auto& ht = tr.heads[static_cast<std::size_t>(m)];

        Mat<T> d_agg(n, hd);
        if (layer.combine == Combine::Concat) {
            for (int i = 0; i < n; ++i)
                for (int c = 0; c < hd; ++c) d_agg(i, c) = d_comb(i, m * hd + c);
        } else {
            const T inv = T(1) / static_cast<T>(layer.heads);
            for (int i = 0; i < n; ++i)
                for (int c = 0; c < hd; ++c) d_agg(i, c) = inv * d_comb(i, c);
        }

        Mat<T> d_hp(n, hd);
        std::vector<T> d_ssrc(static_cast<std::size_t>(n), T(0));
        std::vector<T> d_sdst(static_cast<std::size_t>(n), T(0));
        for (int i = 0; i < n; ++i) {
            const auto& nbrs = graph.neighbors(i);
            const auto& sig = ht.sigma[static_cast<std::size_t>(i)];
            const auto& pre = ht.pre[static_cast<std::size_t>(i)];
            const std::size_t deg = nbrs.size();

            std::vector<T> d_sig(deg);
            const T* dai = d_agg.row(i);
            for (std::size_t e = 0; e < deg; ++e) {
                d_sig[e] = 0;
                const T* hj = ht.hp.row(nbrs[e].to);
                for (int c = 0; c < hd; ++c) d_sig[e] += dai[c] * hj[c];
                T* dhj = d_hp.row(nbrs[e].to);
                for (int c = 0; c < hd; ++c) dhj[c] += sig[e] * dai[c];
            }

            std::vector<T> d_score(deg);
            num::detail::softmax_backward_span(sig.data(), d_sig.data(), d_score.data(),
                                               static_cast<int>(deg));
            for (std::size_t e = 0; e < deg; ++e) {
                const T d_pre = d_score[e] * (pre[e] >= 0 ? T(1) : layer.slope);
                d_ssrc[static_cast<std::size_t>(i)] += d_pre;
                d_sdst[static_cast<std::size_t>(nbrs[e].to)] += d_pre;
            }
        }

        const T* a_src = hp.a.value.v.data();
        const T* a_dst = a_src + hd;
        T* da_src = hp.a.grad.v.data();
        T* da_dst = da_src + hd;
        for (int i = 0; i < n; ++i) {
            const T* hi = ht.hp.row(i);
            T* dhi = d_hp.row(i);
            const T ds = d_ssrc[static_cast<std::size_t>(i)];
            const T dd = d_sdst[static_cast<std::size_t>(i)];
            for (int c = 0; c < hd; ++c) {
                da_src[c] += ds * hi[c];
                da_dst[c] += dd * hi[c];
                dhi[c] += ds * a_src[c] + dd * a_dst[c];
            }
        }

        num::add_inplace(hp.W.grad, num::matmul_tn(d_hp, x));
        num::add_inplace(d_x, num::matmul(d_hp, hp.W.value));
    }
    return d_x;
}

template <typename T>
struct Stack {
    std::vector<GatLayer<T>> layers;

    Stack() = default;

    int out_dim() const { return layers.back().out_dim; }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        for (std::size_t l = 0; l < layers.size(); ++l)
            layers[l].collect(prefix + ".l" + std::to_string(l), out);
    }
};

// Cross-sectional encoder: two layers over the day's features, wide
// multi-head concat then a narrow averaged layer.
template <typename T>
Stack<T> make_encoder_stack(int in_dim, int hidden, int out, int heads, Rng& rng) {
    Stack<T> s;
    s.layers.emplace_back(in_dim, hidden, heads, Combine::Concat, OutAct::Relu, rng);
    s.layers.emplace_back(hidden, out, heads, Combine::Average, OutAct::Relu, rng);
    return s;
}

// Prediction head: refine the fused features, then reduce to one unbounded
// score per stock (last layer linear).
template <typename T>
Stack<T> make_head_stack(int in_dim, int hidden, Rng& rng) {
    Stack<T> s;
    s.layers.emplace_back(in_dim, hidden, 1, Combine::Concat, OutAct::Relu, rng);
    s.layers.emplace_back(hidden, 1, 1, Combine::Average, OutAct::Identity, rng);
    return s;
}

template <typename T>
struct StackTrace {
    std::vector<GatLayerTrace<T>> layers;
    const Mat<T>& out() const { return layers.back().out; }
};

template <typename T>
StackTrace<T> stack_forward(const Stack<T>& stack, const Mat<T>& x, const rel::CorrelationGraph& graph) {
    StackTrace<T> tr;
    const Mat<T>* cur = &x;
    for (const auto& layer : stack.layers) {
        tr.layers.push_back(layer_forward(layer, *cur, graph));
        cur = &tr.layers.back().out;
    }
    return tr;
}

template <typename T>
Mat<T> stack_backward(Stack<T>& stack, const Mat<T>& x, const rel::CorrelationGraph& graph,
                      const StackTrace<T>& tr, const Mat<T>& d_out) {
    Mat<T> d = d_out;
    for (int l = static_cast<int>(stack.layers.size()) - 1; l >= 0; --l) {
        const Mat<T>& input = l == 0 ? x : tr.layers[static_cast<std::size_t>(l - 1)].out;
        d = layer_backward(stack.layers[static_cast<std::size_t>(l)], input, graph,
                           tr.layers[static_cast<std::size_t>(l)], d);
    }
    return d;
}

} // namespace crossgru::gat
