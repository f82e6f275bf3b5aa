#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "crossgru/kernels.hpp"
#include "crossgru/matrix.hpp"

namespace crossgru::latent {

using num::Mat;
using num::Param;
using num::ParamRef;

// Learnable market-state bank: d_r rows of dimension d, where d always
// matches the paired feature stream. The bank is an ordinary parameter;
// gradients reach it through the attention keys and values and the
// optimizer updates it like any weight matrix.
template <typename T>
struct Bank {
    Param<T> R;

    Bank() = default;
    Bank(int d_r, int d, Rng& rng) {
        if (d_r < 1 || d < 1) throw ConfigError("latent bank: dimensions must be >= 1");
        Mat<T> init(d_r, d);
        const double sd = 1.0 / std::sqrt(static_cast<double>(d));
        for (auto& x : init.v) x = static_cast<T>(sd * rng.normal());
        R = Param<T>(std::move(init));
    }

    int states() const { return R.value.rows; }
    int dim() const { return R.value.cols; }
};

// Multi-head cross-attention: the observed stream queries the bank, which
// supplies keys and values. Per head, d_head = d / heads.
template <typename T>
struct CrossAttn {
    int d = 0;
    int heads = 0;
    struct Head {
        Param<T> Wq, Wk, Wv; // d x d_head
    };
    std::vector<Head> head_params;
    Param<T> Wo; // d x d

    CrossAttn() = default;
    CrossAttn(int dim, int nheads, Rng& rng) : d(dim), heads(nheads) {
        if (heads < 1) throw ConfigError("cross-attn: heads must be >= 1");
        if (d % heads != 0)
            throw ConfigError("cross-attn: heads (" + std::to_string(heads) +
                              ") must divide stream dim (" + std::to_string(d) + ")");
        const int hd = d / heads;
        for (int i = 0; i < heads; ++i) {
            Head h;
            h.Wq = Param<T>(num::xavier_uniform<T>(d, hd, d, hd, rng));
            h.Wk = Param<T>(num::xavier_uniform<T>(d, hd, d, hd, rng));
            h.Wv = Param<T>(num::xavier_uniform<T>(d, hd, d, hd, rng));
            head_params.push_back(std::move(h));
        }
        Wo = Param<T>(num::xavier_uniform<T>(d, d, d, d, rng));
    }

    int head_dim() const { return d / heads; }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        for (std::size_t i = 0; i < head_params.size(); ++i) {
            out.push_back({prefix + ".h" + std::to_string(i) + ".Wq", &head_params[i].Wq});
            out.push_back({prefix + ".h" + std::to_string(i) + ".Wk", &head_params[i].Wk});
            out.push_back({prefix + ".h" + std::to_string(i) + ".Wv", &head_params[i].Wv});
        }
        out.push_back({prefix + ".Wo", &Wo});
    }
};

template <typename T>
struct CrossAttnTrace {
    struct HeadTrace {
        Mat<T> q;    // N x head_dim
        Mat<T> k, v; // d_r x head_dim
        Mat<T> p;    // N x d_r attention rows
    };
    std::vector<HeadTrace> heads;
    Mat<T> concat; // N x d
    Mat<T> out;    // N x d
};

template <typename T>
CrossAttnTrace<T> cross_forward(const CrossAttn<T>& attn, const Mat<T>& a, const Mat<T>& r) {
    if (a.cols != attn.d) throw Error("cross-attn: stream dim mismatch");
    if (r.cols != attn.d) throw Error("cross-attn: bank dim mismatch");
    const int n = a.rows;
    const int hd = attn.head_dim();
    const T scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(hd)));

    CrossAttnTrace<T> tr;
    tr.concat = Mat<T>(n, attn.d);
    for (int h = 0; h < attn.heads; ++h) {
        const auto& hp = attn.head_params[static_cast<std::size_t>(h)];
        typename CrossAttnTrace<T>::HeadTrace ht;
        ht.q = num::matmul(a, hp.Wq.value);
        ht.k = num::matmul(r, hp.Wk.value);
        ht.v = num::matmul(r, hp.Wv.value);

        Mat<T> scores = num::matmul_nt(ht.q, ht.k);
        num::scale_inplace(scores, scale);
        ht.p = num::softmax_rows(scores);

        Mat<T> headout = num::matmul(ht.p, ht.v); // N x head_dim
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < hd; ++c) tr.concat(i, h * hd + c) = headout(i, c);
        tr.heads.push_back(std::move(ht));
    }
    tr.out = num::matmul(tr.concat, attn.Wo.value);
    return tr;
}

// Accumulates parameter and bank gradients; returns d(stream).
template <typename T>
Mat<T> cross_backward(CrossAttn<T>& attn, Param<T>& bank, const Mat<T>& a,
                      const CrossAttnTrace<T>& tr, const Mat<T>& d_out) {
    const int n = a.rows;
    const int hd = attn.head_dim();
    const T scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(hd)));
    const Mat<T>& r = bank.value;

    num::add_inplace(attn.Wo.grad, num::matmul_tn(tr.concat, d_out));
    Mat<T> d_concat = num::matmul_nt(d_out, attn.Wo.value);

    Mat<T> d_a(n, attn.d);
    for (int h = 0; h < attn.heads; ++h) {
        auto& hp = attn.head_params[static_cast<std::size_t>(h)];
        const auto& ht = tr.heads[static_cast<std::size_t>(h)];

        Mat<T> d_head(n, hd);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < hd; ++c) d_head(i, c) = d_concat(i, h * hd + c);

        Mat<T> d_p = num::matmul_nt(d_head, ht.v);   // N x d_r
        Mat<T> d_v = num::matmul_tn(ht.p, d_head);   // d_r x head_dim

        Mat<T> d_scores(d_p.rows, d_p.cols);
        for (int i = 0; i < d_p.rows; ++i)
            num::detail::softmax_backward_span(ht.p.row(i), d_p.row(i), d_scores.row(i), d_p.cols);
        num::scale_inplace(d_scores, scale);

        Mat<T> d_q = num::matmul(d_scores, ht.k);    // N x head_dim
        Mat<T> d_k = num::matmul_tn(d_scores, ht.q); // d_r x head_dim

        num::add_inplace(hp.Wq.grad, num::matmul_tn(a, d_q));
        num::add_inplace(d_a, num::matmul_nt(d_q, hp.Wq.value));
        num::add_inplace(hp.Wk.grad, num::matmul_tn(r, d_k));
        num::add_inplace(bank.grad, num::matmul_nt(d_k, hp.Wk.value));
        num::add_inplace(hp.Wv.grad, num::matmul_tn(r, d_v));
        num::add_inplace(bank.grad, num::matmul_nt(d_v, hp.Wv.value));
    }
    return d_a;
}

} // namespace crossgru::latent
