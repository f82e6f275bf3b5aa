#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "crossgru/gradcheck.hpp"
#include "crossgru/latent.hpp"

using namespace crossgru;
using latent::Bank;
using latent::CrossAttn;
using num::Mat;

namespace {

Mat<double> random_mat(int r, int c, Rng& rng) {
    Mat<double> m(r, c);
    for (auto& v : m.v) v = rng.uniform(-1.0, 1.0);
    return m;
}

} // namespace

TEST_CASE("bank init is seed-deterministic", "[latent]") {
    Rng a(77), b(77);
    Bank<double> x(8, 6, a), y(8, 6, b);
    CHECK(x.R.value.v == y.R.value.v);
    CHECK(x.states() == 8);
    CHECK(x.dim() == 6);

    for (int d_r : {2, 4, 8, 16, 32}) {
        Rng r(1);
        Bank<double> bank(d_r, 4, r);
        CHECK(bank.states() == d_r);
    }
}

TEST_CASE("heads must divide the stream dim", "[latent]") {
    Rng rng(1);
    CHECK_THROWS_AS(CrossAttn<double>(6, 4, rng), ConfigError);
}

TEST_CASE("single latent state makes the output independent of the queries", "[latent]") {
    Rng rng(2);
    Bank<double> bank(1, 4, rng);
    CrossAttn<double> attn(4, 2, rng);
    auto a1 = random_mat(3, 4, rng);
    auto a2 = random_mat(3, 4, rng);

    auto t1 = latent::cross_forward(attn, a1, bank.R.value);
    auto t2 = latent::cross_forward(attn, a2, bank.R.value);
    CHECK(t1.out.v == t2.out.v); // softmax over one key is exactly 1
    for (int c = 0; c < 4; ++c) CHECK(t1.out(0, c) == t1.out(1, c));
}

TEST_CASE("identical query rows give identical output rows", "[latent]") {
    Rng rng(3);
    Bank<double> bank(5, 4, rng);
    CrossAttn<double> attn(4, 2, rng);
    Mat<double> a(2, 4);
    for (int c = 0; c < 4; ++c) {
        const double v = rng.uniform(-1, 1);
        a(0, c) = v;
        a(1, c) = v;
    }
    auto tr = latent::cross_forward(attn, a, bank.R.value);
    for (int c = 0; c < 4; ++c) CHECK(tr.out(0, c) == tr.out(1, c));
}

TEST_CASE("cross-attention matches the hand-evaluated equations", "[latent]") {
    // N=2, d=4, d_r=3, heads=2: per head Q = A Wq, K = R Wk, V = R Wv,
    // P = softmax(Q K^T / sqrt(2)), out = concat(P V) Wo.
    Rng rng(4);
    Bank<double> bank(3, 4, rng);
    CrossAttn<double> attn(4, 2, rng);
    auto a = random_mat(2, 4, rng);
    auto tr = latent::cross_forward(attn, a, bank.R.value);

    const int hd = 2;
    Mat<double> concat(2, 4);
    for (int h = 0; h < 2; ++h) {
        const auto& hp = attn.head_params[static_cast<std::size_t>(h)];
        double q[2][2], k[3][2], v[3][2];
        for (int i = 0; i < 2; ++i)
            for (int c = 0; c < hd; ++c) {
                q[i][c] = 0;
                for (int j = 0; j < 4; ++j) q[i][c] += a(i, j) * hp.Wq.value(j, c);
            }
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < hd; ++c) {
                k[r][c] = 0;
                v[r][c] = 0;
                for (int j = 0; j < 4; ++j) {
                    k[r][c] += bank.R.value(r, j) * hp.Wk.value(j, c);
                    v[r][c] += bank.R.value(r, j) * hp.Wv.value(j, c);
                }
            }
        for (int i = 0; i < 2; ++i) {
            double p[3], denom = 0;
            for (int r = 0; r < 3; ++r) {
                double s = 0;
                for (int c = 0; c < hd; ++c) s += q[i][c] * k[r][c];
                p[r] = std::exp(s / std::sqrt(2.0));
                denom += p[r];
            }
            for (int r = 0; r < 3; ++r) p[r] /= denom;
            for (int c = 0; c < hd; ++c) {
                double acc = 0;
                for (int r = 0; r < 3; ++r) acc += p[r] * v[r][c];
                concat(i, h * hd + c) = acc;
            }
        }
    }
    for (int i = 0; i < 2; ++i)
        for (int c = 0; c < 4; ++c) {
            double acc = 0;
            for (int j = 0; j < 4; ++j) acc += concat(i, j) * attn.Wo.value(j, c);
            CHECK(tr.out(i, c) == Catch::Approx(acc).margin(1e-12));
        }
}

TEST_CASE("attention rows over latent states sum to one", "[latent]") {
    Rng rng(5);
    for (int rep = 0; rep < 25; ++rep) {
        const int d = 4 * (1 + static_cast<int>(rng.below(3)));
        const int d_r = 1 + static_cast<int>(rng.below(6));
        const int n = 1 + static_cast<int>(rng.below(5));
        Bank<double> bank(d_r, d, rng);
        CrossAttn<double> attn(d, 2, rng);
        auto a = random_mat(n, d, rng);
        auto tr = latent::cross_forward(attn, a, bank.R.value);
        for (const auto& head : tr.heads) {
            for (int i = 0; i < n; ++i) {
                double sum = 0;
                for (int r = 0; r < d_r; ++r) {
                    CHECK(head.p(i, r) >= 0.0);
                    sum += head.p(i, r);
                }
                CHECK(std::abs(sum - 1.0) < 1e-12);
            }
        }
    }
}

TEST_CASE("output is equivariant to query-row permutation", "[latent]") {
    Rng rng(6);
    Bank<double> bank(4, 6, rng);
    CrossAttn<double> attn(6, 3, rng);
    auto a = random_mat(4, 6, rng);
    Mat<double> pa(4, 6);
    const int perm[4] = {2, 0, 3, 1};
    for (int i = 0; i < 4; ++i)
        for (int c = 0; c < 6; ++c) pa(perm[i], c) = a(i, c);
    auto t1 = latent::cross_forward(attn, a, bank.R.value);
    auto t2 = latent::cross_forward(attn, pa, bank.R.value);
    for (int i = 0; i < 4; ++i)
        for (int c = 0; c < 6; ++c) CHECK(t2.out(perm[i], c) == t1.out(i, c));
}

TEST_CASE("cross-attention backward passes the finite-difference check", "[latent][grad]") {
    Rng rng(7);
    Bank<double> bank(3, 4, rng);
    CrossAttn<double> attn(4, 2, rng);
    auto a = random_mat(3, 4, rng);

    auto loss = [&]() {
        auto t = latent::cross_forward(attn, a, bank.R.value);
        double acc = 0;
        for (double v : t.out.v) acc += v * v;
        return acc;
    };
    auto backward = [&]() {
        auto t = latent::cross_forward(attn, a, bank.R.value);
        Mat<double> d = t.out;
        num::scale_inplace(d, 2.0);
        latent::cross_backward(attn, bank.R, a, t, d);
    };
    std::vector<num::ParamRef<double>> params;
    params.push_back({"R", &bank.R});
    attn.collect("attn", params);
    Rng check_rng(8);
    auto res = num::finite_diff_check<double>(loss, backward, params, 1e-4, 256, check_rng);
    INFO(res.worst_param << "[" << res.worst_index << "]");
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("gradients reach the bank and the optimizer moves it", "[latent]") {
    Rng rng(9);
    Bank<double> bank(4, 4, rng);
    CrossAttn<double> attn(4, 2, rng);
    auto a = random_mat(3, 4, rng);

    auto t = latent::cross_forward(attn, a, bank.R.value);
    Mat<double> d_out(3, 4);
    d_out.fill(1.0); // nonzero loss gradient w.r.t. the output
    latent::cross_backward(attn, bank.R, a, t, d_out);

    double gnorm = 0;
    for (double g : bank.R.grad.v) gnorm += g * g;
    CHECK(gnorm > 0.0);

    const auto before = bank.R.value.v;
    num::adam_step(bank.R, num::AdamConfig<double>{});
    double delta = 0;
    for (std::size_t i = 0; i < before.size(); ++i) delta += std::abs(bank.R.value.v[i] - before[i]);
    CHECK(delta > 0.0);
}

TEST_CASE("input gradient of the stream matches finite differences", "[latent][grad]") {
    Rng rng(10);
    Bank<double> bank(3, 4, rng);
    CrossAttn<double> attn(4, 2, rng);
    auto a = random_mat(2, 4, rng);

    auto loss = [&]() {
        auto t = latent::cross_forward(attn, a, bank.R.value);
        double acc = 0;
        for (double v : t.out.v) acc += v * v;
        return acc;
    };
    auto t = latent::cross_forward(attn, a, bank.R.value);
    Mat<double> d = t.out;
    num::scale_inplace(d, 2.0);
    auto d_a = latent::cross_backward(attn, bank.R, a, t, d);

    const double h = 1e-6;
    for (int i = 0; i < 2; ++i)
        for (int c = 0; c < 4; ++c) {
            const double saved = a(i, c);
            a(i, c) = saved + h;
            const double lp = loss();
            a(i, c) = saved - h;
            const double lm = loss();
            a(i, c) = saved;
            CHECK(d_a(i, c) == Catch::Approx((lp - lm) / (2 * h)).margin(1e-6));
        }
}
