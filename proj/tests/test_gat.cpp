#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "crossgru/gat.hpp"
#include "crossgru/gradcheck.hpp"

using namespace crossgru;
using gat::Combine;
using gat::GatLayer;
using gat::OutAct;
using num::Mat;

namespace {

rel::CorrelationGraph graph_from_pairs(int n, const std::vector<std::pair<int, int>>& pairs) {
    rel::CorrelationGraph g;
    g.n = n;
    g.adjacency.resize(static_cast<std::size_t>(n));
    for (auto [a, b] : pairs) {
        g.adjacency[static_cast<std::size_t>(a)].push_back({b, 1.0});
        g.adjacency[static_cast<std::size_t>(b)].push_back({a, 1.0});
    }
    for (int i = 0; i < n; ++i) {
        g.adjacency[static_cast<std::size_t>(i)].push_back({i, 1.0});
        std::sort(g.adjacency[static_cast<std::size_t>(i)].begin(),
                  g.adjacency[static_cast<std::size_t>(i)].end(),
                  [](const rel::CorrelationGraph::Edge& x, const rel::CorrelationGraph::Edge& y) {
                      return x.to < y.to;
                  });
    }
    return g;
}

Mat<double> random_mat(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Mat<double> m(r, c);
    for (auto& v : m.v) v = rng.uniform(lo, hi);
    return m;
}

} // namespace

TEST_CASE("isolated node reduces to a pointwise map", "[gat]") {
    Rng rng(1);
    GatLayer<double> L(3, 4, 1, Combine::Concat, OutAct::Relu, rng);
    auto g = graph_from_pairs(1, {});
    auto x = random_mat(1, 3, rng);
    auto tr = gat::layer_forward(L, x, g);
    // sigma_ii == 1 exactly, so out = relu(W x)
    auto wx = num::matmul_nt(x, L.head_params[0].W.value);
    for (int c = 0; c < 4; ++c) CHECK(tr.out(0, c) == std::max(0.0, wx(0, c)));
    CHECK(tr.heads[0].sigma[0][0] == 1.0);
}

TEST_CASE("symmetric nodes produce equal outputs", "[gat]") {
    Rng rng(2);
    GatLayer<double> L(3, 4, 2, Combine::Concat, OutAct::Relu, rng);
    auto g = graph_from_pairs(2, {{0, 1}});
    Mat<double> x(2, 3);
    for (int j = 0; j < 3; ++j) {
        const double v = rng.uniform(-1, 1);
        x(0, j) = v;
        x(1, j) = v;
    }
    auto tr = gat::layer_forward(L, x, g);
    for (int c = 0; c < 4; ++c) CHECK(tr.out(0, c) == tr.out(1, c));
}

TEST_CASE("three-node layer matches the hand-evaluated equations", "[gat]") {
    // Path graph 0-1-2; single head; every quantity recomputed with direct
    // loops: h' = W x, e_ij = lrelu(a . [h'_i || h'_j]), softmax over the
    // neighborhood, aggregate, relu.
    Rng rng(3);
    GatLayer<double> L(2, 2, 1, Combine::Concat, OutAct::Relu, rng);
    auto g = graph_from_pairs(3, {{0, 1}, {1, 2}});
    Mat<double> x(3, 2, {0.5, -0.3, 1.2, 0.8, -0.6, 0.4});

    auto tr = gat::layer_forward(L, x, g);

    const auto& W = L.head_params[0].W.value;
    const auto& a = L.head_params[0].a.value;
    auto hp = [&](int i, int c) {
        double acc = 0;
        for (int j = 0; j < 2; ++j) acc += W(c, j) * x(i, j);
        return acc;
    };
    auto score = [&](int i, int j) {
        double s = 0;
        for (int c = 0; c < 2; ++c) s += a(0, c) * hp(i, c);
        for (int c = 0; c < 2; ++c) s += a(0, 2 + c) * hp(j, c);
        return s >= 0 ? s : 0.2 * s;
    };
    const std::vector<std::vector<int>> nbrs = {{0, 1}, {0, 1, 2}, {1, 2}};
    for (int i = 0; i < 3; ++i) {
        std::vector<double> e, sig;
        double denom = 0;
        for (int j : nbrs[static_cast<std::size_t>(i)]) e.push_back(score(i, j));
        for (double v : e) denom += std::exp(v);
        for (double v : e) sig.push_back(std::exp(v) / denom);
        for (int c = 0; c < 2; ++c) {
            double agg = 0;
            for (std::size_t k = 0; k < nbrs[static_cast<std::size_t>(i)].size(); ++k)
                agg += sig[k] * hp(nbrs[static_cast<std::size_t>(i)][k], c);
            CHECK(tr.out(i, c) == Catch::Approx(std::max(0.0, agg)).margin(1e-12));
        }
    }
}

TEST_CASE("attention coefficients sum to one per neighborhood", "[gat]") {
    Rng rng(4);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 2 + static_cast<int>(rng.below(5));
        std::vector<std::pair<int, int>> pairs;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng.below(2)) pairs.push_back({i, j});
        auto g = graph_from_pairs(n, pairs);
        GatLayer<double> L(3, 4, 2, Combine::Concat, OutAct::Relu, rng);
        auto x = random_mat(n, 3, rng, -3, 3);
        auto tr = gat::layer_forward(L, x, g);
        for (const auto& head : tr.heads) {
            for (int i = 0; i < n; ++i) {
                double sum = 0;
                for (double s : head.sigma[static_cast<std::size_t>(i)]) {
                    CHECK(s >= 0.0);
                    sum += s;
                }
                CHECK(std::abs(sum - 1.0) < 1e-12);
            }
        }
    }
}

TEST_CASE("permutation equivariance", "[gat]") {
    Rng rng(5);
    const int n = 6;
    auto g = graph_from_pairs(n, {{0, 1}, {1, 2}, {3, 4}, {0, 5}, {2, 5}});
    gat::Stack<double> stack = gat::make_encoder_stack<double>(3, 8, 4, 2, rng);
    auto x = random_mat(n, 3, rng);

    const std::vector<int> perm = {3, 0, 5, 1, 4, 2}; // perm[i] = new index of old i
    Mat<double> px(n, 3);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j) px(perm[static_cast<std::size_t>(i)], j) = x(i, j);
    rel::CorrelationGraph pg;
    pg.n = n;
    pg.adjacency.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (const auto& e : g.neighbors(i))
            pg.adjacency[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])].push_back(
                {perm[static_cast<std::size_t>(e.to)], e.w});
    for (auto& adj : pg.adjacency)
        std::sort(adj.begin(), adj.end(),
                  [](const rel::CorrelationGraph::Edge& a, const rel::CorrelationGraph::Edge& b) {
                      return a.to < b.to;
                  });

    auto base = gat::stack_forward(stack, x, g);
    auto permuted = gat::stack_forward(stack, px, pg);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < 4; ++c)
            CHECK(permuted.out()(perm[static_cast<std::size_t>(i)], c) ==
                  Catch::Approx(base.out()(i, c)).margin(1e-9));
}

TEST_CASE("disconnected components are isolated", "[gat]") {
    Rng rng(6);
    const int n = 6;
    auto g = graph_from_pairs(n, {{0, 1}, {1, 2}, {3, 4}, {4, 5}}); // components {0,1,2} and {3,4,5}
    gat::Stack<double> stack = gat::make_encoder_stack<double>(3, 8, 4, 2, rng);
    auto x = random_mat(n, 3, rng);

    SECTION("forward: perturbing one component leaves the other bitwise unchanged") {
        auto base = gat::stack_forward(stack, x, g);
        auto x2 = x;
        for (int i = 3; i < 6; ++i)
            for (int j = 0; j < 3; ++j) x2(i, j) += 5.0;
        auto after = gat::stack_forward(stack, x2, g);
        for (int i = 0; i < 3; ++i)
            for (int c = 0; c < 4; ++c) CHECK(base.out()(i, c) == after.out()(i, c));
    }

    SECTION("backward: gradient restricted to one component never reaches the other") {
        auto tr = gat::stack_forward(stack, x, g);
        Mat<double> d(n, 4);
        for (int c = 0; c < 4; ++c) d(1, c) = 1.0; // only node 1
        auto d_x = gat::stack_backward(stack, x, g, tr, d);
        for (int i = 3; i < 6; ++i)
            for (int j = 0; j < 3; ++j) CHECK(d_x(i, j) == 0.0);
    }
}

TEST_CASE("gat stack backward passes the finite-difference check", "[gat][grad]") {
    Rng rng(7);
    const int n = 5;
    auto g = graph_from_pairs(n, {{0, 1}, {1, 2}, {2, 3}, {0, 4}});
    gat::Stack<double> stack = gat::make_encoder_stack<double>(3, 6, 3, 3, rng);
    auto x = random_mat(n, 3, rng);

    auto loss = [&]() {
        auto tr = gat::stack_forward(stack, x, g);
        double acc = 0;
        for (double v : tr.out().v) acc += v * v;
        return acc;
    };
    auto backward = [&]() {
        auto tr = gat::stack_forward(stack, x, g);
        Mat<double> d = tr.out();
        num::scale_inplace(d, 2.0);
        gat::stack_backward(stack, x, g, tr, d);
    };
    std::vector<num::ParamRef<double>> params;
    stack.collect("gat", params);
    Rng check_rng(8);
    auto res = num::finite_diff_check<double>(loss, backward, params, 1e-4, 128, check_rng);
    INFO(res.worst_param << "[" << res.worst_index << "]");
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("prediction head stack ends linear", "[gat][grad]") {
    // Seed picked so no LeakyReLU pre-activation sits within the fd step of
    // its kink; central differences across a kink are garbage.
    Rng rng(10);
    const int n = 4;
    auto g = graph_from_pairs(n, {{0, 1}, {2, 3}});
    gat::Stack<double> head = gat::make_head_stack<double>(5, 6, rng);
    auto x = random_mat(n, 5, rng);
    auto tr = gat::stack_forward(head, x, g);
    CHECK(tr.out().cols == 1);

    auto loss = [&]() {
        auto t = gat::stack_forward(head, x, g);
        double acc = 0;
        for (double v : t.out().v) acc += v * v;
        return acc;
    };
    auto backward = [&]() {
        auto t = gat::stack_forward(head, x, g);
        Mat<double> d = t.out();
        num::scale_inplace(d, 2.0);
        gat::stack_backward(head, x, g, t, d);
    };
    std::vector<num::ParamRef<double>> params;
    head.collect("head", params);
    Rng check_rng(11);
    auto res = num::finite_diff_check<double>(loss, backward, params, 1e-4, 128, check_rng);
    CHECK(res.max_rel_err < 1e-4);

    Rng probe(99);
    bool any_negative = false;
    for (int rep = 0; rep < 8 && !any_negative; ++rep) {
        auto x2 = random_mat(n, 5, probe, -2, 2);
        auto t2 = gat::stack_forward(head, x2, g);
        for (double v : t2.out().v) any_negative = any_negative || v < 0;
    }
    CHECK(any_negative); // unbounded scores, not relu-clamped
}

TEST_CASE("identity-like degenerate layer is a relu", "[gat]") {
    Rng rng(11);
    GatLayer<double> L(3, 3, 1, Combine::Concat, OutAct::Relu, rng);
    L.head_params[0].W.value.fill(0.0);
    for (int c = 0; c < 3; ++c) L.head_params[0].W.value(c, c) = 1.0;
    auto g = graph_from_pairs(2, {}); // self-loops only
    Mat<double> x(2, 3, {0.5, -0.25, 1.0, -2.0, 0.75, 0.0});
    auto tr = gat::layer_forward(L, x, g);
    for (int i = 0; i < 2; ++i)
        for (int c = 0; c < 3; ++c) CHECK(tr.out(i, c) == std::max(0.0, x(i, c)));
}

TEST_CASE("encoder stack default shape", "[gat]") {
    Rng rng(12);
    auto stack = gat::make_encoder_stack<double>(6, 32, 4, 4, rng);
    auto g = graph_from_pairs(5, {{0, 1}, {2, 3}});
    auto x = random_mat(5, 6, rng);
    auto tr = gat::stack_forward(stack, x, g);
    CHECK(tr.out().rows == 5);
    CHECK(tr.out().cols == 4);
}

TEST_CASE("edgeless graph means no message passing", "[gat]") {
    Rng rng(13);
    auto stack = gat::make_encoder_stack<double>(3, 8, 4, 2, rng);
    auto g = graph_from_pairs(4, {});
    auto x = random_mat(4, 3, rng);
    auto base = gat::stack_forward(stack, x, g);
    auto x2 = x;
    for (int j = 0; j < 3; ++j) x2(3, j) = -x2(3, j) + 2.0;
    auto after = gat::stack_forward(stack, x2, g);
    for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 4; ++c) CHECK(base.out()(i, c) == after.out()(i, c));
}

TEST_CASE("concat mode requires divisible heads", "[gat]") {
    Rng rng(14);
    CHECK_THROWS_AS(GatLayer<double>(3, 5, 2, Combine::Concat, OutAct::Relu, rng), ConfigError);
}
