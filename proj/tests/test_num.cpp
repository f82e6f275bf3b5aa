#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "crossgru/gradcheck.hpp"
#include "crossgru/kernels.hpp"
#include "crossgru/matrix.hpp"
#include "oracles.hpp"

using namespace crossgru;
using num::Act;
using num::Mat;
using num::Param;

TEST_CASE("activation elementwise maps", "[num]") {
    Mat<double> m(1, 3, {0.0, -1.0, 2.0});
    auto sig = num::activation(m, Act::Sigmoid);
    CHECK(sig(0, 0) == 0.5);
    auto th = num::activation(m, Act::Tanh);
    CHECK(th(0, 0) == 0.0);
    auto lr = num::activation(m, Act::LeakyRelu, 0.2);
    CHECK(lr(0, 1) == -0.2);
    CHECK(lr(0, 2) == 2.0);
}

TEST_CASE("activation rejects non-finite input naming the entry", "[num]") {
    Mat<double> m(2, 2);
    m(1, 0) = std::nan("");
    try {
        num::activation(m, Act::Tanh);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("(1,0)") != std::string::npos);
    }
}

TEST_CASE("softmax_rows examples", "[num]") {
    SECTION("uniform logits") {
        Mat<double> m(1, 3, {4.2, 4.2, 4.2});
        auto s = num::softmax_rows(m);
        CHECK(s(0, 0) == Catch::Approx(1.0 / 3.0).margin(1e-15));
        CHECK(s(0, 1) == s(0, 0));
    }
    SECTION("max-subtraction stability") {
        Mat<double> m(1, 2, {1000.0, 0.0});
        auto s = num::softmax_rows(m);
        CHECK(std::isfinite(s(0, 0)));
        CHECK(s(0, 0) == Catch::Approx(1.0).margin(1e-12));
        CHECK(s(0, 1) == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("1,2,3 matches the exp/sum oracle") {
        Mat<double> m(1, 3, {1.0, 2.0, 3.0});
        auto s = num::softmax_rows(m);
        const auto ref = oracles::naive_softmax({1.0, 2.0, 3.0});
        CHECK(s(0, 0) == Catch::Approx(0.09003057317038046).margin(1e-12));
        CHECK(s(0, 1) == Catch::Approx(0.24472847105479764).margin(1e-12));
        CHECK(s(0, 2) == Catch::Approx(0.6652409557748219).margin(1e-12));
        for (int j = 0; j < 3; ++j)
            CHECK(s(0, j) == Catch::Approx(ref[static_cast<std::size_t>(j)]).margin(1e-14));
    }
}

TEST_CASE("softmax_rows sums to one", "[num]") {
    Rng rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        const int rows = 1 + static_cast<int>(rng.below(8));
        const int cols = 1 + static_cast<int>(rng.below(12));
        Mat<double> m(rows, cols);
        for (auto& x : m.v) x = rng.uniform(-30.0, 30.0);
        auto s = num::softmax_rows(m);
        for (int i = 0; i < rows; ++i) {
            double sum = 0;
            for (int j = 0; j < cols; ++j) {
                sum += s(i, j);
                CHECK(s(i, j) >= 0.0);
            }
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
    // 32-bit: looser bound
    Mat<float> mf(4, 9);
    for (auto& x : mf.v) x = static_cast<float>(rng.uniform(-10.0, 10.0));
    auto sf = num::softmax_rows(mf);
    for (int i = 0; i < 4; ++i) {
        float sum = 0;
        for (int j = 0; j < 9; ++j) sum += sf(i, j);
        CHECK(std::abs(sum - 1.0f) < 1e-5f);
    }
}

TEST_CASE("softmax_rows shift invariance", "[num]") {
    Rng rng(3);
    Mat<double> m(3, 5);
    for (auto& x : m.v) x = rng.uniform(-5.0, 5.0);
    Mat<double> shifted = m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 5; ++j) shifted(i, j) += 17.25;
    auto a = num::softmax_rows(m);
    auto b = num::softmax_rows(shifted);
    for (std::size_t i = 0; i < a.v.size(); ++i) CHECK(std::abs(a.v[i] - b.v[i]) < 1e-12);
}

TEST_CASE("softmax_rows mask", "[num]") {
    Mat<double> m(2, 3, {5.0, 1.0, 2.0, 1.0, 1.0, 1.0});
    std::vector<std::uint8_t> mask = {1, 0, 1, 1, 1, 1};
    auto s = num::softmax_rows(m, mask);
    CHECK(s(0, 1) == 0.0);
    CHECK(s(0, 0) + s(0, 2) == Catch::Approx(1.0).margin(1e-12));

    std::vector<std::uint8_t> dead = {0, 0, 0, 1, 1, 1};
    try {
        num::softmax_rows(m, dead);
        FAIL("expected error for fully masked row");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("row 0") != std::string::npos);
    }
}

TEST_CASE("adam zero gradient leaves value bitwise unchanged", "[num]") {
    Param<double> p(Mat<double>(2, 2, {1.0, -2.0, 0.25, 4.0}));
    const auto before = p.value.v;
    num::adam_step(p, num::AdamConfig<double>{});
    CHECK(p.value.v == before);
    CHECK(p.step == 1);
}

TEST_CASE("adam first-step update magnitude", "[num]") {
    Param<double> p(Mat<double>(1, 1, {1.0}));
    p.grad(0, 0) = 1.0;
    num::AdamConfig<double> cfg;
    cfg.lr = 0.0002;
    num::adam_step(p, cfg);
    const double update = p.value(0, 0) - 1.0;
    CHECK(update == Catch::Approx(-0.0002 * (1.0 / (1.0 + 1e-8))).margin(1e-14));
    CHECK(p.grad(0, 0) == 0.0); // consumed
}

TEST_CASE("adam config validation", "[num]") {
    Param<double> p(Mat<double>(1, 1));
    num::AdamConfig<double> bad;
    bad.lr = 0.0;
    CHECK_THROWS_AS(num::adam_step(p, bad), ConfigError);
    bad.lr = 0.1;
    bad.beta1 = 1.0;
    CHECK_THROWS_AS(num::adam_step(p, bad), ConfigError);
    bad.beta1 = 0.9;
    bad.beta2 = -0.1;
    CHECK_THROWS_AS(num::adam_step(p, bad), ConfigError);
}

TEST_CASE("matrix ops are pure and deterministic", "[num]") {
    Rng rng(5);
    Mat<double> a(7, 9), b(9, 4);
    for (auto& x : a.v) x = rng.uniform(-1, 1);
    for (auto& x : b.v) x = rng.uniform(-1, 1);
    auto c1 = num::matmul(a, b);
    auto c2 = num::matmul(a, b);
    CHECK(c1.v == c2.v);

    auto t = num::transpose(a);
    auto c3 = num::matmul_tn(t, b); // (a^T)^T b == a b
    for (std::size_t i = 0; i < c1.v.size(); ++i) CHECK(c3.v[i] == Catch::Approx(c1.v[i]).margin(1e-13));
}

TEST_CASE("matmul shape mismatch throws", "[num]") {
    Mat<double> a(2, 3), b(4, 2);
    CHECK_THROWS_AS(num::matmul(a, b), Error);
}

TEST_CASE("finite_diff_check on closed forms", "[num]") {
    SECTION("x^2 at x=3") {
        Param<double> p(Mat<double>(1, 1, {3.0}));
        auto loss = [&]() { return p.value(0, 0) * p.value(0, 0); };
        auto backward = [&]() { p.grad(0, 0) = 2.0 * p.value(0, 0); };
        Rng rng(1);
        auto res = num::finite_diff_check<double>(loss, backward, {{"x", &p}}, 1e-4, 16, rng);
        CHECK(res.max_rel_err < 1e-9);
    }
    SECTION("sum of softmax is constant, gradient ~ 0") {
        Param<double> p(Mat<double>(1, 4, {0.3, -1.2, 2.0, 0.5}));
        auto loss = [&]() {
            auto s = num::softmax_rows(p.value);
            double acc = 0;
            for (double v : s.v) acc += v;
            return acc;
        };
        auto backward = [&]() { p.grad.fill(0.0); };
        Rng rng(1);
        auto res = num::finite_diff_check<double>(loss, backward, {{"x", &p}}, 1e-4, 16, rng);
        CHECK(res.max_rel_err < 1e-4);
    }
}

TEST_CASE("finite_diff_check aborts on non-deterministic loss", "[num]") {
    Param<double> p(Mat<double>(1, 1, {1.0}));
    int calls = 0;
    auto loss = [&]() { return static_cast<double>(++calls); };
    auto backward = [&]() {};
    Rng rng(1);
    CHECK_THROWS_AS(
        num::finite_diff_check<double>(loss, backward, {{"x", &p}}, 1e-4, 4, rng),
        NumericError);
}

TEST_CASE("finite_diff_check requires 64-bit mode", "[num]") {
    Param<float> p(Mat<float>(1, 1, {1.0f}));
    auto loss = []() { return 0.0; };
    auto backward = []() {};
    Rng rng(1);
    CHECK_THROWS_AS(
        num::finite_diff_check<float>(loss, backward, {{"x", &p}}, 1e-4, 4, rng),
        ConfigError);
}

TEST_CASE("xavier bounds", "[num]") {
    Rng rng(9);
    auto m = num::xavier_uniform<double>(20, 30, 30, 20, rng);
    const double bound = std::sqrt(6.0 / 50.0);
    for (double x : m.v) {
        CHECK(x <= bound);
        CHECK(x >= -bound);
    }
}

TEST_CASE("seeded rng reproducibility", "[num]") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
    std::vector<int> v1{1, 2, 3, 4, 5, 6}, v2{1, 2, 3, 4, 5, 6};
    Rng c(7), d(7);
    c.shuffle(v1);
    d.shuffle(v2);
    CHECK(v1 == v2);
}
