#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "crossgru/common.hpp"

namespace crossgru::num {

// Dense row-major matrix. The scalar type is the precision mode: Mat<float>
// for training, Mat<double> wherever gradient checks or oracle comparisons
// need headroom. Reductions run in a fixed sequential order, so results are
// reproducible bit-for-bit for a given build and precision.
template <typename T>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<T> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, T(0)) {
        if (r < 0 || c < 0) throw Error("Mat: negative dimension");
    }
    Mat(int r, int c, std::vector<T> values) : rows(r), cols(c), v(std::move(values)) {
        if (v.size() != static_cast<std::size_t>(r) * c)
            throw Error("Mat: value count does not match " + std::to_string(r) + "x" + std::to_string(c));
    }

    static Mat zeros(int r, int c) { return Mat(r, c); }
    static Mat full(int r, int c, T value) {
        Mat m(r, c);
        for (auto& x : m.v) x = value;
        return m;
    }

    T& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    T operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }

    T* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
    const T* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }

    std::size_t size() const { return v.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    void fill(T value) {
        for (auto& x : v) x = value;
    }
};

namespace detail {
inline void require(bool ok, const char* what) {
    if (!ok) throw Error(std::string("matrix shape mismatch: ") + what);
}
} // namespace detail

// C = A * B
template <typename T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
    detail::require(a.cols == b.rows, "matmul inner dims");
    Mat<T> c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const T* ai = a.row(i);
        T* ci = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const T aik = ai[k];
            const T* bk = b.row(k);
            for (int j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

// C = A * B^T
template <typename T>
Mat<T> matmul_nt(const Mat<T>& a, const Mat<T>& b) {
    detail::require(a.cols == b.cols, "matmul_nt inner dims");
    Mat<T> c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const T* ai = a.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const T* bj = b.row(j);
            T acc = 0;
            for (int k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
            c(i, j) = acc;
        }
    }
    return c;
}

// C = A^T * B
template <typename T>
Mat<T> matmul_tn(const Mat<T>& a, const Mat<T>& b) {
    detail::require(a.rows == b.rows, "matmul_tn inner dims");
    Mat<T> c(a.cols, b.cols);
    for (int k = 0; k < a.rows; ++k) {
        const T* ak = a.row(k);
        const T* bk = b.row(k);
        for (int i = 0; i < a.cols; ++i) {
            const T aki = ak[i];
            T* ci = c.row(i);
            for (int j = 0; j < b.cols; ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

template <typename T>
Mat<T> transpose(const Mat<T>& a) {
    Mat<T> t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

template <typename T>
void add_inplace(Mat<T>& a, const Mat<T>& b) {
    detail::require(a.same_shape(b), "add");
    for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

template <typename T>
Mat<T> add(const Mat<T>& a, const Mat<T>& b) {
    Mat<T> c = a;
    add_inplace(c, b);
    return c;
}

template <typename T>
Mat<T> sub(const Mat<T>& a, const Mat<T>& b) {
    detail::require(a.same_shape(b), "sub");
    Mat<T> c = a;
    for (std::size_t i = 0; i < c.v.size(); ++i) c.v[i] -= b.v[i];
    return c;
}

template <typename T>
Mat<T> hadamard(const Mat<T>& a, const Mat<T>& b) {
    detail::require(a.same_shape(b), "hadamard");
    Mat<T> c = a;
    for (std::size_t i = 0; i < c.v.size(); ++i) c.v[i] *= b.v[i];
    return c;
}

template <typename T>
void scale_inplace(Mat<T>& a, T s) {
    for (auto& x : a.v) x *= s;
}

// A += s * B
template <typename T>
void axpy_inplace(Mat<T>& a, T s, const Mat<T>& b) {
    detail::require(a.same_shape(b), "axpy");
    for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += s * b.v[i];
}

// Adds a 1 x cols bias row to every row of A.
template <typename T>
void add_row_inplace(Mat<T>& a, const Mat<T>& bias) {
    detail::require(bias.rows == 1 && bias.cols == a.cols, "row bias");
    for (int i = 0; i < a.rows; ++i) {
        T* ai = a.row(i);
        for (int j = 0; j < a.cols; ++j) ai[j] += bias.v[j];
    }
}

template <typename T>
Mat<T> colsum(const Mat<T>& a) {
    Mat<T> s(1, a.cols);
    for (int i = 0; i < a.rows; ++i) {
        const T* ai = a.row(i);
        for (int j = 0; j < a.cols; ++j) s.v[j] += ai[j];
    }
    return s;
}

template <typename T>
T dot_rows(const Mat<T>& a, int ra, const Mat<T>& b, int rb) {
    detail::require(a.cols == b.cols, "dot_rows");
    const T* x = a.row(ra);
    const T* y = b.row(rb);
    T acc = 0;
    for (int k = 0; k < a.cols; ++k) acc += x[k] * y[k];
    return acc;
}

// Index of the first non-finite entry, or -1 if all entries are finite.
template <typename T>
long long first_nonfinite(const Mat<T>& a) {
    for (std::size_t i = 0; i < a.v.size(); ++i)
        if (!std::isfinite(a.v[i])) return static_cast<long long>(i);
    return -1;
}

template <typename T>
void require_finite(const Mat<T>& a, const char* who) {
    long long idx = first_nonfinite(a);
    if (idx >= 0) {
        throw NumericError(std::string(who) + ": non-finite entry at (" +
                           std::to_string(idx / a.cols) + "," + std::to_string(idx % a.cols) + ")");
    }
}

} // namespace crossgru::num
