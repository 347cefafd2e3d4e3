#pragma once

#include "eegdec/errors.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace eegdec {

// Dense row-major matrix. Deliberately minimal: storage plus the handful of
// kernels the encoders, attention and metrics need.
template <typename T>
struct Mat {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<T> v;

    Mat() = default;
    Mat(size_t r, size_t c, T fill = T(0)) : rows(r), cols(c), v(r * c, fill) {}

    T& operator()(size_t r, size_t c) { return v[r * cols + c]; }
    const T& operator()(size_t r, size_t c) const { return v[r * cols + c]; }

    T* row(size_t r) { return v.data() + r * cols; }
    const T* row(size_t r) const { return v.data() + r * cols; }

    size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

using MatF = Mat<float>;
using MatD = Mat<double>;

template <typename T>
bool all_finite(const Mat<T>& m) {
    for (T x : m.v)
        if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
}

template <typename T>
bool all_finite(const std::vector<T>& v) {
    for (T x : v)
        if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
}

// C = A * B
template <typename T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
    if (a.cols != b.rows)
        throw ValidationError("matmul: inner dimensions differ (" + std::to_string(a.cols) +
                              " vs " + std::to_string(b.rows) + ")");
    Mat<T> c(a.rows, b.cols);
    for (size_t i = 0; i < a.rows; ++i) {
        const T* ar = a.row(i);
        T* cr = c.row(i);
        for (size_t k = 0; k < a.cols; ++k) {
            T aik = ar[k];
            if (aik == T(0)) continue;
            const T* br = b.row(k);
            for (size_t j = 0; j < b.cols; ++j) cr[j] += aik * br[j];
        }
    }
    return c;
}

// C = A^T * B
template <typename T>
Mat<T> matmul_tn(const Mat<T>& a, const Mat<T>& b) {
    if (a.rows != b.rows)
        throw ValidationError("matmul_tn: row counts differ");
    Mat<T> c(a.cols, b.cols);
    for (size_t k = 0; k < a.rows; ++k) {
        const T* ar = a.row(k);
        const T* br = b.row(k);
        for (size_t i = 0; i < a.cols; ++i) {
            T aki = ar[i];
            if (aki == T(0)) continue;
            T* cr = c.row(i);
            for (size_t j = 0; j < b.cols; ++j) cr[j] += aki * br[j];
        }
    }
    return c;
}

// C = A * B^T
template <typename T>
Mat<T> matmul_nt(const Mat<T>& a, const Mat<T>& b) {
    if (a.cols != b.cols)
        throw ValidationError("matmul_nt: column counts differ");
    Mat<T> c(a.rows, b.rows);
    for (size_t i = 0; i < a.rows; ++i) {
        const T* ar = a.row(i);
        for (size_t j = 0; j < b.rows; ++j) {
            const T* br = b.row(j);
            T s = 0;
            for (size_t k = 0; k < a.cols; ++k) s += ar[k] * br[k];
            c(i, j) = s;
        }
    }
    return c;
}

template <typename T>
T dot(const T* a, const T* b, size_t n) {
    T s = 0;
    for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

// Cosine similarity of two flat vectors.
template <typename T>
double cosine_similarity(const std::vector<T>& a, const std::vector<T>& b) {
    if (a.size() != b.size())
        throw ValidationError("cosine_similarity: length mismatch");
    double num = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += double(a[i]) * double(b[i]);
        na += double(a[i]) * double(a[i]);
        nb += double(b[i]) * double(b[i]);
    }
    double d = std::sqrt(na) * std::sqrt(nb);
    if (d == 0.0)
        throw ValidationError("cosine_similarity: zero-norm vector");
    return num / d;
}

// Pairwise (cascade) summation; bounds float drift for long reductions.
inline double pairwise_sum(const double* x, size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0;
        for (size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double pairwise_mean(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    return pairwise_sum(x.data(), x.size()) / static_cast<double>(x.size());
}

} // namespace eegdec
