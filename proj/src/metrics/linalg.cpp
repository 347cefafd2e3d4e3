#include "eegdec/linalg.hpp"

#include <cmath>

namespace eegdec {

SymEig sym_eig(MatD a, int max_sweeps, double tol) {
    if (a.rows != a.cols || a.rows == 0)
        throw ValidationError("sym_eig: matrix must be square and non-empty");
    const size_t n = a.rows;
    MatD v(n, n);
    for (size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(off) <= tol) break;

        for (size_t p = 0; p < n; ++p) {
            for (size_t q = p + 1; q < n; ++q) {
                double apq = a(p, q);
                if (std::abs(apq) < 1e-300) continue;
                double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;

                for (size_t k = 0; k < n; ++k) {
                    double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (size_t k = 0; k < n; ++k) {
                    double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (size_t k = 0; k < n; ++k) {
                    double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    SymEig out;
    out.values.resize(n);
    for (size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
    out.vectors = std::move(v);
    return out;
}

MatD sym_sqrt_psd(const MatD& a) {
    SymEig e = sym_eig(a);
    const size_t n = a.rows;
    MatD out(n, n);
    for (size_t j = 0; j < n; ++j) {
        double lam = e.values[j];
        double s = lam > 0 ? std::sqrt(lam) : 0.0; // clip negatives from roundoff
        if (s == 0.0) continue;
        for (size_t r = 0; r < n; ++r) {
            double vr = e.vectors(r, j) * s;
            if (vr == 0.0) continue;
            for (size_t c = 0; c < n; ++c) out(r, c) += vr * e.vectors(c, j);
        }
    }
    return out;
}

} // namespace eegdec
