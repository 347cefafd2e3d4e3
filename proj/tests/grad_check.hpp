#pragma once

// Central-finite-difference gradient checks shared by the unit tests and the
// acceptance suite. Everything here runs in float64 on tiny shapes.

#include "eegdec/attention.hpp"
#include "eegdec/encoder.hpp"
#include "eegdec/rng.hpp"

#include <cmath>
#include <vector>

namespace gradcheck {

inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0, da = 0, db = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        da += a[i] * a[i];
        db += b[i] * b[i];
    }
    return std::sqrt(num) / (std::sqrt(da) + std::sqrt(db) + 1e-12);
}

// Relative error between analytic and finite-difference gradients of the
// encoder loss w.r.t. every parameter (tiny config, training-mode forward).
inline double encoder_parameter_grad_error() {
    using namespace eegdec;
    EncoderConfig cfg;
    cfg.n_channels = 3;
    cfg.n_timesteps = 6;
    cfg.rnn_layers = 2;
    cfg.hidden_dim = 4;
    cfg.head_hidden_dim = 4;
    cfg.output_shape = {5};
    LstmEncoder<double> enc(cfg);
    enc.init_params(1234);

    Rng rng(77);
    const size_t B = 3;
    std::vector<Mat<double>> signals(B, Mat<double>(3, 6));
    for (auto& s : signals)
        for (double& v : s.v) v = rng.normal();
    Mat<double> target(B, 5);
    for (double& v : target.v) v = rng.normal();

    std::vector<const Mat<double>*> batch;
    for (auto& s : signals) batch.push_back(&s);

    auto loss_of = [&]() {
        EncoderBatchCache<double> cache;
        Mat<double> out = enc.forward_train(batch, cache, /*update_running_stats=*/false);
        double acc = 0;
        for (size_t i = 0; i < out.size(); ++i) {
            double d = out.v[i] - target.v[i];
            acc += d * d;
        }
        return acc / double(out.size());
    };

    EncoderBatchCache<double> cache;
    Mat<double> out = enc.forward_train(batch, cache, false);
    Mat<double> d_out(out.rows, out.cols);
    const double scale = 2.0 / double(out.size());
    for (size_t i = 0; i < out.size(); ++i) d_out.v[i] = scale * (out.v[i] - target.v[i]);
    std::vector<double> analytic;
    enc.backward(d_out, cache, analytic);

    std::vector<double> fd(analytic.size());
    for (size_t i = 0; i < enc.params().size(); ++i) {
        double saved = enc.params()[i];
        double eps = 1e-6 * std::max(1.0, std::abs(saved));
        enc.params()[i] = saved + eps;
        double lp = loss_of();
        enc.params()[i] = saved - eps;
        double lm = loss_of();
        enc.params()[i] = saved;
        fd[i] = (lp - lm) / (2.0 * eps);
    }
    return rel_error(analytic, fd);
}

// Relative error for decoupled cross-attention gradients w.r.t. all inputs
// (queries, both key/value sets, lambda).
inline double attention_grad_error() {
    using namespace eegdec;
    Rng rng(99);
    const size_t m = 3, nt = 4, ni = 2, d = 5;
    Mat<double> q(m, d), kt(nt, d), vt(nt, d), ki(ni, d), vi(ni, d);
    for (auto* mat : {&q, &kt, &vt, &ki, &vi})
        for (double& v : mat->v) v = rng.normal();
    double lambda = 0.7;
    Mat<double> w(m, d); // fixed projection defines a scalar loss
    for (double& v : w.v) v = rng.normal();

    auto loss_of = [&]() {
        Mat<double> out = decoupled_cross_attention(q, kt, vt, ki, vi, lambda);
        double acc = 0;
        for (size_t i = 0; i < out.size(); ++i) acc += out.v[i] * w.v[i];
        return acc;
    };

    DcaCache<double> cache;
    Mat<double> out = decoupled_cross_attention(q, kt, vt, ki, vi, lambda, &cache);
    (void)out;
    DcaGrads<double> g = decoupled_cross_attention_backward(w, q, kt, vt, ki, vi, lambda, cache);

    std::vector<double> analytic, fd;
    auto push_fd = [&](Mat<double>& mat, const Mat<double>& grad) {
        for (size_t i = 0; i < mat.size(); ++i) {
            analytic.push_back(grad.v[i]);
            double saved = mat.v[i];
            double eps = 1e-6 * std::max(1.0, std::abs(saved));
            mat.v[i] = saved + eps;
            double lp = loss_of();
            mat.v[i] = saved - eps;
            double lm = loss_of();
            mat.v[i] = saved;
            fd.push_back((lp - lm) / (2.0 * eps));
        }
    };
    push_fd(q, g.d_q);
    push_fd(kt, g.d_k_text);
    push_fd(vt, g.d_v_text);
    push_fd(ki, g.d_k_image);
    push_fd(vi, g.d_v_image);

    analytic.push_back(g.d_lambda);
    {
        double saved = lambda, eps = 1e-6;
        lambda = saved + eps;
        double lp = loss_of();
        lambda = saved - eps;
        double lm = loss_of();
        lambda = saved;
        fd.push_back((lp - lm) / (2.0 * eps));
    }
    return rel_error(analytic, fd);
}

} // namespace gradcheck
