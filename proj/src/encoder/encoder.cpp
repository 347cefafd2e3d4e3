#include "eegdec/encoder.hpp"

#include "eegdec/container.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstring>

using json = nlohmann::json;

namespace eegdec {

std::vector<std::string> EncoderConfig::violations() const {
    std::vector<std::string> v;
    auto pos = [&](long long x, const char* name) {
        if (x < 1) v.push_back(std::string(name) + " must be >= 1, got " + std::to_string(x));
    };
    pos(n_channels, "n_channels");
    pos(n_timesteps, "n_timesteps");
    pos(rnn_layers, "rnn_layers");
    pos(hidden_dim, "hidden_dim");
    pos(head_hidden_dim, "head_hidden_dim");
    if (output_shape.empty() || output_shape.size() > 2)
        v.push_back("output_shape must have 1 or 2 dims");
    for (int d : output_shape)
        if (d < 1) v.push_back("output_shape dims must be >= 1");
    if (!(leaky_slope > 0 && leaky_slope < 1))
        v.push_back("leaky_slope must be in (0, 1)");
    return v;
}

std::string to_string(SequenceOrientation o) {
    return o == SequenceOrientation::time_major ? "time_major" : "channel_major";
}

SequenceOrientation sequence_orientation_from_string(const std::string& s) {
    if (s == "time_major") return SequenceOrientation::time_major;
    if (s == "channel_major") return SequenceOrientation::channel_major;
    throw ValidationError("unknown sequence orientation '" + s + "'");
}

int64_t lstm_parameter_count(int input_dim, int hidden_dim, int layers) {
    int64_t h = hidden_dim;
    int64_t total = 0;
    for (int l = 0; l < layers; ++l) {
        int64_t in = l == 0 ? input_dim : hidden_dim;
        total += 4 * (in * h + h * h + 2 * h);
    }
    return total;
}

int64_t head_parameter_count(int hidden_dim, int head_hidden_dim, int64_t output_size) {
    int64_t h = hidden_dim, hh = head_hidden_dim;
    return (h * hh + hh) + 2 * hh + (hh * output_size + output_size);
}

int64_t count_parameters(const EncoderConfig& cfg) {
    return lstm_parameter_count(cfg.feature_dim(), cfg.hidden_dim, cfg.rnn_layers) +
           head_parameter_count(cfg.hidden_dim, cfg.head_hidden_dim, cfg.output_size());
}

template <typename T>
LstmEncoder<T>::LstmEncoder(EncoderConfig cfg) : cfg_(std::move(cfg)) {
    auto viol = cfg_.violations();
    if (!viol.empty()) throw ValidationError("encoder config: " + viol.front());

    const size_t h = size_t(cfg_.hidden_dim);
    size_t off = 0;
    for (int l = 0; l < cfg_.rnn_layers; ++l) {
        lstm_off_.push_back(off);
        off += 4 * h * size_t(input_dim(l)); // w_ih
        off += 4 * h * h;                    // w_hh
        off += 4 * h;                        // b_ih
        off += 4 * h;                        // b_hh
    }
    const size_t hh = size_t(cfg_.head_hidden_dim);
    off_w1_ = off;
    off += hh * h;
    off_b1_ = off;
    off += hh;
    off_gamma_ = off;
    off += hh;
    off_beta_ = off;
    off += hh;
    off_w2_ = off;
    off += size_t(cfg_.output_size()) * hh;
    off_b2_ = off;
    off += size_t(cfg_.output_size());

    params_.assign(off, T(0));
    running_.assign(2 * hh, T(0));
    for (size_t i = 0; i < hh; ++i) running_[hh + i] = T(1); // running var
    if (int64_t(off) != count_parameters(cfg_))
        throw Error("encoder: parameter layout does not match closed-form count");
}

template <typename T>
size_t LstmEncoder<T>::off_w_hh(int layer) const {
    return lstm_off_[size_t(layer)] + 4 * size_t(cfg_.hidden_dim) * size_t(input_dim(layer));
}

template <typename T>
size_t LstmEncoder<T>::off_b_ih(int layer) const {
    return off_w_hh(layer) + 4 * size_t(cfg_.hidden_dim) * size_t(cfg_.hidden_dim);
}

template <typename T>
size_t LstmEncoder<T>::off_b_hh(int layer) const {
    return off_b_ih(layer) + 4 * size_t(cfg_.hidden_dim);
}

template <typename T>
void LstmEncoder<T>::init_params(uint64_t seed) {
    Rng rng = Rng(seed).fork("encoder_init");
    const double k = 1.0 / std::sqrt(double(cfg_.hidden_dim));
    // Recurrent stack: uniform(-1/sqrt(h), 1/sqrt(h)) everywhere.
    const size_t head_start = off_w1_;
    for (size_t i = 0; i < head_start; ++i) params_[i] = T((rng.uniform() * 2.0 - 1.0) * k);
    // Head linears: uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    const double k1 = 1.0 / std::sqrt(double(cfg_.hidden_dim));
    const size_t hh = size_t(cfg_.head_hidden_dim);
    for (size_t i = 0; i < hh * size_t(cfg_.hidden_dim) + hh; ++i)
        params_[off_w1_ + i] = T((rng.uniform() * 2.0 - 1.0) * k1);
    for (size_t i = 0; i < hh; ++i) params_[off_gamma_ + i] = T(1);
    for (size_t i = 0; i < hh; ++i) params_[off_beta_ + i] = T(0);
    const double k2 = 1.0 / std::sqrt(double(cfg_.head_hidden_dim));
    for (size_t i = 0; i < size_t(cfg_.output_size()) * hh + size_t(cfg_.output_size()); ++i)
        params_[off_w2_ + i] = T((rng.uniform() * 2.0 - 1.0) * k2);
    std::fill(running_.begin(), running_.begin() + std::ptrdiff_t(hh), T(0));
    std::fill(running_.begin() + std::ptrdiff_t(hh), running_.end(), T(1));
}

template <typename T>
void LstmEncoder<T>::check_signal(const Mat<T>& signal) const {
    if (int(signal.rows) != cfg_.n_channels || int(signal.cols) != cfg_.n_timesteps)
        throw ValidationError("encoder: signal shape [" + std::to_string(signal.rows) + " x " +
                              std::to_string(signal.cols) + "] does not match config [" +
                              std::to_string(cfg_.n_channels) + " x " +
                              std::to_string(cfg_.n_timesteps) + "]");
    if (!all_finite(signal)) throw ValidationError("encoder: signal contains non-finite entries");
}

template <typename T>
void LstmEncoder<T>::lstm_forward_sample(const Mat<T>& signal, std::vector<T>& top_h,
                                         EncoderSampleCache<T>* cache) const {
    const int h = cfg_.hidden_dim;
    const int L = cfg_.rnn_layers;
    const int Tn = cfg_.seq_len();
    const int feat = cfg_.feature_dim();
    const bool time_major = cfg_.orientation == SequenceOrientation::time_major;

    if (cache) {
        auto resize3 = [&](std::vector<std::vector<std::vector<T>>>& a) {
            a.assign(size_t(L), std::vector<std::vector<T>>(size_t(Tn), std::vector<T>(size_t(h))));
        };
        resize3(cache->gate_i);
        resize3(cache->gate_f);
        resize3(cache->gate_g);
        resize3(cache->gate_o);
        resize3(cache->cell);
        resize3(cache->tanh_cell);
        resize3(cache->hidden);
    }

    std::vector<std::vector<T>> hs(size_t(L), std::vector<T>(size_t(h), T(0)));
    std::vector<std::vector<T>> cs(size_t(L), std::vector<T>(size_t(h), T(0)));
    std::vector<T> x(size_t(std::max(feat, h)));
    std::vector<T> z(size_t(4 * h));

    for (int t = 0; t < Tn; ++t) {
        int x_dim = feat;
        for (int k = 0; k < feat; ++k)
            x[size_t(k)] = time_major ? signal(size_t(k), size_t(t)) : signal(size_t(t), size_t(k));
        for (int l = 0; l < L; ++l) {
            const int in = input_dim(l);
            const T* w_ih = params_.data() + off_w_ih(l);
            const T* w_hh = params_.data() + off_w_hh(l);
            const T* b_ih = params_.data() + off_b_ih(l);
            const T* b_hh = params_.data() + off_b_hh(l);
            const std::vector<T>& h_prev = hs[size_t(l)];
            for (int r = 0; r < 4 * h; ++r) {
                const T* wr = w_ih + size_t(r) * size_t(in);
                T acc = b_ih[r] + b_hh[r];
                for (int kx = 0; kx < in; ++kx) acc += wr[kx] * x[size_t(kx)];
                const T* ur = w_hh + size_t(r) * size_t(h);
                for (int kh = 0; kh < h; ++kh) acc += ur[kh] * h_prev[size_t(kh)];
                z[size_t(r)] = acc;
            }
            std::vector<T>& cv = cs[size_t(l)];
            std::vector<T>& hv = hs[size_t(l)];
            for (int u = 0; u < h; ++u) {
                T gi = sigmoid(z[size_t(u)]);
                T gf = sigmoid(z[size_t(h + u)]);
                T gg = std::tanh(z[size_t(2 * h + u)]);
                T go = sigmoid(z[size_t(3 * h + u)]);
                T c_new = gf * cv[size_t(u)] + gi * gg;
                T tc = std::tanh(c_new);
                cv[size_t(u)] = c_new;
                hv[size_t(u)] = go * tc;
                if (cache) {
                    cache->gate_i[size_t(l)][size_t(t)][size_t(u)] = gi;
                    cache->gate_f[size_t(l)][size_t(t)][size_t(u)] = gf;
                    cache->gate_g[size_t(l)][size_t(t)][size_t(u)] = gg;
                    cache->gate_o[size_t(l)][size_t(t)][size_t(u)] = go;
                    cache->cell[size_t(l)][size_t(t)][size_t(u)] = c_new;
                    cache->tanh_cell[size_t(l)][size_t(t)][size_t(u)] = tc;
                    cache->hidden[size_t(l)][size_t(t)][size_t(u)] = hv[size_t(u)];
                }
            }
            for (int u = 0; u < h; ++u) x[size_t(u)] = hv[size_t(u)];
            x_dim = h;
        }
        (void)x_dim;
    }
    top_h = hs[size_t(L - 1)];
}

template <typename T>
void LstmEncoder<T>::head_forward_infer(const std::vector<T>& top_h, std::vector<T>& out) const {
    const int h = cfg_.hidden_dim;
    const int hh = cfg_.head_hidden_dim;
    const int64_t out_n = cfg_.output_size();
    const T* w1 = params_.data() + off_w1_;
    const T* b1 = params_.data() + off_b1_;
    const T* gamma = params_.data() + off_gamma_;
    const T* beta = params_.data() + off_beta_;
    const T* w2 = params_.data() + off_w2_;
    const T* b2 = params_.data() + off_b2_;
    const T* rmean = running_.data();
    const T* rvar = running_.data() + hh;

    std::vector<T> a(static_cast<size_t>(hh), T(0));
    for (int j = 0; j < hh; ++j) {
        const T* wr = w1 + size_t(j) * size_t(h);
        T acc = b1[j];
        for (int kx = 0; kx < h; ++kx) acc += wr[kx] * top_h[size_t(kx)];
        T xhat = (acc - rmean[j]) / std::sqrt(rvar[j] + T(kBnEps));
        T y = gamma[j] * xhat + beta[j];
        a[size_t(j)] = y > T(0) ? y : T(cfg_.leaky_slope) * y;
    }
    out.assign(size_t(out_n), T(0));
    for (int64_t o = 0; o < out_n; ++o) {
        const T* wr = w2 + size_t(o) * size_t(hh);
        T acc = b2[o];
        for (int j = 0; j < hh; ++j) acc += wr[j] * a[size_t(j)];
        out[size_t(o)] = acc;
    }
}

template <typename T>
std::vector<T> LstmEncoder<T>::forward(const Mat<T>& signal) const {
    check_signal(signal);
    std::vector<T> top_h;
    lstm_forward_sample(signal, top_h, nullptr);
    std::vector<T> out;
    head_forward_infer(top_h, out);
    if (!all_finite(out)) throw Error("encoder: forward produced non-finite output");
    return out;
}

template <typename T>
Mat<T> LstmEncoder<T>::forward_batch(const std::vector<Mat<T>>& signals) const {
    Mat<T> out(signals.size(), size_t(cfg_.output_size()));
    for (size_t b = 0; b < signals.size(); ++b) {
        std::vector<T> row = forward(signals[b]);
        std::copy(row.begin(), row.end(), out.row(b));
    }
    return out;
}

template <typename T>
Mat<T> LstmEncoder<T>::forward_train(const std::vector<const Mat<T>*>& batch,
                                     EncoderBatchCache<T>& cache, bool update_running_stats) {
    const size_t B = batch.size();
    if (B < 2)
        throw ValidationError("encoder: training batches need at least 2 samples for batch-norm, got " +
                              std::to_string(B));
    const int h = cfg_.hidden_dim;
    const int hh = cfg_.head_hidden_dim;
    const int64_t out_n = cfg_.output_size();

    cache.samples.assign(B, {});
    cache.inputs = batch;
    cache.top_hidden = Mat<T>(B, size_t(h));
    for (size_t b = 0; b < B; ++b) {
        check_signal(*batch[b]);
        std::vector<T> top_h;
        lstm_forward_sample(*batch[b], top_h, &cache.samples[b]);
        std::copy(top_h.begin(), top_h.end(), cache.top_hidden.row(b));
    }

    const T* w1 = params_.data() + off_w1_;
    const T* b1 = params_.data() + off_b1_;
    cache.pre_norm = Mat<T>(B, size_t(hh));
    for (size_t b = 0; b < B; ++b) {
        const T* hrow = cache.top_hidden.row(b);
        T* urow = cache.pre_norm.row(b);
        for (int j = 0; j < hh; ++j) {
            const T* wr = w1 + size_t(j) * size_t(h);
            T acc = b1[j];
            for (int kx = 0; kx < h; ++kx) acc += wr[kx] * hrow[kx];
            urow[j] = acc;
        }
    }

    // Batch statistics (biased variance normalizes; unbiased updates the
    // running estimate).
    cache.batch_mean.assign(size_t(hh), T(0));
    cache.batch_inv_std.assign(size_t(hh), T(0));
    std::vector<T> var(size_t(hh), T(0));
    for (int j = 0; j < hh; ++j) {
        T m = 0;
        for (size_t b = 0; b < B; ++b) m += cache.pre_norm(b, size_t(j));
        m /= T(B);
        T v = 0;
        for (size_t b = 0; b < B; ++b) {
            T d = cache.pre_norm(b, size_t(j)) - m;
            v += d * d;
        }
        v /= T(B);
        cache.batch_mean[size_t(j)] = m;
        var[size_t(j)] = v;
        cache.batch_inv_std[size_t(j)] = T(1) / std::sqrt(v + T(kBnEps));
    }
    if (update_running_stats) {
        T* rmean = running_.data();
        T* rvar = running_.data() + hh;
        for (int j = 0; j < hh; ++j) {
            T unbiased = var[size_t(j)] * T(B) / T(B - 1);
            rmean[j] = T(1 - kBnMomentum) * rmean[j] + T(kBnMomentum) * cache.batch_mean[size_t(j)];
            rvar[j] = T(1 - kBnMomentum) * rvar[j] + T(kBnMomentum) * unbiased;
        }
    }

    const T* gamma = params_.data() + off_gamma_;
    const T* beta = params_.data() + off_beta_;
    cache.normalized = Mat<T>(B, size_t(hh));
    cache.activated = Mat<T>(B, size_t(hh));
    for (size_t b = 0; b < B; ++b) {
        for (int j = 0; j < hh; ++j) {
            T xhat = (cache.pre_norm(b, size_t(j)) - cache.batch_mean[size_t(j)]) *
                     cache.batch_inv_std[size_t(j)];
            cache.normalized(b, size_t(j)) = xhat;
            T y = gamma[j] * xhat + beta[j];
            cache.activated(b, size_t(j)) = y > T(0) ? y : T(cfg_.leaky_slope) * y;
        }
    }

    const T* w2 = params_.data() + off_w2_;
    const T* b2 = params_.data() + off_b2_;
    Mat<T> out(B, size_t(out_n));
    for (size_t b = 0; b < B; ++b) {
        const T* arow = cache.activated.row(b);
        T* orow = out.row(b);
        for (int64_t o = 0; o < out_n; ++o) {
            const T* wr = w2 + size_t(o) * size_t(hh);
            T acc = b2[o];
            for (int j = 0; j < hh; ++j) acc += wr[j] * arow[j];
            orow[o] = acc;
        }
    }
    return out;
}

template <typename T>
void LstmEncoder<T>::backward(const Mat<T>& d_output, const EncoderBatchCache<T>& cache,
                              std::vector<T>& grads) const {
    const size_t B = cache.samples.size();
    const int h = cfg_.hidden_dim;
    const int hh = cfg_.head_hidden_dim;
    const int L = cfg_.rnn_layers;
    const int Tn = cfg_.seq_len();
    const bool time_major = cfg_.orientation == SequenceOrientation::time_major;
    const int64_t out_n = cfg_.output_size();
    if (d_output.rows != B || int64_t(d_output.cols) != out_n)
        throw ValidationError("encoder backward: d_output shape mismatch");

    grads.assign(params_.size(), T(0));
    const T* w2 = params_.data() + off_w2_;
    const T* gamma = params_.data() + off_gamma_;
    T* g_w1 = grads.data() + off_w1_;
    T* g_b1 = grads.data() + off_b1_;
    T* g_gamma = grads.data() + off_gamma_;
    T* g_beta = grads.data() + off_beta_;
    T* g_w2 = grads.data() + off_w2_;
    T* g_b2 = grads.data() + off_b2_;

    // Head: second linear.
    Mat<T> d_act(B, size_t(hh));
    for (size_t b = 0; b < B; ++b) {
        const T* dorow = d_output.row(b);
        const T* arow = cache.activated.row(b);
        for (int64_t o = 0; o < out_n; ++o) {
            T d = dorow[o];
            if (d == T(0)) continue;
            T* gw = g_w2 + size_t(o) * size_t(hh);
            const T* wr = w2 + size_t(o) * size_t(hh);
            T* darow = d_act.row(b);
            for (int j = 0; j < hh; ++j) {
                gw[j] += d * arow[j];
                darow[j] += d * wr[j];
            }
            g_b2[o] += d;
        }
    }

    // Leaky rectifier, then batch-norm.
    Mat<T> d_xhat(B, size_t(hh));
    for (size_t b = 0; b < B; ++b) {
        for (int j = 0; j < hh; ++j) {
            T a = cache.activated(b, size_t(j));
            T dy = d_act(b, size_t(j)) * (a > T(0) ? T(1) : T(cfg_.leaky_slope));
            T xhat = cache.normalized(b, size_t(j));
            g_gamma[j] += dy * xhat;
            g_beta[j] += dy;
            d_xhat(b, size_t(j)) = dy * gamma[j];
        }
    }
    Mat<T> d_pre(B, size_t(hh));
    for (int j = 0; j < hh; ++j) {
        T s1 = 0, s2 = 0;
        for (size_t b = 0; b < B; ++b) {
            s1 += d_xhat(b, size_t(j));
            s2 += d_xhat(b, size_t(j)) * cache.normalized(b, size_t(j));
        }
        T inv = cache.batch_inv_std[size_t(j)];
        for (size_t b = 0; b < B; ++b) {
            T dxh = d_xhat(b, size_t(j));
            T xhat = cache.normalized(b, size_t(j));
            d_pre(b, size_t(j)) = inv / T(B) * (T(B) * dxh - s1 - xhat * s2);
        }
    }

    // First linear back to the top hidden state.
    const T* w1 = params_.data() + off_w1_;
    Mat<T> d_top(B, size_t(h));
    for (size_t b = 0; b < B; ++b) {
        const T* hrow = cache.top_hidden.row(b);
        const T* dprow = d_pre.row(b);
        T* dtrow = d_top.row(b);
        for (int j = 0; j < hh; ++j) {
            T d = dprow[j];
            if (d == T(0)) continue;
            T* gw = g_w1 + size_t(j) * size_t(h);
            const T* wr = w1 + size_t(j) * size_t(h);
            for (int kx = 0; kx < h; ++kx) {
                gw[kx] += d * hrow[kx];
                dtrow[kx] += d * wr[kx];
            }
            g_b1[j] += d;
        }
    }

    // Backprop through time, sample by sample.
    for (size_t b = 0; b < B; ++b) {
        const EncoderSampleCache<T>& sc = cache.samples[b];
        const Mat<T>& signal = *cache.inputs[b];

        std::vector<std::vector<T>> d_above(size_t(Tn), std::vector<T>(size_t(h), T(0)));
        for (int u = 0; u < h; ++u) d_above[size_t(Tn - 1)][size_t(u)] = d_top(b, size_t(u));

        for (int l = L - 1; l >= 0; --l) {
            const int in = input_dim(l);
            const T* w_ih = params_.data() + off_w_ih(l);
            const T* w_hh = params_.data() + off_w_hh(l);
            T* g_w_ih = grads.data() + off_w_ih(l);
            T* g_w_hh = grads.data() + off_w_hh(l);
            T* g_b_ih = grads.data() + off_b_ih(l);
            T* g_b_hh = grads.data() + off_b_hh(l);

            std::vector<std::vector<T>> d_below;
            if (l > 0) d_below.assign(size_t(Tn), std::vector<T>(size_t(h), T(0)));

            std::vector<T> dh_next(size_t(h), T(0)), dc_next(size_t(h), T(0));
            std::vector<T> dz(size_t(4 * h));
            for (int t = Tn - 1; t >= 0; --t) {
                const auto& gi = sc.gate_i[size_t(l)][size_t(t)];
                const auto& gf = sc.gate_f[size_t(l)][size_t(t)];
                const auto& gg = sc.gate_g[size_t(l)][size_t(t)];
                const auto& go = sc.gate_o[size_t(l)][size_t(t)];
                const auto& tc = sc.tanh_cell[size_t(l)][size_t(t)];
                const std::vector<T>* c_prev = t > 0 ? &sc.cell[size_t(l)][size_t(t - 1)] : nullptr;

                for (int u = 0; u < h; ++u) {
                    T dh = d_above[size_t(t)][size_t(u)] + dh_next[size_t(u)];
                    T do_ = dh * tc[size_t(u)];
                    T dc = dc_next[size_t(u)] + dh * go[size_t(u)] * (T(1) - tc[size_t(u)] * tc[size_t(u)]);
                    T cp = c_prev ? (*c_prev)[size_t(u)] : T(0);
                    T di = dc * gg[size_t(u)];
                    T df = dc * cp;
                    T dg = dc * gi[size_t(u)];
                    dz[size_t(u)] = di * gi[size_t(u)] * (T(1) - gi[size_t(u)]);
                    dz[size_t(h + u)] = df * gf[size_t(u)] * (T(1) - gf[size_t(u)]);
                    dz[size_t(2 * h + u)] = dg * (T(1) - gg[size_t(u)] * gg[size_t(u)]);
                    dz[size_t(3 * h + u)] = do_ * go[size_t(u)] * (T(1) - go[size_t(u)]);
                    dc_next[size_t(u)] = dc * gf[size_t(u)];
                }

                const std::vector<T>* h_prev = t > 0 ? &sc.hidden[size_t(l)][size_t(t - 1)] : nullptr;
                std::fill(dh_next.begin(), dh_next.end(), T(0));
                for (int r = 0; r < 4 * h; ++r) {
                    T d = dz[size_t(r)];
                    g_b_ih[r] += d;
                    g_b_hh[r] += d;
                    if (d == T(0)) continue;
                    T* gw = g_w_ih + size_t(r) * size_t(in);
                    if (l == 0) {
                        for (int kx = 0; kx < in; ++kx)
                            gw[kx] += d * (time_major ? signal(size_t(kx), size_t(t))
                                                      : signal(size_t(t), size_t(kx)));
                    } else {
                        const auto& x = sc.hidden[size_t(l - 1)][size_t(t)];
                        const T* wr = w_ih + size_t(r) * size_t(in);
                        auto& db = d_below[size_t(t)];
                        for (int kx = 0; kx < in; ++kx) {
                            gw[kx] += d * x[size_t(kx)];
                            db[size_t(kx)] += d * wr[kx];
                        }
                    }
                    T* gu = g_w_hh + size_t(r) * size_t(h);
                    const T* ur = w_hh + size_t(r) * size_t(h);
                    if (h_prev) {
                        for (int kh = 0; kh < h; ++kh) {
                            gu[kh] += d * (*h_prev)[size_t(kh)];
                            dh_next[size_t(kh)] += d * ur[kh];
                        }
                    } else {
                        for (int kh = 0; kh < h; ++kh) dh_next[size_t(kh)] += d * ur[kh];
                    }
                }
            }
            if (l > 0) d_above = std::move(d_below);
        }
    }
}

template class LstmEncoder<float>;
template class LstmEncoder<double>;

// ------------------------------------------------------------------
// checkpoint io

namespace {

json encoder_config_to_json(const EncoderConfig& c) {
    return json{{"n_channels", c.n_channels},
                {"n_timesteps", c.n_timesteps},
                {"rnn_layers", c.rnn_layers},
                {"hidden_dim", c.hidden_dim},
                {"head_hidden_dim", c.head_hidden_dim},
                {"output_shape", c.output_shape},
                {"leaky_slope", c.leaky_slope},
                {"orientation", to_string(c.orientation)}};
}

EncoderConfig encoder_config_from_json(const json& j) {
    EncoderConfig c;
    c.n_channels = j.at("n_channels").get<int>();
    c.n_timesteps = j.at("n_timesteps").get<int>();
    c.rnn_layers = j.at("rnn_layers").get<int>();
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.head_hidden_dim = j.at("head_hidden_dim").get<int>();
    c.output_shape = j.at("output_shape").get<std::vector<int>>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.orientation = sequence_orientation_from_string(j.value("orientation", "time_major"));
    return c;
}

} // namespace

void save_encoder_checkpoint(const std::string& path, const LstmEncoder<float>& enc,
                             const EncoderCheckpointMeta& meta) {
    Container c;
    c.magic = "EEGK";
    json h;
    h["kind"] = "eeg_encoder";
    h["config"] = encoder_config_to_json(enc.config());
    h["space"] = to_string(meta.space);
    h["training_step"] = meta.training_step;
    h["extractor_id"] = meta.extractor_id;
    h["n_params"] = enc.params().size();
    h["n_state"] = enc.running_state().size();
    c.header_json = h.dump();
    c.payload = enc.params();
    c.payload.insert(c.payload.end(), enc.running_state().begin(), enc.running_state().end());
    write_container(path, c);
}

LstmEncoder<float> load_encoder_checkpoint(const std::string& path, EncoderCheckpointMeta* meta) {
    Container c = read_container(path, "EEGK", 1);
    json h;
    try {
        h = json::parse(c.header_json);
    } catch (const json::exception& e) {
        throw ParseError(path + ": bad checkpoint header: " + e.what());
    }
    LstmEncoder<float> enc(encoder_config_from_json(h.at("config")));
    size_t n_params = h.at("n_params").get<size_t>();
    size_t n_state = h.at("n_state").get<size_t>();
    if (n_params != enc.params().size() || n_state != enc.running_state().size() ||
        c.payload.size() != n_params + n_state)
        throw ParseError(path + ": checkpoint payload does not match its config");
    std::copy(c.payload.begin(), c.payload.begin() + std::ptrdiff_t(n_params), enc.params().begin());
    std::copy(c.payload.begin() + std::ptrdiff_t(n_params), c.payload.end(),
              enc.running_state().begin());
    if (meta) {
        meta->space = target_space_from_string(h.at("space").get<std::string>());
        meta->training_step = h.at("training_step").get<int64_t>();
        meta->extractor_id = h.at("extractor_id").get<std::string>();
    }
    return enc;
}

std::string encoder_checkpoint_hash(const std::string& path) {
    Container c = read_container(path, "EEGK", 1);
    return container_hash(c);
}

} // namespace eegdec
