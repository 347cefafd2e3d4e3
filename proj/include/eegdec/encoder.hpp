#pragma once

#include "eegdec/mat.hpp"
#include "eegdec/rng.hpp"
#include "eegdec/types.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace eegdec {

// Which axis the recurrence walks. The default consumes the signal as a
// length-n_timesteps sequence of n_channels-wide feature vectors; the
// alternative transposes that.
enum class SequenceOrientation { time_major, channel_major };

std::string to_string(SequenceOrientation o);
SequenceOrientation sequence_orientation_from_string(const std::string& s);

// Architecture of the EEG encoder: a stacked recurrent network over time
// (channels are the per-step features) whose final-timestep top-layer hidden
// state feeds Linear -> BatchNorm -> LeakyReLU -> Linear, reshaped to the
// target space. The same architecture serves the image-space and text-space
// encoders; only output_shape differs.
struct EncoderConfig {
    int n_channels = 128;
    int n_timesteps = 512;
    int rnn_layers = 3;
    int hidden_dim = 512;
    int head_hidden_dim = 512;
    std::vector<int> output_shape = {1024}; // [d_img] or [n_tokens, d_text]
    double leaky_slope = 0.01;
    SequenceOrientation orientation = SequenceOrientation::time_major;

    int64_t output_size() const {
        int64_t p = 1;
        for (int d : output_shape) p *= d;
        return p;
    }
    int seq_len() const {
        return orientation == SequenceOrientation::time_major ? n_timesteps : n_channels;
    }
    int feature_dim() const {
        return orientation == SequenceOrientation::time_major ? n_channels : n_timesteps;
    }

    std::vector<std::string> violations() const;
};

// Closed-form parameter counts; standard 4-gate cells with two bias vectors
// per layer.
int64_t lstm_parameter_count(int input_dim, int hidden_dim, int layers);
int64_t head_parameter_count(int hidden_dim, int head_hidden_dim, int64_t output_size);
int64_t count_parameters(const EncoderConfig& cfg);

template <typename T>
struct EncoderSampleCache {
    // Indexed [layer][t]; each entry is hidden_dim wide.
    std::vector<std::vector<std::vector<T>>> gate_i, gate_f, gate_g, gate_o, cell, tanh_cell, hidden;
};

template <typename T>
struct EncoderBatchCache {
    std::vector<EncoderSampleCache<T>> samples;
    std::vector<const Mat<T>*> inputs;
    Mat<T> top_hidden;  // [B x hidden]
    Mat<T> pre_norm;    // [B x head_hidden], before batch-norm
    Mat<T> normalized;  // [B x head_hidden], after batch-norm scale/shift... cached as xhat
    Mat<T> activated;   // [B x head_hidden], after leaky rectifier
    std::vector<T> batch_mean, batch_inv_std;
};

template <typename T>
class LstmEncoder {
  public:
    explicit LstmEncoder(EncoderConfig cfg);

    void init_params(uint64_t seed);

    const EncoderConfig& config() const { return cfg_; }
    std::vector<T>& params() { return params_; }
    const std::vector<T>& params() const { return params_; }
    std::vector<T>& running_state() { return running_; }
    const std::vector<T>& running_state() const { return running_; }
    int64_t n_params() const { return int64_t(params_.size()); }

    // Inference-mode forward (running batch-norm statistics). Deterministic
    // and batch-size invariant: the batch version loops this per sample.
    std::vector<T> forward(const Mat<T>& signal) const;
    Mat<T> forward_batch(const std::vector<Mat<T>>& signals) const;

    // Training-mode forward over a batch (>= 2 samples; batch-norm uses batch
    // statistics). Fills the cache consumed by backward.
    Mat<T> forward_train(const std::vector<const Mat<T>*>& batch, EncoderBatchCache<T>& cache,
                         bool update_running_stats);

    // Accumulates parameter gradients for d(loss)/d(output) into grads
    // (resized and zeroed here). Mean/sum scaling is the caller's business.
    void backward(const Mat<T>& d_output, const EncoderBatchCache<T>& cache,
                  std::vector<T>& grads) const;

  private:
    void check_signal(const Mat<T>& signal) const;
    void lstm_forward_sample(const Mat<T>& signal, std::vector<T>& top_h,
                             EncoderSampleCache<T>* cache) const;
    void head_forward_infer(const std::vector<T>& top_h, std::vector<T>& out) const;

    // Parameter views (offsets into the flat buffer).
    size_t off_w_ih(int layer) const { return lstm_off_[size_t(layer)]; }
    size_t off_w_hh(int layer) const;
    size_t off_b_ih(int layer) const;
    size_t off_b_hh(int layer) const;
    int input_dim(int layer) const { return layer == 0 ? cfg_.feature_dim() : cfg_.hidden_dim; }

    EncoderConfig cfg_;
    std::vector<T> params_;
    std::vector<T> running_; // running mean then running var, head_hidden each
    std::vector<size_t> lstm_off_;
    size_t off_w1_ = 0, off_b1_ = 0, off_gamma_ = 0, off_beta_ = 0, off_w2_ = 0, off_b2_ = 0;

    static constexpr double kBnEps = 1e-5;
    static constexpr double kBnMomentum = 0.1;
};

extern template class LstmEncoder<float>;
extern template class LstmEncoder<double>;

// ------------------------------------------------------------------
// Checkpoint container ("EEGK"): JSON config header, float32 payload of
// parameters followed by batch-norm running statistics, SHA-256 trailer.
// Loading reproduces bit-identical forward outputs.

struct EncoderCheckpointMeta {
    TargetSpace space = TargetSpace::image;
    int64_t training_step = 0;
    std::string extractor_id;
};

void save_encoder_checkpoint(const std::string& path, const LstmEncoder<float>& enc,
                             const EncoderCheckpointMeta& meta);
LstmEncoder<float> load_encoder_checkpoint(const std::string& path, EncoderCheckpointMeta* meta = nullptr);

// Content hash of a checkpoint file (its stored SHA-256 trailer).
std::string encoder_checkpoint_hash(const std::string& path);

// --- small helpers shared by templated code ---

template <typename T>
Mat<T> mat_cast(const MatF& m) {
    Mat<T> out(m.rows, m.cols);
    for (size_t i = 0; i < m.size(); ++i) out.v[i] = T(m.v[i]);
    return out;
}

template <typename T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

} // namespace eegdec
