#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace eegdec {

// One hierarchical configuration document shared by every subcommand. The
// defaults reproduce the reference training recipe; all dimensions are
// configuration, never compile-time constants, so desk-scale runs can shrink
// them freely.
struct DataConfig {
    int n_channels = 128;
    int n_classes = 40;
    int n_timesteps = 512;
    int d_img = 1024; // image-embedding width (CLIP-Huge-sized default)
    int d_text = 768; // per-token text width (CLIP-Large-sized default)
    int n_tokens = 77;
};

struct EncoderHyper {
    int rnn_layers = 3;
    int hidden_dim = 512;
    int head_hidden_dim = 512;
    double leaky_slope = 0.01;
};

struct TrainHyper {
    int epochs = 100;
    int batch_size = 16;
    double lr = 3e-4;
    double weight_decay = 1e-4;
    double lr_lambda = 0.999;
    bool lr_decay_per_step = false; // default decays once per epoch
};

struct GenHyper {
    int inference_steps = 25;
    double image_scale = 1.0; // lambda weight on the image branch
};

struct MetricHyper {
    int acc_n = 50;
    int acc_k = 1;
    int acc_trials = 40;
    int is_splits = 10;
    int ssim_window = 11;
    double ssim_sigma = 1.5;
    double ssim_k1 = 0.01;
    double ssim_k2 = 0.03;
    double ssim_l = 1.0;
};

struct RunConfig {
    int schema_version = 1;
    DataConfig data;
    EncoderHyper encoder;
    TrainHyper train;
    GenHyper gen;
    MetricHyper metric;
};

// JSON round-trip. from_json accepts partial documents: absent fields keep
// their defaults, unknown fields are an error (they are always typos).
std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);

std::vector<std::string> validate_run_config(const RunConfig& cfg);

} // namespace eegdec
