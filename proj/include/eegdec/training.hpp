#pragma once

#include "eegdec/caption.hpp"
#include "eegdec/embedding.hpp"
#include "eegdec/encoder.hpp"
#include "eegdec/manifest.hpp"

#include <functional>
#include <string>
#include <vector>

namespace eegdec {

struct TrainConfig {
    int epochs = 100;
    int batch_size = 16;
    double lr = 3e-4;
    double weight_decay = 1e-4;
    double lr_lambda = 0.999;
    bool lr_decay_per_step = false;
    uint64_t seed = 0;
    TargetSpace space = TargetSpace::image;

    std::vector<std::string> violations() const;
};

// Adam with decoupled weight decay. Parameters and moments live in flat
// buffers so the encoder and the toy denoiser share one optimizer.
struct AdamW {
    std::vector<float> m, v;
    int64_t step_count = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void step(std::vector<float>& params, const std::vector<float>& grads, double lr,
              double weight_decay);
};

// Mean over all elements of squared difference.
double mse_loss(const float* pred, const float* target, size_t n);
double mse_loss(const std::vector<float>& pred, const std::vector<float>& target);
double mse_loss(const MatF& pred, const MatF& target);

// ------------------------------------------------------------------
// Target cache ("EEGT" container): precomputed alignment targets, one per
// recording, uniform shape. Building is idempotent (a complete cache with a
// matching identity hash is never recomputed) and resumable (a provider
// failure persists the partial cache before aborting).

struct TargetCache {
    std::string extractor_id;
    TargetSpace space = TargetSpace::image;
    size_t rows = 0, cols = 0;              // per-item target shape
    std::vector<std::string> recording_ids; // sorted
    std::vector<float> data;                // recording-major, rows*cols each
    size_t n_complete = 0;
    std::string identity_hash; // hash of (extractor, space, ids, shape)

    bool complete() const { return n_complete == recording_ids.size(); }
    MatF target_for(const std::string& recording_id) const;
    const float* row_ptr(size_t index) const { return data.data() + index * rows * cols; }
    std::string content_hash() const;
};

void save_target_cache(const std::string& path, const TargetCache& cache);
TargetCache load_target_cache(const std::string& path);

struct CacheBuildStats {
    size_t provider_calls = 0;
    bool reused = false;
};

// Builds (or resumes/reuses) the cache for every recording in the manifest.
// Image space embeds each recording's stimulus; text space embeds its caption.
TargetCache build_target_cache(const DatasetManifest& manifest, EmbeddingProvider& provider,
                               TargetSpace space, const CaptionProvider* captions,
                               const std::string& cache_path, CacheBuildStats* stats = nullptr);

// ------------------------------------------------------------------
// Alignment training (minibatch Adam on MSE against cached targets).

struct EpochStats {
    int epoch = 0;
    double train_mse = 0;
    double val_mse = 0;
    double lr = 0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = -1;
    double best_val_mse = 0;
};

// Preloaded signals keyed by recording id (all float32).
using SignalStore = std::function<const MatF&(const std::string& recording_id)>;

SignalStore load_signals_in_memory(const DatasetManifest& manifest);

// Trains in place; returns per-epoch history. The encoder ends at the
// best-validation parameters (last epoch when the val split is empty).
TrainResult train_alignment(LstmEncoder<float>& encoder, const DatasetManifest& manifest,
                            const TargetCache& cache, const TrainConfig& cfg,
                            const SignalStore& signals);

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);

struct AlignmentEval {
    double mse = 0;
    double retrieval_top1 = 0;
    size_t n = 0;
};

using EncoderForward = std::function<std::vector<float>(const MatF& signal)>;

// MSE plus top-1 retrieval: the fraction of recordings whose output is
// nearest (cosine) to their own target among all targets in the split. Ties
// at the maximum count as success (identical stimuli share one target).
AlignmentEval eval_alignment(const EncoderForward& forward, const DatasetManifest& manifest,
                             const TargetCache& cache, Split split, const SignalStore& signals);

} // namespace eegdec
