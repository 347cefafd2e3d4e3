#pragma once

#include "eegdec/attention.hpp"
#include "eegdec/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace eegdec {

// Conditioning for one generation: the text-space token grid and the
// image-space embedding produced by the two EEG encoders, the image-branch
// weight lambda, and the ablation drop flags.
struct ConditioningBundle {
    MatF text_tokens;                  // [n_tokens x d_text]
    std::vector<float> image_embedding; // [d_img]
    float lambda = 1.0f;
    bool drop_text = false;  // replace text tokens with the null-text embedding
    bool drop_image = false; // force lambda = 0

    std::vector<std::string> violations() const;
};

struct BackendConfig {
    enum class Kind { toy, real_adapter };
    Kind kind = Kind::toy;
    int inference_steps = 25;
    std::string sampler_id = "ancestral"; // the real adapter runs its own pndm sampler
    int image_size = 8;
    uint64_t seed = 0;

    std::string to_json() const;
    static BackendConfig from_json(const std::string& text);
    std::vector<std::string> violations() const;
};

struct GenerationProvenance {
    std::string recording_id;
    std::string image_checkpoint_hash;
    std::string text_checkpoint_hash;
    std::string backend_checkpoint_hash;
    std::string backend_config_json;
    double lambda = 1.0;
    bool drop_text = false;
    bool drop_image = false;
    uint64_t seed = 0;

    std::string to_json() const;
};

struct GenerationResult {
    Image image;
    GenerationProvenance provenance;
};

// ------------------------------------------------------------------
// Toy diffusion backend: a small conditional denoiser over pixel tokens whose
// every cross-attention layer is the decoupled_cross_attention operation.
// Trained by denoising score matching on a linear noise schedule; sampling is
// ancestral denoising over a subsampled timestep sequence.

struct ToyArchConfig {
    int image_size = 8; // square, <= 16
    int d_model = 32;   // even
    int n_blocks = 2;
    int n_img_tokens = 4;
    int n_text_tokens = 8;
    int d_text = 16;
    int d_img = 32;
    int train_timesteps = 200;

    std::vector<std::string> violations() const;
    std::string to_json() const;
    static ToyArchConfig from_json(const std::string& text);
};

struct ToyTrainConfig {
    int steps = 2000;
    int batch_size = 16;
    double lr = 2e-3;
    double drop_prob_text = 0.1;  // train-time condition dropout
    double drop_prob_image = 0.1;
    double lambda_train = 1.0;
    uint64_t seed = 0;
};

struct ToyTrainItem {
    Image image;
    MatF text_tokens;
    std::vector<float> image_embedding;
};

struct ToyTrainResult {
    std::vector<double> loss_history; // per optimization step
    // Gradient magnitude accumulated on the image-branch parameters; stays
    // zero when lambda is zero throughout (branch-nulling check).
    double image_branch_grad_abs_sum = 0;
};

class ToyBackendModel {
  public:
    ToyBackendModel(const ToyArchConfig& arch, const MatF& null_text_tokens, uint64_t init_seed);
    ~ToyBackendModel();

    const ToyArchConfig& arch() const;
    const MatF& null_text_tokens() const;

    ToyTrainResult train(const std::vector<ToyTrainItem>& items, const ToyTrainConfig& cfg);

    // One denoiser evaluation; exposed for the gradient and branch checks.
    MatF predict_noise(const MatF& x_tokens, int t, const MatF& text_tokens,
                       const std::vector<float>& image_embedding, float lambda) const;

    Image sample(const MatF& text_tokens, const std::vector<float>& image_embedding, float lambda,
                 int inference_steps, uint64_t seed) const;

    void save(const std::string& path) const;
    static std::unique_ptr<ToyBackendModel> load(const std::string& path);
    std::string content_hash() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

ToyTrainResult train_toy_backend(ToyBackendModel& model, const std::vector<ToyTrainItem>& items,
                                 const ToyTrainConfig& cfg);

// ------------------------------------------------------------------
// Backend interface. The toy backend is self-contained; the real adapter is
// an integration point for a pretrained latent-diffusion model and reports
// a descriptive unavailability error when its weights are not reachable.

extern const char* kRealBackendEnvVar; // "EEGDEC_REAL_BACKEND_DIR"

class DiffusionBackend {
  public:
    virtual ~DiffusionBackend() = default;
    virtual Image generate_image(const ConditioningBundle& bundle, const BackendConfig& cfg) = 0;
    virtual MatF null_text_tokens() const = 0;
    virtual std::string checkpoint_hash() const = 0;
};

std::unique_ptr<DiffusionBackend> make_toy_backend(const std::string& checkpoint_path);
std::unique_ptr<DiffusionBackend> make_real_backend_adapter();
std::unique_ptr<DiffusionBackend> make_backend(const BackendConfig& cfg,
                                               const std::string& toy_checkpoint_path);

// Applies the drop flags (drop_text swaps in the backend's null-text
// embedding, drop_image zeroes lambda), runs the backend and attaches
// provenance. Deterministic in (seed, bundle, config).
GenerationResult generate(DiffusionBackend& backend, const ConditioningBundle& bundle,
                          const BackendConfig& cfg, const std::string& recording_id = "");

} // namespace eegdec
