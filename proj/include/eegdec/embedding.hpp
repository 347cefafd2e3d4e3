#pragma once

#include "eegdec/mat.hpp"
#include "eegdec/types.hpp"

#include <memory>
#include <string>

namespace eegdec {

// Frozen embedding spaces the EEG encoders are aligned against, and the
// feature extractor used by the evaluation metrics. Pretrained extractors
// plug in behind this interface; the deterministic stand-in below lets the
// whole pipeline run without any external weights.
class EmbeddingProvider {
  public:
    virtual ~EmbeddingProvider() = default;

    virtual std::string id() const = 0;
    virtual int d_img() const = 0;
    virtual int d_text() const = 0;
    virtual int n_tokens() const = 0;

    // Image-space embedding, length d_img.
    virtual std::vector<float> image_embedding(const Image& img) = 0;

    // Text-space token grid [n_tokens x d_text]. The empty string is allowed
    // here (it defines the null-text embedding used to drop the text branch).
    virtual MatF text_embedding(const std::string& text) = 0;
};

struct StandinExtractorConfig {
    uint64_t seed = 0;
    int d_img = 32;
    int d_text = 16;
    int n_tokens = 8;
};

// Deterministic stand-in: a fixed seeded random linear projection of pooled
// pixels (images) or of a bag-of-bytes histogram (text), followed by layer
// normalization. Pure: identical inputs yield identical embeddings.
std::unique_ptr<EmbeddingProvider> make_standin_extractor(const StandinExtractorConfig& cfg);

// Builds a provider from a JSON config {"kind": "standin", ...}. Unknown
// kinds raise a descriptive error; "external" documents the plug-in contract.
std::unique_ptr<EmbeddingProvider> make_embedding_provider(const std::string& json_config);

// Wraps a provider so text embeddings collapse to the token-mean vector
// (a 1 x d_text grid). Alignment-diagnostic option; the diffusion backend
// itself consumes full token grids.
std::unique_ptr<EmbeddingProvider> make_pooled_text_provider(std::unique_ptr<EmbeddingProvider> inner);

} // namespace eegdec
