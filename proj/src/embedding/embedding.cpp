#include "eegdec/embedding.hpp"

#include "eegdec/errors.hpp"
#include "eegdec/rng.hpp"

#include <json.hpp>

#include <cmath>

using json = nlohmann::json;

namespace eegdec {

namespace {

// Layer norm with epsilon; an all-equal input maps to all zeros.
void layer_norm(float* x, size_t n) {
    double mean = 0;
    for (size_t i = 0; i < n; ++i) mean += x[i];
    mean /= double(n);
    double var = 0;
    for (size_t i = 0; i < n; ++i) {
        double d = x[i] - mean;
        var += d * d;
    }
    var /= double(n);
    double inv = 1.0 / std::sqrt(var + 1e-5);
    for (size_t i = 0; i < n; ++i) x[i] = float((x[i] - mean) * inv);
}

constexpr int kPoolGrid = 8; // images are pooled to 8x8x3 features

class StandinExtractor final : public EmbeddingProvider {
  public:
    explicit StandinExtractor(const StandinExtractorConfig& cfg) : cfg_(cfg) {
        if (cfg.d_img < 1 || cfg.d_text < 1 || cfg.n_tokens < 1)
            throw ValidationError("standin extractor: dimensions must be >= 1");
        const int img_feats = kPoolGrid * kPoolGrid * 3;
        Rng ri = Rng(cfg.seed).fork("standin_img");
        w_img_ = MatF(size_t(cfg.d_img), size_t(img_feats));
        for (float& x : w_img_.v) x = float(ri.normal() / std::sqrt(double(img_feats)));
        Rng rt = Rng(cfg.seed).fork("standin_text");
        w_text_ = MatF(size_t(cfg.n_tokens) * size_t(cfg.d_text), 256);
        for (float& x : w_text_.v) x = float(rt.normal() / 16.0);
    }

    std::string id() const override {
        return "standin-v1-seed" + std::to_string(cfg_.seed) + "-i" + std::to_string(cfg_.d_img) +
               "-t" + std::to_string(cfg_.n_tokens) + "x" + std::to_string(cfg_.d_text);
    }
    int d_img() const override { return cfg_.d_img; }
    int d_text() const override { return cfg_.d_text; }
    int n_tokens() const override { return cfg_.n_tokens; }

    std::vector<float> image_embedding(const Image& img) override {
        if (img.height < 1 || img.width < 1)
            throw ValidationError("standin extractor: empty image");
        // Box-average the image onto a fixed grid so any input size works.
        std::vector<float> feats(kPoolGrid * kPoolGrid * 3, 0.0f);
        for (int gy = 0; gy < kPoolGrid; ++gy) {
            int y0 = gy * img.height / kPoolGrid, y1 = (gy + 1) * img.height / kPoolGrid;
            if (y1 <= y0) y1 = y0 + 1;
            for (int gx = 0; gx < kPoolGrid; ++gx) {
                int x0 = gx * img.width / kPoolGrid, x1 = (gx + 1) * img.width / kPoolGrid;
                if (x1 <= x0) x1 = x0 + 1;
                double acc[3] = {0, 0, 0};
                int count = 0;
                for (int y = y0; y < y1 && y < img.height; ++y)
                    for (int x = x0; x < x1 && x < img.width; ++x, ++count)
                        for (int c = 0; c < 3; ++c) acc[c] += img.at(y, x, c);
                for (int c = 0; c < 3; ++c)
                    feats[(size_t(gy) * kPoolGrid + gx) * 3 + size_t(c)] =
                        count ? float(acc[c] / count) : 0.0f;
            }
        }
        std::vector<float> out(size_t(cfg_.d_img), 0.0f);
        for (int i = 0; i < cfg_.d_img; ++i) {
            const float* wr = w_img_.row(size_t(i));
            double s = 0;
            for (size_t k = 0; k < feats.size(); ++k) s += double(wr[k]) * feats[k];
            out[size_t(i)] = float(s);
        }
        layer_norm(out.data(), out.size());
        return out;
    }

    MatF text_embedding(const std::string& text) override {
        // Bag-of-bytes histogram; the empty caption maps to the zero grid.
        std::vector<float> hist(256, 0.0f);
        for (unsigned char c : text) hist[c] += 1.0f;
        MatF grid(size_t(cfg_.n_tokens), size_t(cfg_.d_text));
        for (size_t r = 0; r < grid.size(); ++r) {
            const float* wr = w_text_.row(r);
            double s = 0;
            for (int k = 0; k < 256; ++k) s += double(wr[k]) * hist[size_t(k)];
            grid.v[r] = float(s);
        }
        if (!text.empty())
            for (size_t t = 0; t < grid.rows; ++t) layer_norm(grid.row(t), grid.cols);
        return grid;
    }

  private:
    StandinExtractorConfig cfg_;
    MatF w_img_;
    MatF w_text_;
};

} // namespace

namespace {

class PooledTextProvider final : public EmbeddingProvider {
  public:
    explicit PooledTextProvider(std::unique_ptr<EmbeddingProvider> inner)
        : inner_(std::move(inner)) {}

    std::string id() const override { return inner_->id() + "-pooledtext"; }
    int d_img() const override { return inner_->d_img(); }
    int d_text() const override { return inner_->d_text(); }
    int n_tokens() const override { return 1; }

    std::vector<float> image_embedding(const Image& img) override {
        return inner_->image_embedding(img);
    }
    MatF text_embedding(const std::string& text) override {
        MatF grid = inner_->text_embedding(text);
        MatF pooled(1, grid.cols);
        for (size_t r = 0; r < grid.rows; ++r)
            for (size_t c = 0; c < grid.cols; ++c) pooled(0, c) += grid(r, c);
        for (float& v : pooled.v) v /= float(grid.rows);
        return pooled;
    }

  private:
    std::unique_ptr<EmbeddingProvider> inner_;
};

} // namespace

std::unique_ptr<EmbeddingProvider> make_standin_extractor(const StandinExtractorConfig& cfg) {
    return std::make_unique<StandinExtractor>(cfg);
}

std::unique_ptr<EmbeddingProvider> make_pooled_text_provider(
    std::unique_ptr<EmbeddingProvider> inner) {
    return std::make_unique<PooledTextProvider>(std::move(inner));
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const std::string& json_config) {
    json j;
    try {
        j = json::parse(json_config);
    } catch (const json::exception& e) {
        throw ParseError(std::string("extractor config: ") + e.what());
    }
    std::string kind = j.value("kind", "standin");
    if (kind == "standin") {
        StandinExtractorConfig cfg;
        cfg.seed = j.value("seed", uint64_t(0));
        cfg.d_img = j.value("d_img", cfg.d_img);
        cfg.d_text = j.value("d_text", cfg.d_text);
        cfg.n_tokens = j.value("n_tokens", cfg.n_tokens);
        return make_standin_extractor(cfg);
    }
    if (kind == "external")
        throw Error("extractor config: kind 'external' names the pretrained plug-in interface; "
                    "no external extractor is linked into this build. Use kind 'standin', or link "
                    "a provider implementing EmbeddingProvider.");
    throw ValidationError("extractor config: unknown kind '" + kind + "'");
}

} // namespace eegdec
