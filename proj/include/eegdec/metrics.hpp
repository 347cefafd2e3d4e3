#pragma once

#include "eegdec/config.hpp"
#include "eegdec/types.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace eegdec {

// Per-image class scores from a pluggable classifier; rows are probability
// vectors over the classifier's label set.
using ImageClassifier = std::function<std::vector<double>(const Image&)>;
// Pluggable feature extractor for the distribution distance and the pairwise
// embedding similarity.
using ImageFeatureExtractor = std::function<std::vector<float>(const Image&)>;

struct MetricConfig {
    int acc_n = 50;
    int acc_k = 1;
    int acc_trials = 40;
    int is_splits = 10;
    int ssim_window = 11;
    double ssim_sigma = 1.5;
    double ssim_k1 = 0.01;
    double ssim_k2 = 0.03;
    double ssim_l = 1.0;
    std::string feature_extractor_id;
    uint64_t seed = 0;
    int threads = 1; // worker pool for per-image feature extraction

    std::vector<std::string> violations() const;
    static MetricConfig from_hyper(const MetricHyper& h, uint64_t seed);
};

struct MetricReport {
    double acc = 0;     // fraction in [0, 1]; formatted x100 for table parity
    double is_mean = 0;
    double is_std = 0;
    double fid = 0;
    double ssim = 0;
    double clip_sim = 0;
    size_t n_generated = 0;
    size_t n_reference = 0;
    MetricConfig config;

    std::vector<std::string> violations() const;
    std::string to_json() const;
    // CSV cells in table column order: acc(x100), is_mean, is_std, fid, ssim, cs.
    std::vector<std::string> csv_cells() const;
};

// N-way top-K classification accuracy: per trial, N-1 distractor classes are
// drawn uniformly without replacement, the restricted scores ranked (ties
// broken by a seeded random key), success iff the true class lands in the
// top K. Averaged over images x trials.
double nway_topk_acc(const std::vector<std::vector<double>>& class_probs,
                     const std::vector<int>& true_classes, const MetricConfig& cfg);

// exp(mean KL(p(y|x) || marginal)) per split; returns mean and population
// standard deviation over splits.
std::pair<double, double> inception_score(const std::vector<std::vector<double>>& class_probs,
                                          int n_splits);

// Distribution distance between Gaussian fits of two feature sets
// (unbiased covariances; PSD-clipped symmetric matrix square root; tiny
// negative totals from roundoff clipped to zero).
double frechet_distance(const MatD& features_a, const MatD& features_b);

// Gaussian-windowed structural similarity on Rec.601 luma, mean over valid
// window positions.
double ssim(const Image& a, const Image& b, const MetricConfig& cfg);

// Mean cosine similarity of extractor embeddings over paired images.
double embedding_similarity(const std::vector<Image>& generated,
                            const std::vector<Image>& reference,
                            const ImageFeatureExtractor& extractor,
                            const std::vector<std::string>* names = nullptr);

// Runs all five metrics over paired generated/reference images.
// true_classes may be empty: ACC and IS are reported as NaN then.
MetricReport evaluate_all(const std::vector<Image>& generated, const std::vector<Image>& reference,
                          const std::vector<int>& true_classes, const ImageClassifier& classifier,
                          const ImageFeatureExtractor& extractor, const MetricConfig& cfg);

// Nearest-color-prototype classifier over per-class mean colors, computed
// from reference images. Scores are softmax of negative squared distance.
struct PrototypeClassifier {
    std::vector<std::array<double, 3>> prototypes; // per class mean RGB
    double temperature = 0.01;

    static PrototypeClassifier fit(const std::vector<Image>& reference,
                                   const std::vector<int>& classes, int n_classes);
    std::vector<double> operator()(const Image& img) const;
    int predict(const Image& img) const;
};

} // namespace eegdec
