#include "eegdec/metrics.hpp"

#include "eegdec/linalg.hpp"
#include "eegdec/parallel.hpp"
#include "eegdec/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

using json = nlohmann::json;

namespace eegdec {

std::vector<std::string> MetricConfig::violations() const {
    std::vector<std::string> v;
    if (!(acc_k >= 1 && acc_k < acc_n)) v.push_back("requires 1 <= acc_k < acc_n");
    if (acc_trials < 1) v.push_back("acc_trials must be >= 1");
    if (is_splits < 1) v.push_back("is_splits must be >= 1");
    if (ssim_window < 1 || ssim_window % 2 == 0) v.push_back("ssim_window must be odd and >= 1");
    if (!(ssim_sigma > 0)) v.push_back("ssim_sigma must be > 0");
    return v;
}

MetricConfig MetricConfig::from_hyper(const MetricHyper& h, uint64_t seed) {
    MetricConfig c;
    c.acc_n = h.acc_n;
    c.acc_k = h.acc_k;
    c.acc_trials = h.acc_trials;
    c.is_splits = h.is_splits;
    c.ssim_window = h.ssim_window;
    c.ssim_sigma = h.ssim_sigma;
    c.ssim_k1 = h.ssim_k1;
    c.ssim_k2 = h.ssim_k2;
    c.ssim_l = h.ssim_l;
    c.seed = seed;
    return c;
}

std::vector<std::string> MetricReport::violations() const {
    std::vector<std::string> v;
    auto defined = [](double x) { return std::isfinite(x); };
    if (defined(acc) && !(acc >= 0.0 && acc <= 1.0)) v.push_back("acc outside [0, 1]");
    if (defined(is_mean) && !(is_mean >= 1.0 - 1e-9)) v.push_back("is_mean below 1");
    if (defined(fid) && fid < -1e-9) v.push_back("fid negative");
    if (defined(ssim) && !(ssim >= -1.0 - 1e-9 && ssim <= 1.0 + 1e-9)) v.push_back("ssim outside [-1, 1]");
    if (defined(clip_sim) && !(clip_sim >= -1.0 - 1e-9 && clip_sim <= 1.0 + 1e-9))
        v.push_back("clip_sim outside [-1, 1]");
    return v;
}

std::string MetricReport::to_json() const {
    json j;
    j["acc"] = acc;
    j["is_mean"] = is_mean;
    j["is_std"] = is_std;
    j["fid"] = fid;
    j["ssim"] = ssim;
    j["clip_sim"] = clip_sim;
    j["n_generated"] = n_generated;
    j["n_reference"] = n_reference;
    j["config"] = {{"acc_n", config.acc_n},
                   {"acc_k", config.acc_k},
                   {"acc_trials", config.acc_trials},
                   {"is_splits", config.is_splits},
                   {"ssim_window", config.ssim_window},
                   {"ssim_sigma", config.ssim_sigma},
                   {"ssim_k1", config.ssim_k1},
                   {"ssim_k2", config.ssim_k2},
                   {"ssim_l", config.ssim_l},
                   {"feature_extractor_id", config.feature_extractor_id},
                   {"seed", config.seed}};
    return j.dump(2);
}

namespace {

std::string fmt_cell(double v) {
    if (!std::isfinite(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace

std::vector<std::string> MetricReport::csv_cells() const {
    // ACC is stored as a fraction and rendered x100 to match the table scale.
    return {fmt_cell(acc * 100.0), fmt_cell(is_mean), fmt_cell(is_std),
            fmt_cell(fid),         fmt_cell(ssim),    fmt_cell(clip_sim)};
}

// ------------------------------------------------------------------

double nway_topk_acc(const std::vector<std::vector<double>>& class_probs,
                     const std::vector<int>& true_classes, const MetricConfig& cfg) {
    auto viol = cfg.violations();
    if (!viol.empty()) throw ValidationError("nway_topk_acc: " + viol.front());
    if (class_probs.size() != true_classes.size() || class_probs.empty())
        throw ValidationError("nway_topk_acc: need one score row per image");
    const int C = int(class_probs.front().size());
    if (C < cfg.acc_n)
        throw ValidationError("nway_topk_acc: classifier has " + std::to_string(C) +
                              " classes, fewer than N=" + std::to_string(cfg.acc_n));

    Rng base = Rng(cfg.seed).fork("nway");
    std::vector<double> per_image;
    per_image.reserve(class_probs.size());
    std::vector<int> candidates(size_t(C) - 1);

    for (size_t img = 0; img < class_probs.size(); ++img) {
        const auto& probs = class_probs[img];
        if (int(probs.size()) != C)
            throw ValidationError("nway_topk_acc: ragged probability rows");
        int truth = true_classes[img];
        if (truth < 0 || truth >= C)
            throw ValidationError("nway_topk_acc: true class " + std::to_string(truth) +
                                  " not in the classifier's label set");

        size_t w = 0;
        for (int c = 0; c < C; ++c)
            if (c != truth) candidates[w++] = c;

        size_t hits = 0;
        Rng irng = base.fork("img", uint64_t(img));
        for (int trial = 0; trial < cfg.acc_trials; ++trial) {
            Rng trng = irng.fork("trial", uint64_t(trial));
            // Partial Fisher-Yates: first N-1 entries are the distractors.
            for (int j = 0; j < cfg.acc_n - 1; ++j) {
                size_t k = size_t(j) + size_t(trng.uniform_int(uint64_t(candidates.size() - size_t(j))));
                std::swap(candidates[size_t(j)], candidates[k]);
            }
            // Rank by score; equal scores are ordered by a random key so a
            // uniform classifier behaves like chance.
            double s_true = probs[size_t(truth)];
            double key_true = trng.uniform();
            int rank = 0;
            for (int j = 0; j < cfg.acc_n - 1; ++j) {
                double s = probs[size_t(candidates[size_t(j)])];
                double key = trng.uniform();
                if (s > s_true || (s == s_true && key > key_true)) ++rank;
            }
            if (rank < cfg.acc_k) ++hits;
        }
        per_image.push_back(double(hits) / double(cfg.acc_trials));
    }
    return pairwise_mean(per_image);
}

std::pair<double, double> inception_score(const std::vector<std::vector<double>>& class_probs,
                                          int n_splits) {
    if (class_probs.empty()) throw ValidationError("inception_score: no predictions");
    if (n_splits < 1) throw ValidationError("inception_score: n_splits must be >= 1");
    const size_t n = class_probs.size();
    const size_t C = class_probs.front().size();
    if (C == 0) throw ValidationError("inception_score: empty probability rows");
    for (const auto& row : class_probs) {
        if (row.size() != C) throw ValidationError("inception_score: ragged probability rows");
        double sum = 0;
        for (double p : row) {
            if (p < 0) throw ValidationError("inception_score: negative probability");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-5)
            throw ValidationError("inception_score: probability row sums to " + std::to_string(sum) +
                                  ", not 1 (tolerance 1e-5)");
    }

    const size_t splits = std::min(size_t(n_splits), n);
    std::vector<double> split_scores;
    for (size_t s = 0; s < splits; ++s) {
        size_t begin = s * n / splits;
        size_t end = (s + 1) * n / splits;
        if (end <= begin) continue;

        std::vector<double> marginal(C, 0.0);
        for (size_t i = begin; i < end; ++i)
            for (size_t c = 0; c < C; ++c) marginal[c] += class_probs[i][c];
        for (double& q : marginal) q /= double(end - begin);

        std::vector<double> kls;
        kls.reserve(end - begin);
        for (size_t i = begin; i < end; ++i) {
            double kl = 0;
            for (size_t c = 0; c < C; ++c) {
                double p = class_probs[i][c];
                if (p > 0) kl += p * std::log(p / marginal[c]);
            }
            // KL is nonnegative by Gibbs' inequality; roundoff against the
            // averaged marginal can leave a -1e-17 that would pull the score
            // below its analytic floor of 1.
            kls.push_back(kl < 0 ? 0.0 : kl);
        }
        // Mean of identical KLs stays exact: every one-hot row then yields
        // exactly exp(log C) for an evenly covered label set.
        bool all_same = std::all_of(kls.begin(), kls.end(), [&](double k) { return k == kls[0]; });
        double mean_kl = all_same ? kls[0] : pairwise_mean(kls);
        split_scores.push_back(std::exp(mean_kl));
    }

    double mean = pairwise_mean(split_scores);
    double var = 0;
    for (double s : split_scores) var += (s - mean) * (s - mean);
    var /= double(split_scores.size()); // population std over splits
    return {mean, std::sqrt(var)};
}

namespace {

void mean_and_cov(const MatD& x, std::vector<double>& mean, MatD& cov) {
    const size_t n = x.rows, d = x.cols;
    mean.assign(d, 0.0);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) mean[j] += x(i, j);
    for (double& m : mean) m /= double(n);
    cov = MatD(d, d);
    for (size_t i = 0; i < n; ++i) {
        for (size_t a = 0; a < d; ++a) {
            double da = x(i, a) - mean[a];
            if (da == 0.0) continue;
            for (size_t b = 0; b < d; ++b) cov(a, b) += da * (x(i, b) - mean[b]);
        }
    }
    for (double& v : cov.v) v /= double(n - 1); // unbiased
}

} // namespace

double frechet_distance(const MatD& a, const MatD& b) {
    if (a.cols == 0 || a.cols != b.cols)
        throw ValidationError("frechet_distance: feature widths differ or are zero");
    if (a.rows < 2 || b.rows < 2)
        throw ValidationError("frechet_distance: need at least 2 samples per side");
    if (!all_finite(a) || !all_finite(b))
        throw ValidationError("frechet_distance: non-finite features");

    std::vector<double> mu_a, mu_b;
    MatD cov_a, cov_b;
    mean_and_cov(a, mu_a, cov_a);
    mean_and_cov(b, mu_b, cov_b);

    const size_t d = a.cols;
    double mean_term = 0;
    for (size_t j = 0; j < d; ++j) {
        double diff = mu_a[j] - mu_b[j];
        mean_term += diff * diff;
    }

    // Tr((Sa Sb)^{1/2}) = Tr((sqrt(Sa) Sb sqrt(Sa))^{1/2}); the inner matrix
    // is symmetric PSD, so the eigenvalue route is safe.
    MatD sqrt_a = sym_sqrt_psd(cov_a);
    MatD m = matmul(matmul(sqrt_a, cov_b), sqrt_a);
    for (size_t r = 0; r < d; ++r)
        for (size_t c = r + 1; c < d; ++c) {
            double v = 0.5 * (m(r, c) + m(c, r));
            m(r, c) = v;
            m(c, r) = v;
        }
    SymEig e = sym_eig(m);
    double tr_sqrt = 0;
    for (double lam : e.values) tr_sqrt += lam > 0 ? std::sqrt(lam) : 0.0;

    double tr_a = 0, tr_b = 0;
    for (size_t j = 0; j < d; ++j) {
        tr_a += cov_a(j, j);
        tr_b += cov_b(j, j);
    }
    double fid = mean_term + tr_a + tr_b - 2.0 * tr_sqrt;
    return fid < 0 ? 0.0 : fid; // roundoff can leave a tiny negative total
}

namespace {

std::vector<double> luma(const Image& img) {
    std::vector<double> out(size_t(img.height) * size_t(img.width));
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = 0.299 * img.rgb[i * 3] + 0.587 * img.rgb[i * 3 + 1] + 0.114 * img.rgb[i * 3 + 2];
    return out;
}

} // namespace

double ssim(const Image& a, const Image& b, const MetricConfig& cfg) {
    auto viol = cfg.violations();
    if (!viol.empty()) throw ValidationError("ssim: " + viol.front());
    if (!a.same_shape(b))
        throw ValidationError("ssim: image shapes differ ([" + std::to_string(a.height) + "x" +
                              std::to_string(a.width) + "] vs [" + std::to_string(b.height) + "x" +
                              std::to_string(b.width) + "])");
    const int W = cfg.ssim_window;
    if (a.height < W || a.width < W)
        throw ValidationError("ssim: image " + std::to_string(a.height) + "x" +
                              std::to_string(a.width) + " is smaller than the " + std::to_string(W) +
                              "x" + std::to_string(W) + " window");

    std::vector<double> kernel(size_t(W) * size_t(W));
    const int half = W / 2;
    double ksum = 0;
    for (int y = 0; y < W; ++y)
        for (int x = 0; x < W; ++x) {
            double dy = y - half, dx = x - half;
            double v = std::exp(-(dx * dx + dy * dy) / (2.0 * cfg.ssim_sigma * cfg.ssim_sigma));
            kernel[size_t(y) * size_t(W) + size_t(x)] = v;
            ksum += v;
        }
    for (double& v : kernel) v /= ksum;

    std::vector<double> la = luma(a), lb = luma(b);
    const double c1 = (cfg.ssim_k1 * cfg.ssim_l) * (cfg.ssim_k1 * cfg.ssim_l);
    const double c2 = (cfg.ssim_k2 * cfg.ssim_l) * (cfg.ssim_k2 * cfg.ssim_l);

    std::vector<double> local;
    local.reserve(size_t(a.height - W + 1) * size_t(a.width - W + 1));
    for (int y = 0; y + W <= a.height; ++y) {
        for (int x = 0; x + W <= a.width; ++x) {
            double m1 = 0, m2 = 0, s11 = 0, s22 = 0, s12 = 0;
            for (int ky = 0; ky < W; ++ky)
                for (int kx = 0; kx < W; ++kx) {
                    double w = kernel[size_t(ky) * size_t(W) + size_t(kx)];
                    double va = la[size_t(y + ky) * size_t(a.width) + size_t(x + kx)];
                    double vb = lb[size_t(y + ky) * size_t(a.width) + size_t(x + kx)];
                    m1 += w * va;
                    m2 += w * vb;
                    s11 += w * va * va;
                    s22 += w * vb * vb;
                    s12 += w * va * vb;
                }
            double var1 = s11 - m1 * m1;
            double var2 = s22 - m2 * m2;
            double cov = s12 - m1 * m2;
            local.push_back(((2 * m1 * m2 + c1) * (2 * cov + c2)) /
                            ((m1 * m1 + m2 * m2 + c1) * (var1 + var2 + c2)));
        }
    }
    return pairwise_mean(local);
}

double embedding_similarity(const std::vector<Image>& generated, const std::vector<Image>& reference,
                            const ImageFeatureExtractor& extractor,
                            const std::vector<std::string>* names) {
    if (generated.size() != reference.size() || generated.empty())
        throw ValidationError("embedding_similarity: need equal-length non-empty image lists");
    std::vector<double> sims;
    sims.reserve(generated.size());
    for (size_t i = 0; i < generated.size(); ++i) {
        std::vector<float> ea = extractor(generated[i]);
        std::vector<float> eb = extractor(reference[i]);
        auto norm = [](const std::vector<float>& v) {
            double s = 0;
            for (float x : v) s += double(x) * double(x);
            return std::sqrt(s);
        };
        if (norm(ea) == 0.0 || norm(eb) == 0.0) {
            std::string which = names && i < names->size() ? (*names)[i] : ("pair " + std::to_string(i));
            throw ValidationError("embedding_similarity: zero-norm embedding for " + which);
        }
        sims.push_back(cosine_similarity(ea, eb));
    }
    return pairwise_mean(sims);
}

MetricReport evaluate_all(const std::vector<Image>& generated, const std::vector<Image>& reference,
                          const std::vector<int>& true_classes, const ImageClassifier& classifier,
                          const ImageFeatureExtractor& extractor, const MetricConfig& cfg) {
    if (generated.size() != reference.size() || generated.empty())
        throw ValidationError("evaluate_all: need paired generated/reference images");

    MetricReport r;
    r.config = cfg;
    r.n_generated = generated.size();
    r.n_reference = reference.size();

    if (!true_classes.empty() && classifier) {
        if (true_classes.size() != generated.size())
            throw ValidationError("evaluate_all: class list length mismatch");
        std::vector<std::vector<double>> probs(generated.size());
        parallel_for(generated.size(), cfg.threads,
                     [&](size_t i) { probs[i] = classifier(generated[i]); });
        r.acc = nway_topk_acc(probs, true_classes, cfg);
        auto [ism, iss] = inception_score(probs, cfg.is_splits);
        r.is_mean = ism;
        r.is_std = iss;
    } else {
        r.acc = std::nan("");
        r.is_mean = std::nan("");
        r.is_std = std::nan("");
    }

    // Feature extraction fans out over the worker pool; results are keyed by
    // index so the reduction is order-independent.
    MatD fa(generated.size(), 0), fb(reference.size(), 0);
    {
        std::vector<std::vector<float>> ea(generated.size()), eb(reference.size());
        parallel_for(generated.size(), cfg.threads,
                     [&](size_t i) { ea[i] = extractor(generated[i]); });
        parallel_for(reference.size(), cfg.threads,
                     [&](size_t i) { eb[i] = extractor(reference[i]); });
        fa = MatD(ea.size(), ea.front().size());
        fb = MatD(eb.size(), eb.front().size());
        for (size_t i = 0; i < ea.size(); ++i)
            for (size_t j = 0; j < ea[i].size(); ++j) fa(i, j) = ea[i][j];
        for (size_t i = 0; i < eb.size(); ++i)
            for (size_t j = 0; j < eb[i].size(); ++j) fb(i, j) = eb[i][j];
    }
    r.fid = frechet_distance(fa, fb);

    std::vector<double> ssims;
    for (size_t i = 0; i < generated.size(); ++i) ssims.push_back(ssim(generated[i], reference[i], cfg));
    r.ssim = pairwise_mean(ssims);

    r.clip_sim = embedding_similarity(generated, reference, extractor);

    auto viol = r.violations();
    if (!viol.empty()) throw Error("evaluate_all: inconsistent report: " + viol.front());
    return r;
}

PrototypeClassifier PrototypeClassifier::fit(const std::vector<Image>& reference,
                                             const std::vector<int>& classes, int n_classes) {
    if (reference.size() != classes.size() || reference.empty())
        throw ValidationError("prototype classifier: need one class per reference image");
    PrototypeClassifier pc;
    pc.prototypes.assign(size_t(n_classes), {0.0, 0.0, 0.0});
    std::vector<size_t> counts(size_t(n_classes), 0);
    for (size_t i = 0; i < reference.size(); ++i) {
        int c = classes[i];
        if (c < 0 || c >= n_classes)
            throw ValidationError("prototype classifier: class id out of range");
        const Image& img = reference[i];
        double acc_c[3] = {0, 0, 0};
        for (size_t p = 0; p < img.rgb.size(); p += 3)
            for (int k = 0; k < 3; ++k) acc_c[k] += img.rgb[p + size_t(k)];
        double n_px = double(img.rgb.size() / 3);
        for (int k = 0; k < 3; ++k) pc.prototypes[size_t(c)][size_t(k)] += acc_c[k] / n_px;
        counts[size_t(c)]++;
    }
    for (size_t c = 0; c < pc.prototypes.size(); ++c) {
        if (counts[c] == 0)
            throw ValidationError("prototype classifier: class " + std::to_string(c) +
                                  " has no reference images");
        for (int k = 0; k < 3; ++k) pc.prototypes[c][size_t(k)] /= double(counts[c]);
    }
    return pc;
}

std::vector<double> PrototypeClassifier::operator()(const Image& img) const {
    double mean[3] = {0, 0, 0};
    for (size_t p = 0; p < img.rgb.size(); p += 3)
        for (int k = 0; k < 3; ++k) mean[k] += img.rgb[p + size_t(k)];
    for (double& m : mean) m /= double(img.rgb.size() / 3);

    std::vector<double> logits(prototypes.size());
    for (size_t c = 0; c < prototypes.size(); ++c) {
        double d2 = 0;
        for (int k = 0; k < 3; ++k) {
            double d = mean[k] - prototypes[c][size_t(k)];
            d2 += d * d;
        }
        logits[c] = -d2 / temperature;
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0;
    for (double& l : logits) {
        l = std::exp(l - mx);
        sum += l;
    }
    for (double& l : logits) l /= sum;
    return logits;
}

int PrototypeClassifier::predict(const Image& img) const {
    std::vector<double> p = (*this)(img);
    return int(std::max_element(p.begin(), p.end()) - p.begin());
}

} // namespace eegdec
