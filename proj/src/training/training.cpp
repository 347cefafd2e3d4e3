#include "eegdec/training.hpp"

#include "eegdec/container.hpp"
#include "eegdec/png_io.hpp"
#include "eegdec/rng.hpp"
#include "eegdec/sha256.hpp"
#include "eegdec/signal_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <unordered_map>

using json = nlohmann::json;

namespace eegdec {

std::vector<std::string> TrainConfig::violations() const {
    std::vector<std::string> v;
    if (epochs < 1) v.push_back("epochs must be >= 1");
    if (batch_size < 2) v.push_back("batch_size must be >= 2 (batch-norm constraint)");
    if (!(lr > 0)) v.push_back("lr must be > 0");
    if (!(lr_lambda > 0 && lr_lambda <= 1)) v.push_back("lr_lambda must be in (0, 1]");
    if (weight_decay < 0) v.push_back("weight_decay must be >= 0");
    return v;
}

void AdamW::step(std::vector<float>& params, const std::vector<float>& grads, double lr,
                 double weight_decay) {
    if (params.size() != grads.size())
        throw ValidationError("adam: parameter/gradient size mismatch");
    if (m.empty()) {
        m.assign(params.size(), 0.0f);
        v.assign(params.size(), 0.0f);
    }
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, double(step_count));
    const double bc2 = 1.0 - std::pow(beta2, double(step_count));
    for (size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        double mi = beta1 * m[i] + (1.0 - beta1) * g;
        double vi = beta2 * v[i] + (1.0 - beta2) * g * g;
        m[i] = float(mi);
        v[i] = float(vi);
        double mhat = mi / bc1;
        double vhat = vi / bc2;
        // Decoupled weight decay: the decay term never touches the moments.
        params[i] = float(params[i] - lr * (mhat / (std::sqrt(vhat) + eps)) -
                          lr * weight_decay * params[i]);
    }
}

double mse_loss(const float* pred, const float* target, size_t n) {
    if (n == 0) throw ValidationError("mse_loss: empty input");
    double acc = 0;
    for (size_t i = 0; i < n; ++i) {
        double d = double(pred[i]) - double(target[i]);
        acc += d * d;
    }
    return acc / double(n);
}

double mse_loss(const std::vector<float>& pred, const std::vector<float>& target) {
    if (pred.size() != target.size())
        throw ValidationError("mse_loss: shape mismatch (" + std::to_string(pred.size()) + " vs " +
                              std::to_string(target.size()) + ")");
    return mse_loss(pred.data(), target.data(), pred.size());
}

double mse_loss(const MatF& pred, const MatF& target) {
    if (!pred.same_shape(target))
        throw ValidationError("mse_loss: shape mismatch ([" + std::to_string(pred.rows) + "x" +
                              std::to_string(pred.cols) + "] vs [" + std::to_string(target.rows) +
                              "x" + std::to_string(target.cols) + "])");
    return mse_loss(pred.v.data(), target.v.data(), pred.size());
}

// ------------------------------------------------------------------
// target cache

MatF TargetCache::target_for(const std::string& recording_id) const {
    auto it = std::lower_bound(recording_ids.begin(), recording_ids.end(), recording_id);
    if (it == recording_ids.end() || *it != recording_id)
        throw ValidationError("target cache: no entry for recording " + recording_id);
    size_t idx = size_t(it - recording_ids.begin());
    if (idx >= n_complete)
        throw ValidationError("target cache: entry for " + recording_id + " is not computed yet");
    MatF m(rows, cols);
    std::copy(row_ptr(idx), row_ptr(idx) + rows * cols, m.v.begin());
    return m;
}

namespace {

std::string cache_identity_hash(const std::string& extractor_id, TargetSpace space,
                                const std::vector<std::string>& ids, size_t rows, size_t cols) {
    Sha256 h;
    h.update(extractor_id);
    h.update(to_string(space));
    h.update(std::to_string(rows) + "x" + std::to_string(cols));
    for (const auto& id : ids) {
        h.update(id);
        h.update("\n", 1);
    }
    return h.hex_digest();
}

} // namespace

std::string TargetCache::content_hash() const {
    Sha256 h;
    h.update(identity_hash);
    h.update(std::to_string(n_complete));
    if (!data.empty()) h.update(data.data(), n_complete * rows * cols * sizeof(float));
    return h.hex_digest();
}

void save_target_cache(const std::string& path, const TargetCache& cache) {
    Container c;
    c.magic = "EEGT";
    json h;
    h["kind"] = "target_cache";
    h["extractor_id"] = cache.extractor_id;
    h["space"] = to_string(cache.space);
    h["rows"] = cache.rows;
    h["cols"] = cache.cols;
    h["recording_ids"] = cache.recording_ids;
    h["n_complete"] = cache.n_complete;
    h["identity_hash"] = cache.identity_hash;
    c.header_json = h.dump();
    c.payload = cache.data;
    write_container(path, c);
}

TargetCache load_target_cache(const std::string& path) {
    Container c = read_container(path, "EEGT", 1);
    json h;
    try {
        h = json::parse(c.header_json);
    } catch (const json::exception& e) {
        throw ParseError(path + ": bad cache header: " + e.what());
    }
    TargetCache t;
    t.extractor_id = h.at("extractor_id").get<std::string>();
    t.space = target_space_from_string(h.at("space").get<std::string>());
    t.rows = h.at("rows").get<size_t>();
    t.cols = h.at("cols").get<size_t>();
    t.recording_ids = h.at("recording_ids").get<std::vector<std::string>>();
    t.n_complete = h.at("n_complete").get<size_t>();
    t.identity_hash = h.at("identity_hash").get<std::string>();
    t.data = std::move(c.payload);
    if (t.data.size() != t.recording_ids.size() * t.rows * t.cols)
        throw ParseError(path + ": cache payload size mismatch");
    return t;
}

TargetCache build_target_cache(const DatasetManifest& manifest, EmbeddingProvider& provider,
                               TargetSpace space, const CaptionProvider* captions,
                               const std::string& cache_path, CacheBuildStats* stats) {
    if (space == TargetSpace::text && captions == nullptr)
        throw ValidationError("build_target_cache: text space needs a caption provider");

    std::vector<std::string> ids;
    ids.reserve(manifest.recordings.size());
    for (const auto& r : manifest.recordings) ids.push_back(r.recording_id);
    std::sort(ids.begin(), ids.end());

    size_t rows = space == TargetSpace::image ? 1 : size_t(provider.n_tokens());
    size_t cols = space == TargetSpace::image ? size_t(provider.d_img()) : size_t(provider.d_text());
    std::string identity = cache_identity_hash(provider.id(), space, ids, rows, cols);

    CacheBuildStats st;
    TargetCache cache;
    if (std::filesystem::exists(cache_path)) {
        TargetCache existing = load_target_cache(cache_path);
        if (existing.identity_hash == identity) {
            if (existing.complete()) {
                // Idempotent rerun: hash hit, zero provider calls.
                if (stats) {
                    st.reused = true;
                    *stats = st;
                }
                return existing;
            }
            cache = std::move(existing); // resume a partial build
        }
    }
    if (cache.recording_ids.empty()) {
        cache.extractor_id = provider.id();
        cache.space = space;
        cache.rows = rows;
        cache.cols = cols;
        cache.recording_ids = ids;
        cache.identity_hash = identity;
        cache.data.assign(ids.size() * rows * cols, 0.0f);
        cache.n_complete = 0;
    }

    // Identical inputs map to identical targets (providers are pure), so
    // memoize on content: pixel bytes for images, the caption string for
    // text. Provider calls then scale with distinct inputs, not recordings.
    std::unordered_map<std::string, std::vector<float>> memo;
    for (size_t i = cache.n_complete; i < cache.recording_ids.size(); ++i) {
        const RecordingEntry* rec = manifest.find_recording(cache.recording_ids[i]);
        if (!rec)
            throw ValidationError("build_target_cache: manifest lost recording " +
                                  cache.recording_ids[i]);
        try {
            std::string key;
            std::vector<float> flat;
            if (space == TargetSpace::image) {
                const StimulusEntry* stim = manifest.find_stimulus(rec->stimulus_id);
                if (!stim)
                    throw ValidationError("no stimulus " + rec->stimulus_id + " for recording " +
                                          rec->recording_id);
                Image img = read_png(manifest.image_path(*stim));
                key = "img:" + sha256_hex(img.rgb.data(), img.rgb.size() * sizeof(float));
                auto it = memo.find(key);
                if (it == memo.end()) {
                    flat = provider.image_embedding(img);
                    ++st.provider_calls;
                    memo[key] = flat;
                } else {
                    flat = it->second;
                }
            } else {
                Caption cap = captions->caption_for_stimulus(rec->stimulus_id);
                key = "cap:" + cap.text;
                auto it = memo.find(key);
                if (it == memo.end()) {
                    MatF grid = provider.text_embedding(cap.text);
                    ++st.provider_calls;
                    flat = grid.v;
                    memo[key] = flat;
                } else {
                    flat = it->second;
                }
            }
            if (flat.size() != rows * cols)
                throw Error("provider returned wrong shape for " + rec->recording_id);
            std::copy(flat.begin(), flat.end(), cache.data.begin() + std::ptrdiff_t(i * rows * cols));
            cache.n_complete = i + 1;
        } catch (const std::exception& e) {
            // Persist progress so a rerun resumes after the failing item.
            save_target_cache(cache_path, cache);
            throw Error("build_target_cache: provider failed on recording " +
                        cache.recording_ids[i] + ": " + e.what() + " (partial cache persisted)");
        }
    }
    save_target_cache(cache_path, cache);
    if (stats) *stats = st;
    return cache;
}

// ------------------------------------------------------------------
// alignment training

SignalStore load_signals_in_memory(const DatasetManifest& manifest) {
    auto store = std::make_shared<std::unordered_map<std::string, MatF>>();
    for (const auto& r : manifest.recordings)
        store->emplace(r.recording_id, read_signal(manifest.signal_path(r)));
    return [store](const std::string& id) -> const MatF& {
        auto it = store->find(id);
        if (it == store->end()) throw ValidationError("signal store: unknown recording " + id);
        return it->second;
    };
}

namespace {

double eval_mse_only(const LstmEncoder<float>& enc, const std::vector<std::string>& ids,
                     const TargetCache& cache, const SignalStore& signals) {
    if (ids.empty()) return 0.0;
    std::vector<double> losses;
    losses.reserve(ids.size());
    for (const auto& id : ids) {
        std::vector<float> out = enc.forward(signals(id));
        MatF target = cache.target_for(id);
        losses.push_back(mse_loss(out.data(), target.v.data(), out.size()));
    }
    return pairwise_mean(losses);
}

} // namespace

TrainResult train_alignment(LstmEncoder<float>& encoder, const DatasetManifest& manifest,
                            const TargetCache& cache, const TrainConfig& cfg,
                            const SignalStore& signals) {
    auto viol = cfg.violations();
    if (!viol.empty()) throw ValidationError("train config: " + viol.front());
    if (!cache.complete()) throw ValidationError("train_alignment: target cache is incomplete");

    // Pre-flight shape check: encoder output vs cached target shape.
    if (size_t(encoder.config().output_size()) != cache.rows * cache.cols)
        throw ValidationError("train_alignment: encoder output size " +
                              std::to_string(encoder.config().output_size()) +
                              " does not match cache target size " +
                              std::to_string(cache.rows * cache.cols));

    std::vector<std::string> train_ids = manifest.split_train;
    std::sort(train_ids.begin(), train_ids.end());
    if (train_ids.empty()) throw ValidationError("train_alignment: empty train split");
    std::vector<std::string> val_ids = manifest.split_val;
    std::sort(val_ids.begin(), val_ids.end());

    const size_t out_n = size_t(encoder.config().output_size());
    Rng run_rng(cfg.seed);
    AdamW opt;
    std::vector<float> grads;
    double lr = cfg.lr;

    TrainResult result;
    std::vector<float> best_params;
    std::vector<float> best_state;
    int64_t step_total = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng erng = run_rng.fork("epoch", uint64_t(epoch));
        std::vector<std::string> order = train_ids;
        erng.shuffle(order);

        std::vector<double> batch_losses;
        for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
            size_t end = std::min(order.size(), start + size_t(cfg.batch_size));
            if (end - start < 2) break; // short tail dropped (batch-norm needs >= 2)

            std::vector<const MatF*> batch;
            MatF targets(end - start, out_n);
            for (size_t b = start; b < end; ++b) {
                batch.push_back(&signals(order[b]));
                MatF t = cache.target_for(order[b]);
                std::copy(t.v.begin(), t.v.end(), targets.row(b - start));
            }

            EncoderBatchCache<float> fcache;
            MatF pred = encoder.forward_train(batch, fcache, /*update_running_stats=*/true);
            double loss = mse_loss(pred, targets);
            ++step_total;
            if (!std::isfinite(loss))
                throw Error("train_alignment: NaN loss at epoch " + std::to_string(epoch) +
                            ", step " + std::to_string(step_total));
            batch_losses.push_back(loss);

            MatF d_out(pred.rows, pred.cols);
            const double scale = 2.0 / double(pred.size());
            for (size_t i = 0; i < pred.size(); ++i)
                d_out.v[i] = float(scale * (double(pred.v[i]) - double(targets.v[i])));
            encoder.backward(d_out, fcache, grads);
            opt.step(encoder.params(), grads, lr, cfg.weight_decay);
            if (cfg.lr_decay_per_step) lr *= cfg.lr_lambda;
        }

        EpochStats es;
        es.epoch = epoch;
        es.lr = lr;
        es.train_mse = pairwise_mean(batch_losses);
        es.val_mse = eval_mse_only(encoder, val_ids, cache, signals);
        result.history.push_back(es);

        if (!val_ids.empty()) {
            if (result.best_epoch < 0 || es.val_mse < result.best_val_mse) {
                result.best_epoch = epoch;
                result.best_val_mse = es.val_mse;
                best_params = encoder.params();
                best_state = encoder.running_state();
            }
        }
        if (!cfg.lr_decay_per_step) lr *= cfg.lr_lambda;
    }

    if (!val_ids.empty() && result.best_epoch >= 0) {
        encoder.params() = best_params;
        encoder.running_state() = best_state;
    } else {
        result.best_epoch = cfg.epochs - 1;
        result.best_val_mse = result.history.back().val_mse;
    }
    return result;
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write history: " + path);
    f << "epoch,train_mse,val_mse,lr\n";
    char buf[160];
    for (const auto& e : history) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", e.epoch, e.train_mse, e.val_mse, e.lr);
        f << buf;
    }
}

AlignmentEval eval_alignment(const EncoderForward& forward, const DatasetManifest& manifest,
                             const TargetCache& cache, Split split, const SignalStore& signals) {
    std::vector<std::string> ids = manifest.split_ids(split);
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw ValidationError("eval_alignment: split " + to_string(split) + " is empty");

    std::vector<std::vector<float>> outputs;
    std::vector<std::vector<float>> targets;
    std::vector<double> losses;
    outputs.reserve(ids.size());
    for (const auto& id : ids) {
        std::vector<float> out = forward(signals(id));
        MatF t = cache.target_for(id);
        if (out.size() != t.size())
            throw ValidationError("eval_alignment: output/target shape mismatch for " + id);
        losses.push_back(mse_loss(out.data(), t.v.data(), out.size()));
        outputs.push_back(std::move(out));
        targets.push_back(std::move(t.v));
    }

    size_t hits = 0;
    for (size_t i = 0; i < ids.size(); ++i) {
        double own = cosine_similarity(outputs[i], targets[i]);
        double best = -2.0;
        for (size_t j = 0; j < ids.size(); ++j)
            best = std::max(best, cosine_similarity(outputs[i], targets[j]));
        if (own >= best - 1e-12) ++hits;
    }

    AlignmentEval ev;
    ev.n = ids.size();
    ev.mse = pairwise_mean(losses);
    ev.retrieval_top1 = double(hits) / double(ids.size());
    return ev;
}

} // namespace eegdec
