#include "eegdec.h"

#include "eegdec/caption.hpp"
#include "eegdec/config.hpp"
#include "eegdec/csv.hpp"
#include "eegdec/dataset.hpp"
#include "eegdec/embedding.hpp"
#include "eegdec/encoder.hpp"
#include "eegdec/experiments.hpp"
#include "eegdec/generation.hpp"
#include "eegdec/manifest.hpp"
#include "eegdec/metrics.hpp"
#include "eegdec/png_io.hpp"
#include "eegdec/signal_io.hpp"
#include "eegdec/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace eegdec;

struct eegdec_session {
    std::string error;
};

namespace {

int classify_error(const std::exception& e) {
    if (dynamic_cast<const ValidationError*>(&e)) return EEGDEC_E_VALIDATION;
    if (dynamic_cast<const ParseError*>(&e)) return EEGDEC_E_VALIDATION;
    if (dynamic_cast<const VersionError*>(&e)) return EEGDEC_E_VALIDATION;
    return EEGDEC_E_RUNTIME;
}

template <typename F>
int guarded(eegdec_session* s, F&& fn) {
    if (!s) return EEGDEC_E_VALIDATION;
    s->error.clear();
    try {
        fn();
        return EEGDEC_OK;
    } catch (const std::exception& e) {
        s->error = e.what();
        return classify_error(e);
    } catch (...) {
        s->error = "unknown error";
        return EEGDEC_E_RUNTIME;
    }
}

json parse_config(const char* config_json, const char* what) {
    if (!config_json || !*config_json) return json::object();
    try {
        return json::parse(config_json);
    } catch (const json::exception& e) {
        throw ParseError(std::string(what) + " config: " + e.what());
    }
}

void require(const char* p, const char* what) {
    if (!p || !*p) throw ValidationError(std::string(what) + " must not be null or empty");
}

void write_run_manifest_for(const std::string& command, const json& config, uint64_t seed,
                            std::vector<std::string> inputs, std::vector<std::string> outputs,
                            std::map<std::string, std::string> checkpoints,
                            const std::string& path) {
    RunManifest rm;
    rm.command = command;
    rm.config_json = config.dump();
    rm.seed = seed;
    rm.inputs = std::move(inputs);
    rm.outputs = std::move(outputs);
    rm.checkpoints = std::move(checkpoints);
    finalize_run_manifest(rm);
    save_run_manifest(path, rm);
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::unique_ptr<EmbeddingProvider> extractor_from(const json& cfg) {
    json x = cfg.value("extractor", json::object());
    return make_embedding_provider(x.dump());
}

} // namespace

extern "C" {

eegdec_session* eegdec_session_new(void) { return new (std::nothrow) eegdec_session{}; }

void eegdec_session_free(eegdec_session* s) { delete s; }

const char* eegdec_last_error(const eegdec_session* s) { return s ? s->error.c_str() : "null session"; }

const char* eegdec_version(void) { return "0.1.0"; }

void eegdec_string_free(char* s) { std::free(s); }

int eegdec_synth(eegdec_session* s, const char* config_json, const char* out_dir) {
    return guarded(s, [&]() {
        require(out_dir, "out_dir");
        json cfg = parse_config(config_json, "synth");
        SyntheticSpec spec;
        spec.n_classes = cfg.value("n_classes", spec.n_classes);
        spec.n_subjects = cfg.value("n_subjects", spec.n_subjects);
        spec.n_channels = cfg.value("n_channels", spec.n_channels);
        spec.n_timesteps = cfg.value("n_timesteps", spec.n_timesteps);
        spec.samples_per_class = cfg.value("samples_per_class", spec.samples_per_class);
        spec.noise_sigma = cfg.value("noise_sigma", spec.noise_sigma);
        spec.image_size = cfg.value("image_size", spec.image_size);
        spec.seed = cfg.value("seed", uint64_t(0));
        auto viol = spec.violations();
        if (!viol.empty()) throw ValidationError("synth: " + viol.front());
        generate_synthetic(spec, out_dir);
        write_run_manifest_for("synth", cfg, spec.seed, {}, {std::string(out_dir)}, {},
                               (fs::path(out_dir) / "run_manifest.json").string());
    });
}

int eegdec_ingest(eegdec_session* s, const char* root_dir, const char* config_json,
                  const char* out_dir) {
    return guarded(s, [&]() {
        require(root_dir, "root_dir");
        require(out_dir, "out_dir");
        json cfg = parse_config(config_json, "ingest");
        PreprocessConfig pre;
        std::string norm = cfg.value("normalize", "per_channel_zscore");
        if (norm == "none") pre.normalize = PreprocessConfig::Normalize::none;
        else if (norm == "per_channel_zscore") pre.normalize = PreprocessConfig::Normalize::per_channel_zscore;
        else throw ValidationError("ingest: unknown normalize mode '" + norm + "'");
        if (cfg.contains("crop")) {
            auto c = cfg.at("crop").get<std::vector<int>>();
            if (c.size() != 2) throw ValidationError("ingest: crop must be [t_start, t_end)");
            pre.crop = std::make_pair(c[0], c[1]);
        }
        IngestReport rep;
        ingest(root_dir, pre, out_dir, &rep);
        json summary = {{"n_recordings", rep.n_recordings},
                        {"n_classes", rep.n_classes},
                        {"n_subjects", rep.n_subjects},
                        {"n_rejected", rep.n_rejected}};
        std::ofstream rf((fs::path(out_dir) / "ingest_report.json").string(), std::ios::binary);
        rf << summary.dump(2) << "\n";
        write_run_manifest_for("ingest", cfg, 0, {std::string(root_dir)}, {std::string(out_dir)}, {},
                               (fs::path(out_dir) / "run_manifest.json").string());
    });
}

int eegdec_split(eegdec_session* s, const char* manifest_path, double train_frac, double val_frac,
                 double test_frac, uint64_t seed, const char* out_manifest_path) {
    return guarded(s, [&]() {
        require(manifest_path, "manifest_path");
        require(out_manifest_path, "out_manifest_path");
        DatasetManifest m = load_manifest(manifest_path);
        auto viol = validate_manifest(m);
        if (!viol.empty()) throw ValidationError("split: invalid manifest: " + viol.front());
        SplitFractions f{train_frac, val_frac, test_frac};
        DatasetManifest out = make_splits(m, f, seed);
        rebase_manifest_paths(out, fs::path(out_manifest_path).parent_path().string());
        save_manifest(out_manifest_path, out);
        json cfg = {{"train", train_frac}, {"val", val_frac}, {"test", test_frac}};
        write_run_manifest_for("split", cfg, seed, {std::string(manifest_path)},
                               {std::string(out_manifest_path)}, {},
                               std::string(out_manifest_path) + ".run.json");
    });
}

int eegdec_validate_manifest(eegdec_session* s, const char* manifest_path, char** violations_out) {
    return guarded(s, [&]() {
        require(manifest_path, "manifest_path");
        DatasetManifest m = load_manifest(manifest_path);
        std::string joined;
        for (const auto& v : validate_manifest(m)) {
            joined += v;
            joined += "\n";
        }
        if (violations_out) *violations_out = dup_string(joined);
    });
}

int eegdec_cache_targets(eegdec_session* s, const char* manifest_path, const char* config_json,
                         const char* out_cache_path) {
    return guarded(s, [&]() {
        require(manifest_path, "manifest_path");
        require(out_cache_path, "out_cache_path");
        json cfg = parse_config(config_json, "cache-targets");
        DatasetManifest m = load_manifest(manifest_path);
        auto viol = validate_manifest(m);
        if (!viol.empty()) throw ValidationError("cache-targets: invalid manifest: " + viol.front());

        TargetSpace space = target_space_from_string(cfg.value("space", "image"));
        std::unique_ptr<EmbeddingProvider> provider = extractor_from(cfg);
        if (space == TargetSpace::text && cfg.value("pooled_text", false))
            provider = make_pooled_text_provider(std::move(provider));

        std::unique_ptr<CaptionProvider> captions;
        if (space == TargetSpace::text) {
            CaptionProviderConfig cc;
            json cj = cfg.value("caption", json::object());
            std::string mode = cj.value("mode", "label_template");
            if (mode == "label_template") {
                cc.mode = CaptionSource::label_template;
                cc.label_template = cj.value("template", cc.label_template);
            } else if (mode == "external_file") {
                cc.mode = CaptionSource::external_file;
                cc.external_path = cj.value("path", "");
            } else {
                throw ValidationError("cache-targets: unknown caption mode '" + mode + "'");
            }
            captions = std::make_unique<CaptionProvider>(cc, m);
        }

        build_target_cache(m, *provider, space, captions.get(), out_cache_path);

        // Record the cache in a refreshed manifest so downstream runs can
        // find it.
        std::error_code ec;
        fs::path rel = fs::relative(fs::absolute(out_cache_path), fs::absolute(m.root_dir), ec);
        m.target_caches[to_string(space)] = ec || rel.empty() ? fs::absolute(out_cache_path).string()
                                                              : rel.string();
        save_manifest(manifest_path, m);

        write_run_manifest_for("cache-targets", cfg, 0, {std::string(manifest_path)},
                               {std::string(out_cache_path)}, {},
                               std::string(out_cache_path) + ".run.json");
    });
}

int eegdec_train(eegdec_session* s, const char* manifest_path, const char* cache_path,
                 const char* config_json, const char* out_checkpoint_path,
                 const char* history_csv_path) {
    return guarded(s, [&]() {
        require(manifest_path, "manifest_path");
        require(cache_path, "cache_path");
        require(out_checkpoint_path, "out_checkpoint_path");
        json cfg = parse_config(config_json, "train");
        if (!cfg.contains("seed"))
            throw ValidationError("train: seed is mandatory (wall-clock seeding is not supported)");

        DatasetManifest m = load_manifest(manifest_path);
        auto viol = validate_manifest(m);
        if (!viol.empty()) throw ValidationError("train: invalid manifest: " + viol.front());
        TargetCache cache = load_target_cache(cache_path);

        TrainConfig tc;
        tc.space = target_space_from_string(cfg.value("space", to_string(cache.space)));
        if (tc.space != cache.space)
            throw ValidationError("train: requested space " + to_string(tc.space) +
                                  " but cache holds " + to_string(cache.space) + " targets");
        tc.epochs = cfg.value("epochs", 50);
        tc.batch_size = cfg.value("batch_size", 16);
        tc.lr = cfg.value("lr", 3e-4);
        tc.weight_decay = cfg.value("weight_decay", 1e-4);
        tc.lr_lambda = cfg.value("lr_lambda", 0.999);
        tc.lr_decay_per_step = cfg.value("lr_decay_per_step", false);
        tc.seed = cfg.at("seed").get<uint64_t>();

        if (m.recordings.empty()) throw ValidationError("train: manifest has no recordings");
        MatF first = read_signal(m.signal_path(m.recordings.front()));

        EncoderConfig ec;
        ec.n_channels = int(first.rows);
        ec.n_timesteps = int(first.cols);
        json ej = cfg.value("encoder", json::object());
        ec.rnn_layers = ej.value("rnn_layers", 3);
        ec.hidden_dim = ej.value("hidden_dim", 512);
        ec.head_hidden_dim = ej.value("head_hidden_dim", 512);
        ec.leaky_slope = ej.value("leaky_slope", 0.01);
        ec.orientation = sequence_orientation_from_string(ej.value("orientation", "time_major"));
        if (cache.space == TargetSpace::image)
            ec.output_shape = {int(cache.cols)};
        else
            ec.output_shape = {int(cache.rows), int(cache.cols)};

        LstmEncoder<float> enc(ec);
        enc.init_params(tc.seed);
        SignalStore signals = load_signals_in_memory(m);
        TrainResult result = train_alignment(enc, m, cache, tc, signals);

        EncoderCheckpointMeta meta;
        meta.space = tc.space;
        meta.training_step = result.best_epoch;
        meta.extractor_id = cache.extractor_id;
        save_encoder_checkpoint(out_checkpoint_path, enc, meta);
        if (history_csv_path && *history_csv_path) write_history_csv(history_csv_path, result.history);

        write_run_manifest_for("train", cfg, tc.seed,
                               {std::string(manifest_path), std::string(cache_path)},
                               {std::string(out_checkpoint_path)},
                               {{"encoder", encoder_checkpoint_hash(out_checkpoint_path)}},
                               std::string(out_checkpoint_path) + ".run.json");
    });
}

int eegdec_train_toy_backend(eegdec_session* s, const char* manifest_path,
                             const char* image_cache_path, const char* text_cache_path,
                             const char* config_json, const char* out_checkpoint_path) {
    return guarded(s, [&]() {
        require(manifest_path, "manifest_path");
        require(image_cache_path, "image_cache_path");
        require(text_cache_path, "text_cache_path");
        require(out_checkpoint_path, "out_checkpoint_path");
        json cfg = parse_config(config_json, "train-backend");
        if (!cfg.contains("seed")) throw ValidationError("train-backend: seed is mandatory");

        DatasetManifest m = load_manifest(manifest_path);
        auto viol = validate_manifest(m);
        if (!viol.empty()) throw ValidationError("train-backend: invalid manifest: " + viol.front());
        TargetCache image_cache = load_target_cache(image_cache_path);
        TargetCache text_cache = load_target_cache(text_cache_path);
        if (image_cache.space != TargetSpace::image)
            throw ValidationError("train-backend: " + std::string(image_cache_path) +
                                  " does not hold image-space targets");
        if (text_cache.space != TargetSpace::text)
            throw ValidationError("train-backend: " + std::string(text_cache_path) +
                                  " does not hold text-space targets");

        std::unique_ptr<EmbeddingProvider> provider = extractor_from(cfg);
        if (provider->id() != image_cache.extractor_id || provider->id() != text_cache.extractor_id)
            throw ValidationError("train-backend: extractor config does not match the caches "
                                  "(expected " + image_cache.extractor_id + ", got " + provider->id() + ")");

        // One training item per train-split stimulus: the ground-truth image
        // conditioned on its frozen embedding-space targets. The EEG encoders
        // are swapped in only at generation time.
        std::vector<ToyTrainItem> items;
        std::vector<std::string> seen_stimuli;
        int image_size = -1;
        for (const auto& rid : m.split_train) {
            const RecordingEntry* rec = m.find_recording(rid);
            if (!rec) continue;
            if (std::find(seen_stimuli.begin(), seen_stimuli.end(), rec->stimulus_id) !=
                seen_stimuli.end())
                continue;
            seen_stimuli.push_back(rec->stimulus_id);
            const StimulusEntry* stim = m.find_stimulus(rec->stimulus_id);
            if (!stim) throw ValidationError("train-backend: missing stimulus " + rec->stimulus_id);
            ToyTrainItem item;
            item.image = read_png(m.image_path(*stim));
            if (image_size < 0) image_size = item.image.height;
            item.text_tokens = text_cache.target_for(rid);
            MatF img_t = image_cache.target_for(rid);
            item.image_embedding = img_t.v;
            items.push_back(std::move(item));
        }
        if (items.empty()) throw ValidationError("train-backend: train split has no stimuli");

        json aj = cfg.value("arch", json::object());
        ToyArchConfig arch;
        arch.image_size = aj.value("image_size", image_size);
        arch.d_model = aj.value("d_model", arch.d_model);
        arch.n_blocks = aj.value("n_blocks", arch.n_blocks);
        arch.n_img_tokens = aj.value("n_img_tokens", arch.n_img_tokens);
        arch.train_timesteps = aj.value("train_timesteps", arch.train_timesteps);
        arch.n_text_tokens = int(text_cache.rows);
        arch.d_text = int(text_cache.cols);
        arch.d_img = int(image_cache.cols);

        ToyTrainConfig ttc;
        ttc.steps = cfg.value("steps", 2000);
        ttc.batch_size = cfg.value("batch_size", 16);
        ttc.lr = cfg.value("lr", 2e-3);
        ttc.drop_prob_text = cfg.value("drop_prob_text", 0.1);
        ttc.drop_prob_image = cfg.value("drop_prob_image", 0.1);
        ttc.lambda_train = cfg.value("lambda", 1.0);
        ttc.seed = cfg.at("seed").get<uint64_t>();

        MatF null_text = provider->text_embedding("");
        ToyBackendModel model(arch, null_text, ttc.seed);
        ToyTrainResult tr = model.train(items, ttc);
        model.save(out_checkpoint_path);

        json summary = {{"steps", tr.loss_history.size()},
                        {"initial_loss", tr.loss_history.front()},
                        {"final_loss", tr.loss_history.back()}};
        std::ofstream lf(std::string(out_checkpoint_path) + ".loss.json", std::ios::binary);
        lf << summary.dump(2) << "\n";

        write_run_manifest_for("train-backend", cfg, ttc.seed,
                               {std::string(manifest_path), std::string(image_cache_path),
                                std::string(text_cache_path)},
                               {std::string(out_checkpoint_path)},
                               {{"backend", model.content_hash()}},
                               std::string(out_checkpoint_path) + ".run.json");
    });
}

int eegdec_generate(eegdec_session* s, const char* manifest_path, const char* image_checkpoint,
                    const char* text_checkpoint, const char* config_json, const char* out_dir) {
    return guarded(s, [&]() {
        require(manifest_path, "manifest_path");
        require(image_checkpoint, "image_checkpoint");
        require(text_checkpoint, "text_checkpoint");
        require(out_dir, "out_dir");
        json cfg = parse_config(config_json, "generate");
        if (!cfg.contains("seed")) throw ValidationError("generate: seed is mandatory");

        DatasetManifest m = load_manifest(manifest_path);
        auto viol = validate_manifest(m);
        if (!viol.empty()) throw ValidationError("generate: invalid manifest: " + viol.front());

        BackendConfig bc;
        std::string kind = cfg.value("backend", "toy");
        if (kind == "toy") bc.kind = BackendConfig::Kind::toy;
        else if (kind == "real_adapter") bc.kind = BackendConfig::Kind::real_adapter;
        else throw ValidationError("generate: unknown backend '" + kind + "'");
        bc.inference_steps = cfg.value("inference_steps", 25);
        bc.image_size = cfg.value("image_size", 8);
        bc.sampler_id = bc.kind == BackendConfig::Kind::toy ? "ancestral" : "pndm";
        std::string backend_ckpt = cfg.value("backend_checkpoint", "");
        std::unique_ptr<DiffusionBackend> backend = make_backend(bc, backend_ckpt);

        GenerateOptions opt;
        opt.split = split_from_string(cfg.value("split", "test"));
        opt.seed = cfg.at("seed").get<uint64_t>();
        opt.lambda = cfg.value("lambda", 1.0);
        opt.drop_text = cfg.value("drop_text", false);
        opt.drop_image = cfg.value("drop_image", false);
        opt.limit = cfg.value("limit", 0);
        opt.repeats = cfg.value("repeats", 1);
        opt.threads = cfg.value("threads", 1);

        generate_over_split(m, image_checkpoint, text_checkpoint, *backend, bc, opt, out_dir);

        write_run_manifest_for("generate", cfg, opt.seed,
                               {std::string(manifest_path), std::string(image_checkpoint),
                                std::string(text_checkpoint)},
                               {std::string(out_dir)},
                               {{"image_encoder", encoder_checkpoint_hash(image_checkpoint)},
                                {"text_encoder", encoder_checkpoint_hash(text_checkpoint)},
                                {"backend", backend->checkpoint_hash()}},
                               (fs::path(out_dir) / "run_manifest.json").string());
    });
}

namespace {

std::vector<std::string> list_pngs(const std::string& dir) {
    std::vector<std::string> names;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
            names.push_back(e.path().stem().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw ValidationError("no .png files in " + dir);
    return names;
}

} // namespace

int eegdec_evaluate(eegdec_session* s, const char* generated_dir, const char* reference_dir,
                    const char* config_json, const char* out_dir) {
    return guarded(s, [&]() {
        require(generated_dir, "generated_dir");
        require(out_dir, "out_dir");
        json cfg = parse_config(config_json, "evaluate");

        std::vector<std::string> names = list_pngs(generated_dir);
        std::vector<Image> generated, reference;
        std::vector<int> classes;
        int n_classes = 0;

        if (cfg.contains("manifest")) {
            // Pair by recording id against the manifest's stimulus images.
            DatasetManifest m = load_manifest(cfg.at("manifest").get<std::string>());
            n_classes = m.n_classes;
            for (const auto& name : names) {
                std::string rid = name.substr(0, name.find("_r"));
                const RecordingEntry* rec = m.find_recording(rid);
                if (!rec && name.find("_r") == std::string::npos) rec = m.find_recording(name);
                if (!rec)
                    throw ValidationError("evaluate: generated image '" + name +
                                          "' matches no manifest recording");
                const StimulusEntry* stim = m.find_stimulus(rec->stimulus_id);
                generated.push_back(read_png((fs::path(generated_dir) / (name + ".png")).string()));
                reference.push_back(read_png(m.image_path(*stim)));
                classes.push_back(rec->class_id);
            }
        } else {
            require(reference_dir, "reference_dir (or a manifest in the config)");
            for (const auto& name : names) {
                fs::path ref = fs::path(reference_dir) / (name + ".png");
                if (!fs::exists(ref))
                    throw ValidationError("evaluate: no reference image for '" + name + "'");
                generated.push_back(read_png((fs::path(generated_dir) / (name + ".png")).string()));
                reference.push_back(read_png(ref.string()));
            }
            if (cfg.contains("labels")) {
                CsvTable t = read_csv(cfg.at("labels").get<std::string>(), true);
                if (t.header != std::vector<std::string>{"name", "class_id"})
                    throw ParseError("evaluate: labels file must have header name,class_id");
                std::map<std::string, int> by_name;
                for (const auto& row : t.rows) by_name[row[0]] = std::stoi(row[1]);
                for (const auto& name : names) {
                    auto it = by_name.find(name);
                    if (it == by_name.end())
                        throw ValidationError("evaluate: labels file has no row for '" + name + "'");
                    classes.push_back(it->second);
                    n_classes = std::max(n_classes, it->second + 1);
                }
            }
        }
        n_classes = cfg.value("n_classes", n_classes);

        MetricConfig mc;
        json mj = cfg.value("metric", json::object());
        mc.acc_n = mj.value("acc_n", mc.acc_n);
        mc.acc_k = mj.value("acc_k", mc.acc_k);
        mc.acc_trials = mj.value("acc_trials", mc.acc_trials);
        mc.is_splits = mj.value("is_splits", mc.is_splits);
        mc.ssim_window = mj.value("ssim_window", mc.ssim_window);
        mc.ssim_sigma = mj.value("ssim_sigma", mc.ssim_sigma);
        mc.ssim_k1 = mj.value("ssim_k1", mc.ssim_k1);
        mc.ssim_k2 = mj.value("ssim_k2", mc.ssim_k2);
        mc.ssim_l = mj.value("ssim_l", mc.ssim_l);
        mc.seed = cfg.value("seed", uint64_t(0));
        mc.threads = cfg.value("threads", 1);

        std::unique_ptr<EmbeddingProvider> extractor = extractor_from(cfg);
        mc.feature_extractor_id = extractor->id();

        ImageClassifier classifier;
        if (!classes.empty()) {
            auto proto = std::make_shared<PrototypeClassifier>(
                PrototypeClassifier::fit(reference, classes, n_classes));
            classifier = [proto](const Image& img) { return (*proto)(img); };
        }
        ImageFeatureExtractor fx = [&extractor](const Image& img) {
            return extractor->image_embedding(img);
        };
        MetricReport report = evaluate_all(generated, reference, classes, classifier, fx, mc);

        fs::create_directories(out_dir);
        std::ofstream rf((fs::path(out_dir) / "report.json").string(), std::ios::binary);
        rf << report.to_json() << "\n";
        std::ofstream cf((fs::path(out_dir) / "results.csv").string(), std::ios::binary);
        cf << kResultsCsvHeader << "\n";
        std::vector<std::string> cells = report.csv_cells();
        cells.insert(cells.begin(), cfg.value("condition", std::string("evaluate")));
        cf << csv_join(cells) << "\n";

        write_run_manifest_for("evaluate", cfg, mc.seed, {std::string(generated_dir)},
                               {std::string(out_dir)}, {},
                               (fs::path(out_dir) / "run_manifest.json").string());
    });
}

int eegdec_ablate(eegdec_session* s, const char* plan_path, const char* out_dir) {
    return guarded(s, [&]() {
        require(plan_path, "plan_path");
        require(out_dir, "out_dir");
        ExperimentPlan plan = ExperimentPlan::load(plan_path);
        run_ablation(plan, out_dir);
        std::ifstream pf(plan_path, std::ios::binary);
        std::string plan_text((std::istreambuf_iterator<char>(pf)), std::istreambuf_iterator<char>());
        write_run_manifest_for("ablate", json::parse(plan_text), plan.seed,
                               {std::string(plan_path)}, {std::string(out_dir)}, {},
                               (fs::path(out_dir) / "run_manifest.json").string());
    });
}

int eegdec_report(eegdec_session* s, const char* results_csv_path, const char* out_dir,
                  char** table_out) {
    return guarded(s, [&]() {
        require(results_csv_path, "results_csv_path");
        require(out_dir, "out_dir");
        std::string table = report_results(results_csv_path, out_dir);
        if (table_out) *table_out = dup_string(table);
        write_run_manifest_for("report", json::object(), 0, {std::string(results_csv_path)},
                               {std::string(out_dir)}, {},
                               (fs::path(out_dir) / "run_manifest.json").string());
    });
}

/* ---------------------------------------------------------------- */

int eegdec_frechet_distance(eegdec_session* s, const float* features_a, size_t n_a,
                            const float* features_b, size_t n_b, size_t dim, double* out) {
    return guarded(s, [&]() {
        if (!features_a || !features_b || !out)
            throw ValidationError("frechet_distance: null buffer");
        MatD a(n_a, dim), b(n_b, dim);
        for (size_t i = 0; i < n_a * dim; ++i) a.v[i] = features_a[i];
        for (size_t i = 0; i < n_b * dim; ++i) b.v[i] = features_b[i];
        *out = frechet_distance(a, b);
    });
}

int eegdec_ssim(eegdec_session* s, const float* rgb_a, const float* rgb_b, int height, int width,
                int window, double sigma, double* out) {
    return guarded(s, [&]() {
        if (!rgb_a || !rgb_b || !out) throw ValidationError("ssim: null buffer");
        Image a(height, width), b(height, width);
        std::copy(rgb_a, rgb_a + a.rgb.size(), a.rgb.begin());
        std::copy(rgb_b, rgb_b + b.rgb.size(), b.rgb.begin());
        MetricConfig cfg;
        cfg.ssim_window = window > 0 ? window : 11;
        cfg.ssim_sigma = sigma > 0 ? sigma : 1.5;
        *out = ssim(a, b, cfg);
    });
}

int eegdec_inception_score(eegdec_session* s, const double* probs, size_t n, size_t c, int n_splits,
                           double* mean_out, double* std_out) {
    return guarded(s, [&]() {
        if (!probs || !mean_out) throw ValidationError("inception_score: null buffer");
        std::vector<std::vector<double>> rows(n, std::vector<double>(c));
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < c; ++j) rows[i][j] = probs[i * c + j];
        auto [m, sd] = inception_score(rows, n_splits);
        *mean_out = m;
        if (std_out) *std_out = sd;
    });
}

int eegdec_nway_topk_acc(eegdec_session* s, const double* probs, const int* true_classes, size_t n,
                         size_t c, int acc_n, int acc_k, int trials, uint64_t seed, double* out) {
    return guarded(s, [&]() {
        if (!probs || !true_classes || !out) throw ValidationError("nway_topk_acc: null buffer");
        std::vector<std::vector<double>> rows(n, std::vector<double>(c));
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < c; ++j) rows[i][j] = probs[i * c + j];
        std::vector<int> truths(true_classes, true_classes + n);
        MetricConfig cfg;
        cfg.acc_n = acc_n;
        cfg.acc_k = acc_k;
        cfg.acc_trials = trials;
        cfg.seed = seed;
        *out = nway_topk_acc(rows, truths, cfg);
    });
}

int eegdec_decoupled_cross_attention(eegdec_session* s, const float* q, size_t m, const float* k_text,
                                     const float* v_text, size_t n_text, const float* k_image,
                                     const float* v_image, size_t n_image, size_t d, float lambda,
                                     float* out) {
    return guarded(s, [&]() {
        if (!q || !k_text || !v_text || !k_image || !v_image || !out)
            throw ValidationError("decoupled_cross_attention: null buffer");
        MatF Q(m, d), Kt(n_text, d), Vt(n_text, d), Ki(n_image, d), Vi(n_image, d);
        std::copy(q, q + m * d, Q.v.begin());
        std::copy(k_text, k_text + n_text * d, Kt.v.begin());
        std::copy(v_text, v_text + n_text * d, Vt.v.begin());
        std::copy(k_image, k_image + n_image * d, Ki.v.begin());
        std::copy(v_image, v_image + n_image * d, Vi.v.begin());
        MatF o = decoupled_cross_attention(Q, Kt, Vt, Ki, Vi, lambda);
        std::copy(o.v.begin(), o.v.end(), out);
    });
}

} /* extern "C" */
