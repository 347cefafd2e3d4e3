// Command-line surface over the eegdec C API. All functionality lives behind
// include/eegdec.h; this file only parses flags, assembles JSON configs and
// maps status codes to exit codes (0 ok, 1 validation error, 2 runtime
// error). Diagnostics go to stderr; results go to files.

#include <eegdec.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

using json = nlohmann::json;

namespace {

struct Session {
    eegdec_session* s = eegdec_session_new();
    ~Session() { eegdec_session_free(s); }
};

int finish(Session& session, int status) {
    if (status != EEGDEC_OK) std::cerr << "error: " << eegdec_last_error(session.s) << "\n";
    return status;
}

// Flags win over the config file; the config file wins over defaults.
json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        std::cerr << "error: cannot open config file " << path << "\n";
        std::exit(1);
    }
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        std::cerr << "error: bad config file " << path << ": " << e.what() << "\n";
        std::exit(1);
    }
}

template <typename T>
void set_if(json& cfg, const CLI::Option* opt, const char* key, const T& value) {
    if (opt->count() > 0 || !cfg.contains(key)) cfg[key] = value;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"EEG-to-image decoding pipeline"};
    app.require_subcommand(1);
    Session session;

    std::string config_path;

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "Generate a synthetic desk-scale dataset");
    std::string synth_out;
    int sy_classes = 4, sy_subjects = 2, sy_channels = 16, sy_timesteps = 64, sy_per_class = 32,
        sy_image_size = 8;
    double sy_noise = 0.5;
    uint64_t sy_seed = 0;
    synth->add_option("--out", synth_out, "Output dataset directory")->required();
    auto* o_cls = synth->add_option("--classes", sy_classes, "Number of classes");
    auto* o_sub = synth->add_option("--subjects", sy_subjects, "Number of subjects");
    auto* o_ch = synth->add_option("--channels", sy_channels, "EEG channels");
    auto* o_ts = synth->add_option("--timesteps", sy_timesteps, "Timesteps per recording");
    auto* o_pc = synth->add_option("--per-class", sy_per_class, "Recordings per class");
    auto* o_ns = synth->add_option("--noise", sy_noise, "Gaussian noise sigma");
    auto* o_is = synth->add_option("--image-size", sy_image_size, "Stimulus image size (px)");
    auto* o_sd = synth->add_option("--seed", sy_seed, "Random seed")->required();
    synth->add_option("--config", config_path, "JSON config file (flags win)");

    // ---- ingest ----
    auto* ingest = app.add_subcommand("ingest", "Ingest a dataset tree into a validated manifest");
    std::string in_root, in_out, in_norm = "per_channel_zscore";
    std::vector<int> in_crop;
    ingest->add_option("--root", in_root, "Dataset root directory")->required();
    ingest->add_option("--out", in_out, "Output directory for manifest + processed signals")->required();
    auto* o_norm = ingest->add_option("--normalize", in_norm, "none or per_channel_zscore");
    auto* o_crop = ingest->add_option("--crop", in_crop, "Timestep crop: t_start t_end")->expected(2);
    ingest->add_option("--config", config_path, "JSON config file (flags win)");

    // ---- split ----
    auto* split = app.add_subcommand("split", "Assign stratified stimulus-level splits");
    std::string sp_manifest, sp_out;
    double sp_train = 0.8, sp_val = 0.1, sp_test = 0.1;
    uint64_t sp_seed = 0;
    split->add_option("--manifest", sp_manifest, "Input manifest")->required();
    split->add_option("--out", sp_out, "Output manifest")->required();
    split->add_option("--train", sp_train, "Train fraction");
    split->add_option("--val", sp_val, "Val fraction");
    split->add_option("--test", sp_test, "Test fraction");
    split->add_option("--seed", sp_seed, "Random seed")->required();

    // ---- cache-targets ----
    auto* cache = app.add_subcommand("cache-targets", "Precompute alignment targets");
    std::string ct_manifest, ct_out, ct_space = "image", ct_caption_mode = "label_template",
                ct_caption_template = "an image of {label}", ct_captions_file;
    uint64_t ct_ext_seed = 0;
    int ct_d_img = 32, ct_d_text = 16, ct_n_tokens = 8;
    cache->add_option("--manifest", ct_manifest, "Dataset manifest")->required();
    cache->add_option("--out", ct_out, "Output cache file")->required();
    cache->add_option("--space", ct_space, "image or text");
    cache->add_option("--extractor-seed", ct_ext_seed, "Stand-in extractor seed");
    cache->add_option("--d-img", ct_d_img, "Image embedding width");
    cache->add_option("--d-text", ct_d_text, "Per-token text width");
    cache->add_option("--n-tokens", ct_n_tokens, "Text tokens");
    cache->add_option("--caption-mode", ct_caption_mode, "label_template or external_file");
    cache->add_option("--caption-template", ct_caption_template, "Template with {label}");
    cache->add_option("--captions-file", ct_captions_file, "External captions CSV");
    bool ct_pooled = false;
    cache->add_flag("--pooled-text", ct_pooled, "Pool text targets to the token mean");
    cache->add_option("--config", config_path, "JSON config file (flags win)");

    // ---- train ----
    auto* train = app.add_subcommand("train", "Train an alignment encoder (or the toy backend)");
    std::string tr_manifest, tr_cache, tr_out, tr_history, tr_space = "image";
    int tr_epochs = 50, tr_batch = 16, tr_layers = 3, tr_hidden = 512, tr_head_hidden = 512;
    double tr_lr = 3e-4, tr_wd = 1e-4, tr_lambda = 0.999, tr_leaky = 0.01;
    uint64_t tr_seed = 0;
    bool tr_toy_backend = false;
    std::string tb_image_cache, tb_text_cache;
    int tb_steps = 2000, tb_batch = 16, tb_d_model = 32, tb_blocks = 2, tb_img_tokens = 4,
        tb_train_T = 200, tb_image_size = 0;
    double tb_lr = 2e-3, tb_drop_text = 0.1, tb_drop_image = 0.1, tb_lambda = 1.0;
    uint64_t tb_ext_seed = 0;
    int tb_d_img = 32, tb_d_text = 16, tb_n_tokens = 8;
    train->add_option("--manifest", tr_manifest, "Dataset manifest")->required();
    train->add_option("--cache", tr_cache, "Target cache (encoder training)");
    train->add_option("--out-checkpoint", tr_out, "Output checkpoint")->required();
    train->add_option("--history", tr_history, "History CSV (epoch,train_mse,val_mse,lr)");
    auto* o_space = train->add_option("--space", tr_space, "image or text");
    auto* o_ep = train->add_option("--epochs", tr_epochs, "Epochs");
    auto* o_bs = train->add_option("--batch-size", tr_batch, "Batch size (>= 2)");
    auto* o_lr = train->add_option("--lr", tr_lr, "Initial learning rate");
    auto* o_wd = train->add_option("--weight-decay", tr_wd, "Decoupled weight decay");
    auto* o_ll = train->add_option("--lr-lambda", tr_lambda, "Per-epoch lr decay factor");
    auto* o_rl = train->add_option("--rnn-layers", tr_layers, "Recurrent layers");
    auto* o_hd = train->add_option("--hidden", tr_hidden, "Recurrent hidden dim");
    auto* o_hh = train->add_option("--head-hidden", tr_head_hidden, "Head hidden dim");
    auto* o_lk = train->add_option("--leaky-slope", tr_leaky, "Leaky rectifier slope");
    std::string tr_orientation = "time_major";
    auto* o_or = train->add_option("--orientation", tr_orientation,
                                   "Recurrence axis: time_major or channel_major");
    bool tr_lr_per_step = false;
    train->add_flag("--lr-per-step", tr_lr_per_step, "Decay lr per optimizer step, not per epoch");
    train->add_option("--seed", tr_seed, "Random seed")->required();
    train->add_flag("--toy-backend", tr_toy_backend, "Train the toy diffusion backend instead");
    train->add_option("--image-cache", tb_image_cache, "Image target cache (toy backend)");
    train->add_option("--text-cache", tb_text_cache, "Text target cache (toy backend)");
    train->add_option("--steps", tb_steps, "Toy backend optimization steps");
    train->add_option("--backend-batch", tb_batch, "Toy backend batch size");
    train->add_option("--backend-lr", tb_lr, "Toy backend learning rate");
    train->add_option("--d-model", tb_d_model, "Toy denoiser width");
    train->add_option("--blocks", tb_blocks, "Toy denoiser blocks");
    train->add_option("--img-tokens", tb_img_tokens, "Image conditioning tokens");
    train->add_option("--train-timesteps", tb_train_T, "Diffusion training timesteps");
    train->add_option("--image-size", tb_image_size, "Image size (0 = infer from data)");
    train->add_option("--drop-text", tb_drop_text, "Text-drop probability during training");
    train->add_option("--drop-image", tb_drop_image, "Image-drop probability during training");
    train->add_option("--lambda", tb_lambda, "Image branch weight during training");
    train->add_option("--extractor-seed", tb_ext_seed, "Extractor seed (must match caches)");
    train->add_option("--d-img", tb_d_img, "Extractor image width (must match caches)");
    train->add_option("--d-text", tb_d_text, "Extractor text width (must match caches)");
    train->add_option("--n-tokens", tb_n_tokens, "Extractor text tokens (must match caches)");
    train->add_option("--config", config_path, "JSON config file (flags win)");

    // ---- generate ----
    auto* gen = app.add_subcommand("generate", "Reconstruct images for a split");
    std::string g_manifest, g_image_ckpt, g_text_ckpt, g_backend = "toy", g_backend_ckpt, g_out,
                g_split = "test";
    int g_steps = 25, g_image_size = 8, g_limit = 0, g_repeats = 1, g_threads = 1;
    double g_lambda = 1.0;
    bool g_drop_text = false, g_drop_image = false;
    uint64_t g_seed = 0;
    gen->add_option("--manifest", g_manifest, "Dataset manifest")->required();
    gen->add_option("--image-checkpoint", g_image_ckpt, "Image-space encoder checkpoint")->required();
    gen->add_option("--text-checkpoint", g_text_ckpt, "Text-space encoder checkpoint")->required();
    gen->add_option("--backend", g_backend, "toy or real_adapter");
    gen->add_option("--backend-checkpoint", g_backend_ckpt, "Toy backend checkpoint");
    gen->add_option("--out", g_out, "Output image directory")->required();
    gen->add_option("--split", g_split, "Split to generate for");
    gen->add_option("--steps", g_steps, "Inference steps");
    gen->add_option("--image-size", g_image_size, "Output image size");
    gen->add_option("--lambda", g_lambda, "Image branch weight");
    gen->add_flag("--drop-text", g_drop_text, "Replace text tokens with the null-text embedding");
    gen->add_flag("--drop-image", g_drop_image, "Zero the image branch");
    gen->add_option("--limit", g_limit, "Use only the first N recordings (0 = all)");
    gen->add_option("--repeats", g_repeats, "Generations per recording");
    gen->add_option("--threads", g_threads, "Worker threads");
    gen->add_option("--seed", g_seed, "Random seed")->required();

    // ---- evaluate ----
    auto* eval = app.add_subcommand("evaluate", "Score generated images with the five metrics");
    std::string e_gen, e_gt, e_manifest, e_split = "test", e_labels, e_out, e_condition = "evaluate";
    int e_acc_n = 50, e_acc_k = 1, e_acc_trials = 40, e_is_splits = 10, e_ssim_window = 11,
        e_n_classes = 0;
    double e_ssim_sigma = 1.5;
    uint64_t e_seed = 0, e_ext_seed = 0;
    int e_d_img = 32;
    eval->add_option("--gen", e_gen, "Directory of generated PNGs")->required();
    eval->add_option("--gt", e_gt, "Directory of reference PNGs (paired by filename)");
    eval->add_option("--manifest", e_manifest, "Manifest to pair against instead of --gt");
    eval->add_option("--labels", e_labels, "CSV name,class_id enabling ACC/IS in --gt mode");
    eval->add_option("--out", e_out, "Output directory (report.json, results.csv)")->required();
    eval->add_option("--condition", e_condition, "Condition name for the results row");
    eval->add_option("--acc-n", e_acc_n, "N for N-way top-K accuracy");
    eval->add_option("--acc-k", e_acc_k, "K for N-way top-K accuracy");
    eval->add_option("--acc-trials", e_acc_trials, "Distractor resamples per image");
    eval->add_option("--is-splits", e_is_splits, "Splits for the inception-style score");
    eval->add_option("--ssim-window", e_ssim_window, "SSIM window (odd)");
    eval->add_option("--ssim-sigma", e_ssim_sigma, "SSIM Gaussian sigma");
    eval->add_option("--n-classes", e_n_classes, "Override class count");
    eval->add_option("--extractor-seed", e_ext_seed, "Stand-in extractor seed");
    eval->add_option("--d-img", e_d_img, "Extractor feature width");
    eval->add_option("--seed", e_seed, "Metric seed");
    int e_threads = 1;
    eval->add_option("--threads", e_threads, "Worker threads for feature extraction");

    // ---- ablate ----
    auto* ablate = app.add_subcommand("ablate", "Run an ablation plan");
    std::string a_plan, a_out;
    ablate->add_option("--plan", a_plan, "Plan JSON file")->required();
    ablate->add_option("--out", a_out, "Output directory")->required();

    // ---- report ----
    auto* report = app.add_subcommand("report", "Render a results CSV as table + charts");
    std::string r_csv, r_out;
    bool r_quiet = false;
    report->add_option("--results", r_csv, "Results CSV")->required();
    report->add_option("--out", r_out, "Output directory")->required();
    report->add_flag("--quiet", r_quiet, "Do not echo the table to stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) { // --help
            std::cout << app.help() << "\n";
            return 0;
        }
        std::cerr << "error: " << e.what() << "\n" << app.help() << "\n";
        return 1;
    }

    if (synth->parsed()) {
        json cfg = load_config_file(config_path);
        set_if(cfg, o_cls, "n_classes", sy_classes);
        set_if(cfg, o_sub, "n_subjects", sy_subjects);
        set_if(cfg, o_ch, "n_channels", sy_channels);
        set_if(cfg, o_ts, "n_timesteps", sy_timesteps);
        set_if(cfg, o_pc, "samples_per_class", sy_per_class);
        set_if(cfg, o_ns, "noise_sigma", sy_noise);
        set_if(cfg, o_is, "image_size", sy_image_size);
        set_if(cfg, o_sd, "seed", sy_seed);
        int rc = eegdec_synth(session.s, cfg.dump().c_str(), synth_out.c_str());
        if (rc == EEGDEC_OK)
            std::cerr << "synth: dataset written to " << synth_out << "\n";
        return finish(session, rc);
    }
    if (ingest->parsed()) {
        json cfg = load_config_file(config_path);
        set_if(cfg, o_norm, "normalize", in_norm);
        if (o_crop->count() > 0) cfg["crop"] = in_crop;
        int rc = eegdec_ingest(session.s, in_root.c_str(), cfg.dump().c_str(), in_out.c_str());
        if (rc == EEGDEC_OK) {
            std::ifstream rep(in_out + "/ingest_report.json");
            if (rep) {
                json j = json::parse(rep, nullptr, false);
                if (!j.is_discarded())
                    std::cerr << "ingest: " << j.value("n_recordings", 0) << " recordings, "
                              << j.value("n_classes", 0) << " classes, " << j.value("n_subjects", 0)
                              << " subjects, " << j.value("n_rejected", 0) << " rejected\n";
            }
            std::cerr << "ingest: manifest written under " << in_out << "\n";
        }
        return finish(session, rc);
    }
    if (split->parsed()) {
        int rc = eegdec_split(session.s, sp_manifest.c_str(), sp_train, sp_val, sp_test, sp_seed,
                              sp_out.c_str());
        if (rc == EEGDEC_OK) std::cerr << "split: manifest written to " << sp_out << "\n";
        return finish(session, rc);
    }
    if (cache->parsed()) {
        json cfg = load_config_file(config_path);
        if (!cfg.contains("space")) cfg["space"] = ct_space;
        if (!cfg.contains("extractor"))
            cfg["extractor"] = {{"kind", "standin"},
                                {"seed", ct_ext_seed},
                                {"d_img", ct_d_img},
                                {"d_text", ct_d_text},
                                {"n_tokens", ct_n_tokens}};
        if (ct_pooled) cfg["pooled_text"] = true;
        if (!cfg.contains("caption")) {
            if (ct_caption_mode == "external_file")
                cfg["caption"] = {{"mode", "external_file"}, {"path", ct_captions_file}};
            else
                cfg["caption"] = {{"mode", ct_caption_mode}, {"template", ct_caption_template}};
        }
        int rc = eegdec_cache_targets(session.s, ct_manifest.c_str(), cfg.dump().c_str(),
                                      ct_out.c_str());
        if (rc == EEGDEC_OK) std::cerr << "cache-targets: cache written to " << ct_out << "\n";
        return finish(session, rc);
    }
    if (train->parsed()) {
        json cfg = load_config_file(config_path);
        if (tr_toy_backend) {
            if (tb_image_cache.empty() || tb_text_cache.empty()) {
                std::cerr << "error: --toy-backend needs --image-cache and --text-cache\n";
                return 1;
            }
            cfg["steps"] = cfg.value("steps", tb_steps);
            cfg["batch_size"] = cfg.value("batch_size", tb_batch);
            cfg["lr"] = cfg.value("lr", tb_lr);
            cfg["seed"] = tr_seed;
            cfg["lambda"] = cfg.value("lambda", tb_lambda);
            cfg["drop_prob_text"] = cfg.value("drop_prob_text", tb_drop_text);
            cfg["drop_prob_image"] = cfg.value("drop_prob_image", tb_drop_image);
            json arch = cfg.value("arch", json::object());
            arch["d_model"] = arch.value("d_model", tb_d_model);
            arch["n_blocks"] = arch.value("n_blocks", tb_blocks);
            arch["n_img_tokens"] = arch.value("n_img_tokens", tb_img_tokens);
            arch["train_timesteps"] = arch.value("train_timesteps", tb_train_T);
            if (tb_image_size > 0) arch["image_size"] = tb_image_size;
            cfg["arch"] = arch;
            if (!cfg.contains("extractor"))
                cfg["extractor"] = {{"kind", "standin"},
                                    {"seed", tb_ext_seed},
                                    {"d_img", tb_d_img},
                                    {"d_text", tb_d_text},
                                    {"n_tokens", tb_n_tokens}};
            int rc = eegdec_train_toy_backend(session.s, tr_manifest.c_str(), tb_image_cache.c_str(),
                                              tb_text_cache.c_str(), cfg.dump().c_str(),
                                              tr_out.c_str());
            if (rc == EEGDEC_OK) std::cerr << "train: toy backend written to " << tr_out << "\n";
            return finish(session, rc);
        }
        if (tr_cache.empty()) {
            std::cerr << "error: encoder training needs --cache\n";
            return 1;
        }
        set_if(cfg, o_space, "space", tr_space);
        set_if(cfg, o_ep, "epochs", tr_epochs);
        set_if(cfg, o_bs, "batch_size", tr_batch);
        set_if(cfg, o_lr, "lr", tr_lr);
        set_if(cfg, o_wd, "weight_decay", tr_wd);
        set_if(cfg, o_ll, "lr_lambda", tr_lambda);
        cfg["seed"] = tr_seed;
        json enc = cfg.value("encoder", json::object());
        if (o_rl->count() > 0 || !enc.contains("rnn_layers")) enc["rnn_layers"] = tr_layers;
        if (o_hd->count() > 0 || !enc.contains("hidden_dim")) enc["hidden_dim"] = tr_hidden;
        if (o_hh->count() > 0 || !enc.contains("head_hidden_dim")) enc["head_hidden_dim"] = tr_head_hidden;
        if (o_lk->count() > 0 || !enc.contains("leaky_slope")) enc["leaky_slope"] = tr_leaky;
        if (o_or->count() > 0 || !enc.contains("orientation")) enc["orientation"] = tr_orientation;
        if (tr_lr_per_step) cfg["lr_decay_per_step"] = true;
        cfg["encoder"] = enc;
        int rc = eegdec_train(session.s, tr_manifest.c_str(), tr_cache.c_str(), cfg.dump().c_str(),
                              tr_out.c_str(), tr_history.empty() ? nullptr : tr_history.c_str());
        if (rc == EEGDEC_OK) std::cerr << "train: checkpoint written to " << tr_out << "\n";
        return finish(session, rc);
    }
    if (gen->parsed()) {
        json cfg;
        cfg["split"] = g_split;
        cfg["seed"] = g_seed;
        cfg["lambda"] = g_lambda;
        cfg["drop_text"] = g_drop_text;
        cfg["drop_image"] = g_drop_image;
        cfg["inference_steps"] = g_steps;
        cfg["image_size"] = g_image_size;
        cfg["limit"] = g_limit;
        cfg["repeats"] = g_repeats;
        cfg["threads"] = g_threads;
        cfg["backend"] = g_backend;
        cfg["backend_checkpoint"] = g_backend_ckpt;
        int rc = eegdec_generate(session.s, g_manifest.c_str(), g_image_ckpt.c_str(),
                                 g_text_ckpt.c_str(), cfg.dump().c_str(), g_out.c_str());
        if (rc == EEGDEC_OK) std::cerr << "generate: images written to " << g_out << "\n";
        return finish(session, rc);
    }
    if (eval->parsed()) {
        json cfg;
        if (!e_manifest.empty()) {
            cfg["manifest"] = e_manifest;
            cfg["split"] = e_split;
        }
        if (!e_labels.empty()) cfg["labels"] = e_labels;
        if (e_n_classes > 0) cfg["n_classes"] = e_n_classes;
        cfg["condition"] = e_condition;
        cfg["seed"] = e_seed;
        cfg["threads"] = e_threads;
        cfg["metric"] = {{"acc_n", e_acc_n},           {"acc_k", e_acc_k},
                         {"acc_trials", e_acc_trials}, {"is_splits", e_is_splits},
                         {"ssim_window", e_ssim_window}, {"ssim_sigma", e_ssim_sigma}};
        cfg["extractor"] = {{"kind", "standin"}, {"seed", e_ext_seed}, {"d_img", e_d_img}};
        int rc = eegdec_evaluate(session.s, e_gen.c_str(), e_gt.empty() ? nullptr : e_gt.c_str(),
                                 cfg.dump().c_str(), e_out.c_str());
        if (rc == EEGDEC_OK) std::cerr << "evaluate: report written under " << e_out << "\n";
        return finish(session, rc);
    }
    if (ablate->parsed()) {
        int rc = eegdec_ablate(session.s, a_plan.c_str(), a_out.c_str());
        if (rc == EEGDEC_OK) std::cerr << "ablate: results written under " << a_out << "\n";
        return finish(session, rc);
    }
    if (report->parsed()) {
        char* table = nullptr;
        int rc = eegdec_report(session.s, r_csv.c_str(), r_out.c_str(), &table);
        if (rc == EEGDEC_OK && table && !r_quiet) std::cout << table;
        eegdec_string_free(table);
        if (rc == EEGDEC_OK) std::cerr << "report: table and charts written under " << r_out << "\n";
        return finish(session, rc);
    }
    return 1;
}
