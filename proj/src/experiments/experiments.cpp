#include "eegdec/experiments.hpp"

#include "eegdec/chart.hpp"
#include "eegdec/parallel.hpp"
#include "eegdec/csv.hpp"
#include "eegdec/embedding.hpp"
#include "eegdec/encoder.hpp"
#include "eegdec/png_io.hpp"
#include "eegdec/rng.hpp"
#include "eegdec/signal_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace eegdec {

const char* kResultsCsvHeader = "condition,acc,is_mean,is_std,fid,ssim,cs";

// ------------------------------------------------------------------
// plan loading

ExperimentPlan ExperimentPlan::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open plan: " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw ParseError("plan " + path + ": " + e.what());
    }

    ExperimentPlan p;
    try {
        p.manifest_path = j.at("manifest").get<std::string>();
        p.split = split_from_string(j.value("split", "test"));
        // Reproducibility is part of the contract: no wall-clock seeding.
        if (!j.contains("seed"))
            throw ValidationError("plan " + path + ": seed is mandatory");
        p.seed = j.at("seed").get<uint64_t>();
        p.image_checkpoint = j.value("image_checkpoint", "");
        p.text_checkpoint = j.value("text_checkpoint", "");
        if (j.contains("backend")) {
            json b = j.at("backend");
            p.backend_checkpoint = b.value("checkpoint", "");
            b.erase("checkpoint");
            p.backend = BackendConfig::from_json(b.dump());
        }
        p.backend.seed = p.seed;
        if (j.contains("extractor")) p.extractor_json = j.at("extractor").dump();
        if (j.contains("metric")) {
            const auto& m = j.at("metric");
            p.metric.acc_n = m.value("acc_n", p.metric.acc_n);
            p.metric.acc_k = m.value("acc_k", p.metric.acc_k);
            p.metric.acc_trials = m.value("acc_trials", p.metric.acc_trials);
            p.metric.is_splits = m.value("is_splits", p.metric.is_splits);
            p.metric.ssim_window = m.value("ssim_window", p.metric.ssim_window);
            p.metric.ssim_sigma = m.value("ssim_sigma", p.metric.ssim_sigma);
            p.metric.ssim_k1 = m.value("ssim_k1", p.metric.ssim_k1);
            p.metric.ssim_k2 = m.value("ssim_k2", p.metric.ssim_k2);
            p.metric.ssim_l = m.value("ssim_l", p.metric.ssim_l);
        }
        p.metric.seed = p.seed;
        p.metric.threads = p.threads;
        p.lambda = j.value("lambda", 1.0);
        p.limit = j.value("limit", 0);
        p.repeats = j.value("repeats", 1);
        p.threads = j.value("threads", 1);
        for (const auto& cj : j.value("conditions", json::array())) {
            PlanCondition c;
            c.name = cj.at("name").get<std::string>();
            c.drop_text = cj.value("drop_text", false);
            c.drop_image = cj.value("drop_image", false);
            if (cj.contains("lambda")) c.lambda = cj.at("lambda").get<double>();
            if (cj.contains("image_checkpoint")) c.image_checkpoint = cj.at("image_checkpoint").get<std::string>();
            if (cj.contains("text_checkpoint")) c.text_checkpoint = cj.at("text_checkpoint").get<std::string>();
            if (cj.contains("backend_checkpoint")) c.backend_checkpoint = cj.at("backend_checkpoint").get<std::string>();
            c.caption_provider = cj.value("caption_provider", "");
            p.conditions.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw ParseError("plan " + path + ": " + e.what());
    }
    return p;
}

std::vector<std::string> ExperimentPlan::violations() const {
    std::vector<std::string> v;
    if (manifest_path.empty()) v.push_back("plan: manifest path missing");
    std::vector<std::string> names;
    for (const auto& c : conditions) {
        if (c.name.empty()) v.push_back("plan: condition with empty name");
        if (std::find(names.begin(), names.end(), c.name) != names.end())
            v.push_back("plan: duplicate condition name '" + c.name + "'");
        names.push_back(c.name);
    }
    auto need = [&](const std::string& path, const std::string& what) {
        if (path.empty())
            v.push_back("plan: missing " + what);
        else if (!fs::exists(path))
            v.push_back("plan: " + what + " not found: " + path);
    };
    need(manifest_path, "manifest");
    // Per-condition overrides may substitute checkpoints; every referenced
    // file must exist up front. An empty plan references nothing.
    bool toy = backend.kind == BackendConfig::Kind::toy;
    auto effective = [&](const std::optional<std::string>& ov, const std::string& base) {
        return ov ? *ov : base;
    };
    for (const auto& c : conditions) {
        need(effective(c.image_checkpoint, image_checkpoint),
             "image encoder checkpoint for condition '" + c.name + "'");
        need(effective(c.text_checkpoint, text_checkpoint),
             "text encoder checkpoint for condition '" + c.name + "'");
        if (toy)
            need(effective(c.backend_checkpoint, backend_checkpoint),
                 "backend checkpoint for condition '" + c.name + "'");
    }
    if (repeats < 1) v.push_back("plan: repeats must be >= 1");
    if (limit < 0) v.push_back("plan: limit must be >= 0");
    auto mviol = metric.violations();
    for (const auto& s : mviol) v.push_back("plan metric: " + s);
    return v;
}

// ------------------------------------------------------------------
// generation over a split

GeneratedSet generate_over_split(const DatasetManifest& manifest, const std::string& image_ckpt,
                                 const std::string& text_ckpt, DiffusionBackend& backend,
                                 const BackendConfig& backend_cfg, const GenerateOptions& opt,
                                 const std::string& out_dir) {
    EncoderCheckpointMeta image_meta, text_meta;
    LstmEncoder<float> image_enc = load_encoder_checkpoint(image_ckpt, &image_meta);
    LstmEncoder<float> text_enc = load_encoder_checkpoint(text_ckpt, &text_meta);
    if (image_meta.space != TargetSpace::image)
        throw ValidationError("generate: " + image_ckpt + " is not an image-space checkpoint");
    if (text_meta.space != TargetSpace::text)
        throw ValidationError("generate: " + text_ckpt + " is not a text-space checkpoint");
    const std::string image_hash = encoder_checkpoint_hash(image_ckpt);
    const std::string text_hash = encoder_checkpoint_hash(text_ckpt);

    std::vector<std::string> ids = manifest.split_ids(opt.split);
    std::sort(ids.begin(), ids.end());
    if (ids.empty())
        throw ValidationError("generate: split " + to_string(opt.split) + " is empty");
    if (opt.limit > 0 && size_t(opt.limit) < ids.size()) ids.resize(size_t(opt.limit));

    fs::create_directories(out_dir);

    const size_t total = ids.size() * size_t(opt.repeats);
    GeneratedSet set;
    set.names.resize(total);
    set.recording_ids.resize(total);
    set.classes.resize(total);
    set.images.resize(total);
    set.reference.resize(total);

    Rng seed_root(opt.seed);
    parallel_for(total, opt.threads, [&](size_t idx) {
        const size_t rec_idx = idx / size_t(opt.repeats);
        const int rep = int(idx % size_t(opt.repeats));
        const std::string& rid = ids[rec_idx];
        const RecordingEntry* rec = manifest.find_recording(rid);
        if (!rec) throw ValidationError("generate: split lists unknown recording " + rid);
        const StimulusEntry* stim = manifest.find_stimulus(rec->stimulus_id);
        if (!stim) throw ValidationError("generate: missing stimulus " + rec->stimulus_id);

        MatF signal = read_signal(manifest.signal_path(*rec));

        ConditioningBundle bundle;
        std::vector<float> img_emb = image_enc.forward(signal);
        bundle.image_embedding = std::move(img_emb);
        std::vector<float> text_flat = text_enc.forward(signal);
        const auto& tshape = text_enc.config().output_shape;
        size_t t_rows = tshape.size() == 2 ? size_t(tshape[0]) : 1;
        size_t t_cols = tshape.size() == 2 ? size_t(tshape[1]) : size_t(tshape[0]);
        bundle.text_tokens = MatF(t_rows, t_cols);
        std::copy(text_flat.begin(), text_flat.end(), bundle.text_tokens.v.begin());
        bundle.lambda = float(opt.lambda);
        bundle.drop_text = opt.drop_text;
        bundle.drop_image = opt.drop_image;

        BackendConfig cfg = backend_cfg;
        cfg.seed = seed_root.fork(rid).fork("rep", uint64_t(rep)).seed();

        GenerationResult result = generate(backend, bundle, cfg, rid);
        result.provenance.image_checkpoint_hash = image_hash;
        result.provenance.text_checkpoint_hash = text_hash;
        // Evaluation must see exactly what lands on disk.
        quantize_to_u8(result.image);

        std::string name = rid + (opt.repeats > 1 ? "_r" + std::to_string(rep) : "");
        write_png((fs::path(out_dir) / (name + ".png")).string(), result.image);
        std::ofstream sf((fs::path(out_dir) / (name + ".json")).string(), std::ios::binary);
        if (!sf) throw IoError("cannot write provenance sidecar for " + name);
        sf << result.provenance.to_json() << "\n";

        set.names[idx] = name;
        set.recording_ids[idx] = rid;
        set.classes[idx] = rec->class_id;
        set.images[idx] = std::move(result.image);
        set.reference[idx] = read_png(manifest.image_path(*stim));
    });
    return set;
}

MetricReport evaluate_generated(const GeneratedSet& set, int n_classes, EmbeddingProvider& extractor,
                                const MetricConfig& cfg) {
    PrototypeClassifier classifier = PrototypeClassifier::fit(set.reference, set.classes, n_classes);
    ImageClassifier cl = [&classifier](const Image& img) { return classifier(img); };
    ImageFeatureExtractor fx = [&extractor](const Image& img) { return extractor.image_embedding(img); };
    MetricConfig c = cfg;
    c.feature_extractor_id = extractor.id();
    return evaluate_all(set.images, set.reference, set.classes, cl, fx, c);
}

// ------------------------------------------------------------------
// ablation

std::string run_ablation(const ExperimentPlan& plan, const std::string& out_dir) {
    auto viol = plan.violations();
    if (!viol.empty()) throw ValidationError("run_ablation: " + viol.front());

    DatasetManifest manifest = load_manifest(plan.manifest_path);
    auto mviol = validate_manifest(manifest);
    if (!mviol.empty()) throw ValidationError("run_ablation: invalid manifest: " + mviol.front());

    std::unique_ptr<EmbeddingProvider> extractor = make_embedding_provider(plan.extractor_json);

    fs::create_directories(out_dir);
    const std::string csv_path = (fs::path(out_dir) / "results.csv").string();
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw IoError("cannot write " + csv_path);
    csv << kResultsCsvHeader << "\n";
    csv.flush();

    for (const auto& cond : plan.conditions) {
        try {
            const std::string image_ckpt =
                cond.image_checkpoint ? *cond.image_checkpoint : plan.image_checkpoint;
            const std::string text_ckpt =
                cond.text_checkpoint ? *cond.text_checkpoint : plan.text_checkpoint;
            const std::string backend_ckpt =
                cond.backend_checkpoint ? *cond.backend_checkpoint : plan.backend_checkpoint;
            std::unique_ptr<DiffusionBackend> backend = make_backend(plan.backend, backend_ckpt);

            GenerateOptions opt;
            opt.split = plan.split;
            opt.seed = plan.seed;
            opt.lambda = cond.lambda ? *cond.lambda : plan.lambda;
            opt.drop_text = cond.drop_text;
            opt.drop_image = cond.drop_image;
            opt.limit = plan.limit;
            opt.repeats = plan.repeats;
            opt.threads = plan.threads;

            const std::string cond_dir = (fs::path(out_dir) / cond.name).string();
            GeneratedSet set = generate_over_split(manifest, image_ckpt, text_ckpt, *backend,
                                                   plan.backend, opt, cond_dir);
            MetricReport report = evaluate_generated(set, manifest.n_classes, *extractor, plan.metric);

            std::ofstream rf((fs::path(cond_dir) / "report.json").string(), std::ios::binary);
            rf << report.to_json() << "\n";

            std::vector<std::string> cells = report.csv_cells();
            cells.insert(cells.begin(), cond.name);
            csv << csv_join(cells) << "\n";
            csv.flush();
        } catch (const std::exception& e) {
            // Keep the completed rows, mark the failure, and abort.
            csv << csv_join({"FAILED:" + cond.name, "nan", "nan", "nan", "nan", "nan", "nan"}) << "\n";
            csv.flush();
            throw Error("run_ablation: condition '" + cond.name + "' failed: " + e.what());
        }
    }
    return csv_path;
}

// ------------------------------------------------------------------
// report rendering

namespace {

bool parse_double_cell(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

} // namespace

std::string report_results(const std::string& results_csv_path, const std::string& out_dir) {
    CsvTable t = read_csv(results_csv_path, true);
    std::vector<std::string> expect = {"condition", "acc", "is_mean", "is_std",
                                       "fid",       "ssim", "cs"};
    if (t.header != expect)
        throw ParseError(results_csv_path + ": expected header " + std::string(kResultsCsvHeader));

    // Validate numeric cells and collect values for the charts; displayed
    // text keeps the CSV cells verbatim.
    std::vector<std::vector<double>> values(t.rows.size(), std::vector<double>(6, 0.0));
    for (size_t r = 0; r < t.rows.size(); ++r) {
        for (size_t c = 1; c < 7; ++c) {
            double v;
            if (!parse_double_cell(t.rows[r][c], v))
                throw ParseError(results_csv_path + ": line " + std::to_string(t.row_lines[r]) +
                                 ": non-numeric cell in column '" + expect[c] + "': '" +
                                 t.rows[r][c] + "'");
            values[r][c - 1] = v;
        }
    }

    // Aligned text table; IS shows mean with +-std only when std is nonzero.
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"Condition", "ACC", "IS", "FID", "SSIM", "CS"});
    for (size_t r = 0; r < t.rows.size(); ++r) {
        std::string is_cell = t.rows[r][2];
        if (values[r][2] != 0.0 && std::isfinite(values[r][2]))
            is_cell += "+-" + t.rows[r][3];
        cells.push_back({t.rows[r][0], t.rows[r][1], is_cell, t.rows[r][4], t.rows[r][5], t.rows[r][6]});
    }
    std::vector<size_t> widths(6, 0);
    for (const auto& row : cells)
        for (size_t c = 0; c < 6; ++c) widths[c] = std::max(widths[c], row[c].size());

    std::ostringstream table;
    for (size_t r = 0; r < cells.size(); ++r) {
        for (size_t c = 0; c < 6; ++c) {
            table << (c == 0 ? "| " : " ");
            table << cells[r][c] << std::string(widths[c] - cells[r][c].size(), ' ') << " |";
        }
        table << "\n";
        if (r == 0) {
            for (size_t c = 0; c < 6; ++c)
                table << (c == 0 ? "|-" : "-") << std::string(widths[c], '-') << "-|";
            table << "\n";
        }
    }

    fs::create_directories(out_dir);
    const std::string table_path = (fs::path(out_dir) / "table.txt").string();
    std::ofstream tf(table_path, std::ios::binary);
    if (!tf) throw IoError("cannot write " + table_path);
    tf << table.str();

    const char* metric_names[5] = {"acc", "is", "fid", "ssim", "cs"};
    const size_t metric_cols[5] = {0, 1, 3, 4, 5}; // indices into values rows
    for (int mi = 0; mi < 5; ++mi) {
        BarChartSpec spec;
        spec.title = metric_names[mi];
        spec.lower_is_better = std::string(metric_names[mi]) == "fid";
        for (size_t r = 0; r < t.rows.size(); ++r) {
            spec.labels.push_back(t.rows[r][0]);
            double v = values[r][metric_cols[mi]];
            spec.values.push_back(std::isfinite(v) ? v : 0.0);
        }
        if (spec.labels.empty()) continue;
        write_png((fs::path(out_dir) / (std::string(metric_names[mi]) + ".png")).string(),
                  render_bar_chart(spec));
    }
    return table.str();
}

} // namespace eegdec
