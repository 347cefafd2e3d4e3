#pragma once

#include "eegdec/embedding.hpp"
#include "eegdec/generation.hpp"
#include "eegdec/manifest.hpp"
#include "eegdec/metrics.hpp"
#include "eegdec/parallel.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace eegdec {

// One ablation condition: which conditioning branches are active and with
// which checkpoints/backend. Unset fields fall back to the plan defaults.
struct PlanCondition {
    std::string name;
    bool drop_text = false;
    bool drop_image = false;
    std::optional<double> lambda;
    std::optional<std::string> image_checkpoint;
    std::optional<std::string> text_checkpoint;
    std::optional<std::string> backend_checkpoint;
    std::string caption_provider; // informational provenance (label/blip/...)
};

struct ExperimentPlan {
    std::string manifest_path;
    Split split = Split::test;
    uint64_t seed = 0;
    std::string image_checkpoint;
    std::string text_checkpoint;
    std::string backend_checkpoint;
    BackendConfig backend;
    std::string extractor_json = "{}";
    MetricConfig metric;
    double lambda = 1.0;
    int limit = 0;   // 0 = whole split
    int repeats = 1; // generations per recording
    int threads = 1;
    std::vector<PlanCondition> conditions;

    static ExperimentPlan load(const std::string& path);
    std::vector<std::string> violations() const; // includes missing-checkpoint pre-flight
};

// A generated image set plus the matching ground truth.
struct GeneratedSet {
    std::vector<std::string> names;
    std::vector<std::string> recording_ids;
    std::vector<int> classes;
    std::vector<Image> images;
    std::vector<Image> reference;
};

struct GenerateOptions {
    Split split = Split::test;
    uint64_t seed = 0;
    double lambda = 1.0;
    bool drop_text = false;
    bool drop_image = false;
    int limit = 0;
    int repeats = 1;
    int threads = 1;
};

// Runs both encoders over the split and the backend over the resulting
// bundles; writes <name>.png plus a provenance sidecar <name>.json per image
// under out_dir. Generation fans out over a bounded worker pool; per-image
// seeds are keyed by recording id and repeat, so results do not depend on
// scheduling.
GeneratedSet generate_over_split(const DatasetManifest& manifest, const std::string& image_ckpt,
                                 const std::string& text_ckpt, DiffusionBackend& backend,
                                 const BackendConfig& backend_cfg, const GenerateOptions& opt,
                                 const std::string& out_dir);

// Evaluates all five metrics for paired image sets; the classifier is the
// nearest-color-prototype classifier fitted on the reference set.
MetricReport evaluate_generated(const GeneratedSet& set, int n_classes,
                                EmbeddingProvider& extractor, const MetricConfig& cfg);

extern const char* kResultsCsvHeader; // condition,acc,is_mean,is_std,fid,ssim,cs

// Runs every condition of the plan: generate over the split, evaluate, one
// CSV row per condition in plan order. A condition failure writes the rows
// completed so far plus a FAILED marker row, then rethrows.
std::string run_ablation(const ExperimentPlan& plan, const std::string& out_dir);

// Renders a results CSV as an aligned text table (table.txt, returned) and
// one bar chart PNG per metric under out_dir. Numeric cells are rendered
// verbatim, exactly as written in the CSV.
std::string report_results(const std::string& results_csv_path, const std::string& out_dir);

} // namespace eegdec
