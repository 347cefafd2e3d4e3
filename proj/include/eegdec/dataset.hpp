#pragma once

#include "eegdec/manifest.hpp"
#include "eegdec/types.hpp"

#include <array>
#include <optional>
#include <string>

namespace eegdec {

// Desk-scale stand-in dataset. Signals are a fixed per-class template (a sum
// of class-keyed sinusoids, independent of the seed) plus Gaussian noise;
// stimulus images are class-keyed solid-color shapes, identical within a
// class, so class identity is recoverable from pixels alone.
struct SyntheticSpec {
    int n_classes = 4;
    int n_subjects = 2;
    int n_channels = 16;
    int n_timesteps = 64;
    int samples_per_class = 32;
    double noise_sigma = 0.5;
    int image_size = 8;
    uint64_t seed = 0;

    std::vector<std::string> violations() const;
};

struct PreprocessConfig {
    enum class Normalize { none, per_channel_zscore };
    Normalize normalize = Normalize::per_channel_zscore;
    // Half-open timestep range [t_start, t_end).
    std::optional<std::pair<int, int>> crop;
};

struct IngestReport {
    size_t n_recordings = 0;
    size_t n_classes = 0;
    size_t n_subjects = 0;
    size_t n_rejected = 0; // NaN-corrupted recordings skipped
    std::vector<std::string> warnings;
};

// Deterministic template and stimulus of a class; exposed for tests and for
// nearest-prototype classification.
MatF synthetic_class_template(int class_id, int n_channels, int n_timesteps);
Image synthetic_class_image(int class_id, int size);

// Writes the dataset tree (labels.csv, classes.csv, signals/, stimuli/ and
// manifest.json) under out_dir and returns the manifest. All recordings start
// in the train split; use make_splits afterwards.
DatasetManifest generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir);

// Ingests a dataset tree: labels.csv (recording_id,stimulus_id,class_id,
// subject_id), classes.csv (class_id,class_name), signals/<id>.eeg,
// stimuli/<id>.png. Normalized/cropped signals and copied stimuli are written
// under out_dir next to the produced manifest.
DatasetManifest ingest(const std::string& root_dir, const PreprocessConfig& pre,
                       const std::string& out_dir, IngestReport* report = nullptr);

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

// Stratified per class at the stimulus level: all recordings of one stimulus
// land in the same split, so no stimulus seen in training can appear in
// evaluation. Deterministic in seed.
DatasetManifest make_splits(const DatasetManifest& manifest, const SplitFractions& fractions,
                            uint64_t seed);

// In-place per-channel z-score; constant channels are left at zero.
void zscore_per_channel(MatF& signal);

} // namespace eegdec
