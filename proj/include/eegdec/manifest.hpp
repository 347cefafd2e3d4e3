#pragma once

#include "eegdec/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace eegdec {

constexpr int kManifestSchemaVersion = 1;
constexpr int kRunManifestSchemaVersion = 1;

struct RecordingEntry {
    std::string recording_id;
    std::string stimulus_id;
    std::string signal_path; // relative to the manifest directory
    int class_id = 0;
    int subject_id = 0;

    bool operator==(const RecordingEntry&) const = default;
};

struct StimulusEntry {
    std::string stimulus_id;
    std::string image_path; // relative to the manifest directory
    int class_id = 0;

    bool operator==(const StimulusEntry&) const = default;
};

enum class Split { train, val, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct DatasetManifest {
    int schema_version = kManifestSchemaVersion;
    std::string dataset_id;
    int n_classes = 0;
    std::vector<std::string> class_names;
    std::vector<RecordingEntry> recordings; // kept sorted by recording_id
    std::vector<StimulusEntry> stimuli;     // kept sorted by stimulus_id
    // Split membership as explicit lists so that a malformed manifest (one
    // recording in two splits) is representable and reportable.
    std::vector<std::string> split_train;
    std::vector<std::string> split_val;
    std::vector<std::string> split_test;
    std::map<std::string, std::string> target_caches; // space -> cache path

    // Set by load_manifest to the manifest's directory; not serialized.
    std::string root_dir;

    const std::vector<std::string>& split_ids(Split s) const;
    std::vector<std::string>& split_ids(Split s);

    const RecordingEntry* find_recording(const std::string& id) const;
    const StimulusEntry* find_stimulus(const std::string& id) const;
    std::optional<Split> split_of(const std::string& recording_id) const;

    std::string resolve(const std::string& rel_path) const;
    std::string signal_path(const RecordingEntry& r) const { return resolve(r.signal_path); }
    std::string image_path(const StimulusEntry& s) const { return resolve(s.image_path); }

    bool equals_ignoring_root(const DatasetManifest& o) const;
};

// Returns one human-readable violation per failed invariant; empty means the
// manifest is safe for every downstream module.
std::vector<std::string> validate_manifest(const DatasetManifest& m);

void save_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::string& path);

// Rewrites the stored relative paths so the manifest can be saved under
// new_root and still resolve the same files.
void rebase_manifest_paths(DatasetManifest& m, const std::string& new_root);

// Per-run provenance record. The config snapshot plus the seed determine
// every stochastic choice of the run; created_at is excluded from the hash.
struct RunManifest {
    int schema_version = kRunManifestSchemaVersion;
    std::string run_id;
    std::string command;
    std::string config_json; // frozen snapshot, canonical dump
    uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::map<std::string, std::string> checkpoints; // role -> path or hash
    std::string created_at;
    std::string config_hash;

    bool operator==(const RunManifest&) const = default;
};

// Fills run_id ("<command>-<hash12>") and config_hash from the other fields.
void finalize_run_manifest(RunManifest& rm);

void save_run_manifest(const std::string& path, const RunManifest& rm);
RunManifest load_run_manifest(const std::string& path);

} // namespace eegdec
