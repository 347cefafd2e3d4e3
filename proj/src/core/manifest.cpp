#include "eegdec/manifest.hpp"

#include "eegdec/sha256.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace eegdec {

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ValidationError("unknown split '" + s + "' (expected train, val or test)");
}

const std::vector<std::string>& DatasetManifest::split_ids(Split s) const {
    switch (s) {
        case Split::train: return split_train;
        case Split::val: return split_val;
        case Split::test: return split_test;
    }
    return split_train;
}

std::vector<std::string>& DatasetManifest::split_ids(Split s) {
    switch (s) {
        case Split::train: return split_train;
        case Split::val: return split_val;
        case Split::test: return split_test;
    }
    return split_train;
}

const RecordingEntry* DatasetManifest::find_recording(const std::string& id) const {
    auto it = std::lower_bound(recordings.begin(), recordings.end(), id,
                               [](const RecordingEntry& r, const std::string& k) { return r.recording_id < k; });
    if (it != recordings.end() && it->recording_id == id) return &*it;
    return nullptr;
}

const StimulusEntry* DatasetManifest::find_stimulus(const std::string& id) const {
    auto it = std::lower_bound(stimuli.begin(), stimuli.end(), id,
                               [](const StimulusEntry& s, const std::string& k) { return s.stimulus_id < k; });
    if (it != stimuli.end() && it->stimulus_id == id) return &*it;
    return nullptr;
}

std::optional<Split> DatasetManifest::split_of(const std::string& recording_id) const {
    for (Split s : {Split::train, Split::val, Split::test}) {
        const auto& ids = split_ids(s);
        if (std::find(ids.begin(), ids.end(), recording_id) != ids.end()) return s;
    }
    return std::nullopt;
}

std::string DatasetManifest::resolve(const std::string& rel_path) const {
    fs::path p(rel_path);
    if (p.is_absolute() || root_dir.empty()) return rel_path;
    return (fs::path(root_dir) / p).string();
}

bool DatasetManifest::equals_ignoring_root(const DatasetManifest& o) const {
    return schema_version == o.schema_version && dataset_id == o.dataset_id &&
           n_classes == o.n_classes && class_names == o.class_names &&
           recordings == o.recordings && stimuli == o.stimuli &&
           split_train == o.split_train && split_val == o.split_val &&
           split_test == o.split_test && target_caches == o.target_caches;
}

std::vector<std::string> validate_manifest(const DatasetManifest& m) {
    std::vector<std::string> out;
    if (m.n_classes < 1) out.push_back("n_classes must be >= 1, got " + std::to_string(m.n_classes));
    if (int(m.class_names.size()) != m.n_classes)
        out.push_back("class_names has " + std::to_string(m.class_names.size()) +
                      " entries but n_classes is " + std::to_string(m.n_classes));

    std::unordered_set<std::string> rec_ids;
    std::unordered_set<std::string> stim_ids;
    for (const auto& s : m.stimuli) {
        if (!stim_ids.insert(s.stimulus_id).second)
            out.push_back("duplicate stimulus_id " + s.stimulus_id);
        if (s.class_id < 0 || s.class_id >= m.n_classes)
            out.push_back("stimulus " + s.stimulus_id + " has class_id " + std::to_string(s.class_id) +
                          " outside [0, " + std::to_string(m.n_classes) + ")");
    }
    for (const auto& r : m.recordings) {
        if (!rec_ids.insert(r.recording_id).second)
            out.push_back("duplicate recording_id " + r.recording_id);
        if (r.class_id < 0 || r.class_id >= m.n_classes)
            out.push_back("recording " + r.recording_id + " has class_id " + std::to_string(r.class_id) +
                          " outside [0, " + std::to_string(m.n_classes) + ")");
        if (!stim_ids.count(r.stimulus_id))
            out.push_back("recording " + r.recording_id + " references unknown stimulus " + r.stimulus_id);
    }

    // Every recording in exactly one split, and no stranger ids in any split.
    std::unordered_map<std::string, std::vector<std::string>> membership;
    for (Split s : {Split::train, Split::val, Split::test}) {
        for (const auto& id : m.split_ids(s)) {
            membership[id].push_back(to_string(s));
            if (!rec_ids.count(id))
                out.push_back("split " + to_string(s) + " lists unknown recording " + id);
        }
    }
    for (const auto& r : m.recordings) {
        auto it = membership.find(r.recording_id);
        if (it == membership.end()) {
            out.push_back("recording " + r.recording_id + " is in no split");
        } else if (it->second.size() > 1) {
            std::string splits;
            for (size_t i = 0; i < it->second.size(); ++i) {
                if (i) splits += (i + 1 == it->second.size()) ? " and " : ", ";
                splits += it->second[i];
            }
            out.push_back("recording " + r.recording_id + " in " + splits);
        }
    }
    return out;
}

namespace {

json manifest_to_json(const DatasetManifest& m) {
    json j;
    j["schema_version"] = m.schema_version;
    j["dataset_id"] = m.dataset_id;
    j["n_classes"] = m.n_classes;
    j["class_names"] = m.class_names;
    json recs = json::array();
    for (const auto& r : m.recordings)
        recs.push_back({{"recording_id", r.recording_id},
                        {"stimulus_id", r.stimulus_id},
                        {"signal_path", r.signal_path},
                        {"class_id", r.class_id},
                        {"subject_id", r.subject_id}});
    j["recordings"] = std::move(recs);
    json stims = json::array();
    for (const auto& s : m.stimuli)
        stims.push_back({{"stimulus_id", s.stimulus_id},
                         {"image_path", s.image_path},
                         {"class_id", s.class_id}});
    j["stimuli"] = std::move(stims);
    j["splits"] = {{"train", m.split_train}, {"val", m.split_val}, {"test", m.split_test}};
    j["target_caches"] = m.target_caches;
    return j;
}

DatasetManifest manifest_from_json(const json& j) {
    DatasetManifest m;
    if (!j.contains("schema_version"))
        throw ParseError("manifest: missing mandatory schema_version field");
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version > kManifestSchemaVersion)
        throw VersionError("manifest: schema_version " + std::to_string(m.schema_version) +
                           " is newer than supported version " + std::to_string(kManifestSchemaVersion));
    m.dataset_id = j.value("dataset_id", "");
    m.n_classes = j.at("n_classes").get<int>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    for (const auto& rj : j.at("recordings")) {
        RecordingEntry r;
        r.recording_id = rj.at("recording_id").get<std::string>();
        r.stimulus_id = rj.at("stimulus_id").get<std::string>();
        r.signal_path = rj.at("signal_path").get<std::string>();
        r.class_id = rj.at("class_id").get<int>();
        r.subject_id = rj.at("subject_id").get<int>();
        m.recordings.push_back(std::move(r));
    }
    for (const auto& sj : j.at("stimuli")) {
        StimulusEntry s;
        s.stimulus_id = sj.at("stimulus_id").get<std::string>();
        s.image_path = sj.at("image_path").get<std::string>();
        s.class_id = sj.at("class_id").get<int>();
        m.stimuli.push_back(std::move(s));
    }
    const auto& sp = j.at("splits");
    m.split_train = sp.at("train").get<std::vector<std::string>>();
    m.split_val = sp.at("val").get<std::vector<std::string>>();
    m.split_test = sp.at("test").get<std::vector<std::string>>();
    if (j.contains("target_caches"))
        m.target_caches = j.at("target_caches").get<std::map<std::string, std::string>>();
    return m;
}

} // namespace

void rebase_manifest_paths(DatasetManifest& m, const std::string& new_root) {
    auto rebase = [&](const std::string& rel) -> std::string {
        fs::path resolved(m.resolve(rel));
        if (!resolved.is_absolute()) resolved = fs::absolute(resolved);
        std::error_code ec;
        fs::path relative = fs::relative(resolved, fs::absolute(new_root), ec);
        return ec || relative.empty() ? resolved.string() : relative.string();
    };
    for (auto& r : m.recordings) r.signal_path = rebase(r.signal_path);
    for (auto& s : m.stimuli) s.image_path = rebase(s.image_path);
    for (auto& [space, path] : m.target_caches) path = rebase(path);
    m.root_dir = new_root;
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write manifest: " + path);
    f << manifest_to_json(m).dump(2) << "\n";
    if (!f) throw IoError("short write: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open manifest: " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw ParseError("manifest " + path + ": " + e.what());
    }
    DatasetManifest m;
    try {
        m = manifest_from_json(j);
    } catch (const json::exception& e) {
        throw ParseError("manifest " + path + ": " + e.what());
    }
    m.root_dir = fs::path(path).parent_path().string();
    return m;
}

void finalize_run_manifest(RunManifest& rm) {
    json h;
    h["command"] = rm.command;
    h["config"] = rm.config_json;
    h["seed"] = rm.seed;
    h["inputs"] = rm.inputs;
    h["outputs"] = rm.outputs;
    h["checkpoints"] = rm.checkpoints;
    rm.config_hash = sha256_hex(h.dump());
    rm.run_id = rm.command + "-" + rm.config_hash.substr(0, 12);
    if (rm.created_at.empty()) {
        auto now = std::chrono::system_clock::now();
        auto t = std::chrono::system_clock::to_time_t(now);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
        rm.created_at = buf;
    }
}

void save_run_manifest(const std::string& path, const RunManifest& rm) {
    json j;
    j["schema_version"] = rm.schema_version;
    j["run_id"] = rm.run_id;
    j["command"] = rm.command;
    j["config"] = rm.config_json;
    j["seed"] = rm.seed;
    j["inputs"] = rm.inputs;
    j["outputs"] = rm.outputs;
    j["checkpoints"] = rm.checkpoints;
    j["created_at"] = rm.created_at;
    j["config_hash"] = rm.config_hash;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write run manifest: " + path);
    f << j.dump(2) << "\n";
    if (!f) throw IoError("short write: " + path);
}

RunManifest load_run_manifest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open run manifest: " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw ParseError("run manifest " + path + ": " + e.what());
    }
    if (!j.contains("schema_version"))
        throw ParseError("run manifest: missing mandatory schema_version field");
    RunManifest rm;
    rm.schema_version = j.at("schema_version").get<int>();
    if (rm.schema_version > kRunManifestSchemaVersion)
        throw VersionError("run manifest: schema_version " + std::to_string(rm.schema_version) +
                           " is newer than supported version " +
                           std::to_string(kRunManifestSchemaVersion));
    rm.run_id = j.at("run_id").get<std::string>();
    rm.command = j.at("command").get<std::string>();
    rm.config_json = j.at("config").get<std::string>();
    rm.seed = j.at("seed").get<uint64_t>();
    rm.inputs = j.at("inputs").get<std::vector<std::string>>();
    rm.outputs = j.at("outputs").get<std::vector<std::string>>();
    rm.checkpoints = j.at("checkpoints").get<std::map<std::string, std::string>>();
    rm.created_at = j.at("created_at").get<std::string>();
    rm.config_hash = j.at("config_hash").get<std::string>();
    return rm;
}

} // namespace eegdec
