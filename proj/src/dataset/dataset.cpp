#include "eegdec/dataset.hpp"

#include "eegdec/csv.hpp"
#include "eegdec/png_io.hpp"
#include "eegdec/rng.hpp"
#include "eegdec/signal_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

namespace fs = std::filesystem;

namespace eegdec {

std::vector<std::string> SyntheticSpec::violations() const {
    std::vector<std::string> v;
    auto pos = [&](long long x, const char* name) {
        if (x < 1) v.push_back(std::string(name) + " must be >= 1, got " + std::to_string(x));
    };
    pos(n_classes, "n_classes");
    pos(n_subjects, "n_subjects");
    pos(n_channels, "n_channels");
    pos(n_timesteps, "n_timesteps");
    pos(samples_per_class, "samples_per_class");
    pos(image_size, "image_size");
    if (noise_sigma < 0) v.push_back("noise_sigma must be >= 0");
    return v;
}

MatF synthetic_class_template(int class_id, int n_channels, int n_timesteps) {
    MatF m{size_t(n_channels), size_t(n_timesteps)};
    // Three class-keyed harmonics per channel. Phases come from a hash of
    // (class, channel, harmonic), so the template depends on nothing else.
    for (int ch = 0; ch < n_channels; ++ch) {
        for (int k = 0; k < 3; ++k) {
            double freq = 1.0 + double((class_id * 3 + k) % 7);
            double phase = 6.283185307179586 *
                           (double(splitmix64(uint64_t(class_id) * 1315423911u + uint64_t(ch) * 2654435761u + uint64_t(k)) >> 11) * 0x1.0p-53);
            double amp = 1.0 / double(k + 1);
            for (int t = 0; t < n_timesteps; ++t) {
                double x = double(t) / double(n_timesteps);
                m(size_t(ch), size_t(t)) += float(amp * std::sin(6.283185307179586 * freq * x + phase));
            }
        }
    }
    return m;
}

namespace {

void hsv_to_rgb(double h, double s, double v, float rgb[3]) {
    double i = std::floor(h * 6.0);
    double f = h * 6.0 - i;
    double p = v * (1.0 - s);
    double q = v * (1.0 - f * s);
    double t = v * (1.0 - (1.0 - f) * s);
    double r, g, b;
    switch (int(i) % 6) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    rgb[0] = float(r);
    rgb[1] = float(g);
    rgb[2] = float(b);
}

} // namespace

Image synthetic_class_image(int class_id, int size) {
    // Golden-ratio hue stepping keeps any two class colors far apart.
    float color[3];
    double hue = std::fmod(0.15 + 0.6180339887498949 * class_id, 1.0);
    hsv_to_rgb(hue, 0.85, 0.9, color);

    Image img(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = 0.08f;

    double cx = (size - 1) / 2.0, cy = (size - 1) / 2.0;
    double r = 0.42 * size;
    int shape = class_id % 3; // disc, square, diamond
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double dx = x - cx, dy = y - cy;
            bool inside = false;
            switch (shape) {
                case 0: inside = dx * dx + dy * dy <= r * r; break;
                case 1: inside = std::abs(dx) <= r * 0.85 && std::abs(dy) <= r * 0.85; break;
                default: inside = std::abs(dx) + std::abs(dy) <= r * 1.2; break;
            }
            if (inside)
                for (int c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
        }
    }
    return img;
}

namespace {

std::string class_dir_name(int c) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "class_%02d", c);
    return buf;
}

void write_labels_csv(const std::string& path, const std::vector<RecordingEntry>& recs) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << "recording_id,stimulus_id,class_id,subject_id\n";
    for (const auto& r : recs)
        f << csv_join({r.recording_id, r.stimulus_id, std::to_string(r.class_id),
                       std::to_string(r.subject_id)})
          << "\n";
}

void write_classes_csv(const std::string& path, const std::vector<std::string>& names) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << "class_id,class_name\n";
    for (size_t c = 0; c < names.size(); ++c)
        f << csv_join({std::to_string(c), names[c]}) << "\n";
}

} // namespace

DatasetManifest generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir) {
    auto viol = spec.violations();
    if (!viol.empty()) throw ValidationError("synthetic spec: " + viol.front());

    fs::create_directories(fs::path(out_dir) / "signals");
    fs::create_directories(fs::path(out_dir) / "stimuli");

    DatasetManifest m;
    m.dataset_id = "synthetic-seed" + std::to_string(spec.seed);
    m.n_classes = spec.n_classes;
    for (int c = 0; c < spec.n_classes; ++c) m.class_names.push_back(class_dir_name(c));

    Rng rng(spec.seed);
    int next_subject = 0;
    for (int c = 0; c < spec.n_classes; ++c) {
        MatF tmpl = synthetic_class_template(c, spec.n_channels, spec.n_timesteps);
        Image img = synthetic_class_image(c, spec.image_size);
        for (int i = 0; i < spec.samples_per_class; ++i) {
            char rid[48], sid[48];
            std::snprintf(rid, sizeof rid, "rec_c%02d_s%03d", c, i);
            std::snprintf(sid, sizeof sid, "stim_c%02d_s%03d", c, i);

            MatF signal = tmpl;
            if (spec.noise_sigma > 0) {
                Rng noise = rng.fork("noise").fork(rid);
                for (float& x : signal.v) x += float(spec.noise_sigma * noise.normal());
            }

            RecordingEntry rec;
            rec.recording_id = rid;
            rec.stimulus_id = sid;
            rec.class_id = c;
            rec.subject_id = next_subject;
            next_subject = (next_subject + 1) % spec.n_subjects;
            rec.signal_path = std::string("signals/") + rid + ".eeg";
            write_signal((fs::path(out_dir) / rec.signal_path).string(), signal);

            StimulusEntry stim;
            stim.stimulus_id = sid;
            stim.class_id = c;
            stim.image_path = std::string("stimuli/") + sid + ".png";
            write_png((fs::path(out_dir) / stim.image_path).string(), img);

            m.split_train.push_back(rec.recording_id);
            m.recordings.push_back(std::move(rec));
            m.stimuli.push_back(std::move(stim));
        }
    }
    std::sort(m.recordings.begin(), m.recordings.end(),
              [](const auto& a, const auto& b) { return a.recording_id < b.recording_id; });
    std::sort(m.stimuli.begin(), m.stimuli.end(),
              [](const auto& a, const auto& b) { return a.stimulus_id < b.stimulus_id; });
    std::sort(m.split_train.begin(), m.split_train.end());

    write_labels_csv((fs::path(out_dir) / "labels.csv").string(), m.recordings);
    write_classes_csv((fs::path(out_dir) / "classes.csv").string(), m.class_names);
    save_manifest((fs::path(out_dir) / "manifest.json").string(), m);
    m.root_dir = out_dir;
    return m;
}

void zscore_per_channel(MatF& signal) {
    for (size_t ch = 0; ch < signal.rows; ++ch) {
        float* row = signal.row(ch);
        double mean = 0;
        for (size_t t = 0; t < signal.cols; ++t) mean += row[t];
        mean /= double(signal.cols);
        double var = 0;
        for (size_t t = 0; t < signal.cols; ++t) {
            double d = row[t] - mean;
            var += d * d;
        }
        var /= double(signal.cols);
        double sd = std::sqrt(var);
        if (sd == 0.0) {
            // Constant channel: center to zero rather than divide by zero.
            for (size_t t = 0; t < signal.cols; ++t) row[t] = 0.0f;
        } else {
            for (size_t t = 0; t < signal.cols; ++t) row[t] = float((row[t] - mean) / sd);
        }
    }
}

DatasetManifest ingest(const std::string& root_dir, const PreprocessConfig& pre,
                       const std::string& out_dir, IngestReport* report) {
    fs::path root(root_dir);
    if (!fs::exists(root / "labels.csv"))
        throw IoError("ingest: no recordings found (missing " + (root / "labels.csv").string() + ")");
    CsvTable labels = read_csv((root / "labels.csv").string(), true);
    if (labels.header != std::vector<std::string>{"recording_id", "stimulus_id", "class_id", "subject_id"})
        throw ParseError("ingest: labels.csv must have header recording_id,stimulus_id,class_id,subject_id");
    if (labels.rows.empty()) throw ValidationError("ingest: no recordings found");

    CsvTable classes = read_csv((root / "classes.csv").string(), true);
    if (classes.header != std::vector<std::string>{"class_id", "class_name"})
        throw ParseError("ingest: classes.csv must have header class_id,class_name");

    DatasetManifest m;
    m.dataset_id = root.filename().string();
    std::map<int, std::string> class_names;
    for (size_t i = 0; i < classes.rows.size(); ++i) {
        const auto& row = classes.rows[i];
        try {
            class_names[std::stoi(row[0])] = row[1];
        } catch (const std::exception&) {
            throw ParseError("ingest: classes.csv line " + std::to_string(classes.row_lines[i]) +
                             ": bad class_id '" + row[0] + "'");
        }
    }
    m.n_classes = class_names.empty() ? 0 : class_names.rbegin()->first + 1;
    m.class_names.resize(size_t(std::max(0, m.n_classes)));
    for (const auto& [id, name] : class_names)
        if (id >= 0) m.class_names[size_t(id)] = name;

    fs::create_directories(fs::path(out_dir) / "signals");
    fs::create_directories(fs::path(out_dir) / "stimuli");

    // Pre-flight: every referenced stimulus and signal file must exist.
    std::vector<std::string> missing;
    std::set<std::string> stim_seen;
    for (const auto& row : labels.rows) {
        fs::path sig = root / "signals" / (row[0] + ".eeg");
        fs::path img = root / "stimuli" / (row[1] + ".png");
        if (!fs::exists(sig)) missing.push_back("signal " + sig.string());
        if (!fs::exists(img)) missing.push_back("stimulus " + img.string());
    }
    if (!missing.empty()) {
        std::string msg = "ingest: missing files:";
        for (const auto& s : missing) msg += "\n  " + s;
        throw IoError(msg);
    }

    IngestReport rep;
    std::set<int> subjects;
    std::set<int> class_ids;
    for (size_t i = 0; i < labels.rows.size(); ++i) {
        const auto& row = labels.rows[i];
        RecordingEntry rec;
        rec.recording_id = row[0];
        rec.stimulus_id = row[1];
        try {
            rec.class_id = std::stoi(row[2]);
            rec.subject_id = std::stoi(row[3]);
        } catch (const std::exception&) {
            throw ParseError("ingest: labels.csv line " + std::to_string(labels.row_lines[i]) +
                             ": bad class_id or subject_id");
        }

        MatF signal = read_signal((root / "signals" / (rec.recording_id + ".eeg")).string());
        if (!all_finite(signal)) {
            rep.n_rejected++;
            rep.warnings.push_back("rejected recording " + rec.recording_id + ": non-finite samples");
            continue;
        }
        if (pre.crop) {
            auto [t0, t1] = *pre.crop;
            if (t0 < 0 || t1 > int(signal.cols) || t0 >= t1)
                throw ValidationError("ingest: crop [" + std::to_string(t0) + ", " + std::to_string(t1) +
                                      ") out of range for " + std::to_string(signal.cols) + " timesteps");
            MatF cropped(signal.rows, size_t(t1 - t0));
            for (size_t ch = 0; ch < signal.rows; ++ch)
                for (int t = t0; t < t1; ++t) cropped(ch, size_t(t - t0)) = signal(ch, size_t(t));
            signal = std::move(cropped);
        }
        if (pre.normalize == PreprocessConfig::Normalize::per_channel_zscore) zscore_per_channel(signal);

        rec.signal_path = "signals/" + rec.recording_id + ".eeg";
        write_signal((fs::path(out_dir) / rec.signal_path).string(), signal);

        if (!stim_seen.count(rec.stimulus_id)) {
            stim_seen.insert(rec.stimulus_id);
            StimulusEntry stim;
            stim.stimulus_id = rec.stimulus_id;
            stim.class_id = rec.class_id;
            stim.image_path = "stimuli/" + rec.stimulus_id + ".png";
            fs::copy_file(root / "stimuli" / (rec.stimulus_id + ".png"),
                          fs::path(out_dir) / stim.image_path, fs::copy_options::overwrite_existing);
            m.stimuli.push_back(std::move(stim));
        }
        subjects.insert(rec.subject_id);
        class_ids.insert(rec.class_id);
        m.split_train.push_back(rec.recording_id);
        m.recordings.push_back(std::move(rec));
    }
    if (m.recordings.empty()) throw ValidationError("ingest: no recordings found");

    std::sort(m.recordings.begin(), m.recordings.end(),
              [](const auto& a, const auto& b) { return a.recording_id < b.recording_id; });
    std::sort(m.stimuli.begin(), m.stimuli.end(),
              [](const auto& a, const auto& b) { return a.stimulus_id < b.stimulus_id; });
    std::sort(m.split_train.begin(), m.split_train.end());

    auto viol = validate_manifest(m);
    if (!viol.empty()) throw ValidationError("ingest: produced invalid manifest: " + viol.front());

    save_manifest((fs::path(out_dir) / "manifest.json").string(), m);
    m.root_dir = out_dir;

    rep.n_recordings = m.recordings.size();
    rep.n_classes = size_t(class_ids.size());
    rep.n_subjects = subjects.size();
    if (report) *report = rep;
    return m;
}

DatasetManifest make_splits(const DatasetManifest& manifest, const SplitFractions& f, uint64_t seed) {
    double sum = f.train + f.val + f.test;
    if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError("make_splits: fractions sum to " + std::to_string(sum) + ", expected 1");
    if (f.train < 0 || f.val < 0 || f.test < 0)
        throw ValidationError("make_splits: fractions must be nonnegative");

    const double fracs[3] = {f.train, f.val, f.test};
    int n_requested = 0;
    for (double x : fracs)
        if (x > 0) ++n_requested;

    // Group stimuli by class; each stimulus carries all its recordings.
    std::map<int, std::vector<std::string>> stimuli_by_class;
    for (const auto& s : manifest.stimuli) stimuli_by_class[s.class_id].push_back(s.stimulus_id);

    std::unordered_map<std::string, Split> stim_split;
    for (auto& [class_id, stims] : stimuli_by_class) {
        if (int(stims.size()) < n_requested)
            throw ValidationError("make_splits: class " + std::to_string(class_id) + " has only " +
                                  std::to_string(stims.size()) + " stimuli but " +
                                  std::to_string(n_requested) + " splits requested");
        std::sort(stims.begin(), stims.end());
        Rng rng = Rng(seed).fork("split").fork("class", uint64_t(class_id));
        rng.shuffle(stims);

        // Largest-remainder apportionment; deviation from fraction*count
        // stays below one stimulus per split.
        size_t n = stims.size();
        size_t counts[3];
        double rema[3];
        size_t assigned = 0;
        for (int s = 0; s < 3; ++s) {
            double exact = fracs[s] * double(n);
            counts[s] = size_t(std::floor(exact + 1e-12));
            rema[s] = exact - double(counts[s]);
            assigned += counts[s];
        }
        int order[3] = {0, 1, 2};
        std::sort(order, order + 3, [&](int a, int b) {
            if (rema[a] != rema[b]) return rema[a] > rema[b];
            return a < b; // stable tie-break: train, val, test
        });
        for (size_t left = n - assigned, i = 0; left > 0; --left, ++i) counts[order[i % 3]]++;

        size_t pos = 0;
        for (int s = 0; s < 3; ++s)
            for (size_t i = 0; i < counts[s]; ++i) stim_split[stims[pos++]] = Split(s);
    }

    DatasetManifest out = manifest;
    out.split_train.clear();
    out.split_val.clear();
    out.split_test.clear();
    for (const auto& r : out.recordings) {
        auto it = stim_split.find(r.stimulus_id);
        if (it == stim_split.end())
            throw ValidationError("make_splits: recording " + r.recording_id +
                                  " references stimulus " + r.stimulus_id + " with no class grouping");
        out.split_ids(it->second).push_back(r.recording_id);
    }
    return out;
}

} // namespace eegdec
