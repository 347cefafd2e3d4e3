#include "eegdec/caption.hpp"

#include "eegdec/csv.hpp"

namespace eegdec {

std::vector<std::string> CaptionProviderConfig::violations() const {
    std::vector<std::string> v;
    if (mode == CaptionSource::label_template) {
        size_t first = label_template.find("{label}");
        if (first == std::string::npos)
            v.push_back("label template must contain the {label} placeholder");
        else if (label_template.find("{label}", first + 1) != std::string::npos)
            v.push_back("label template must contain exactly one {label} placeholder");
    } else if (external_path.empty()) {
        v.push_back("external caption mode requires a file path");
    }
    return v;
}

std::map<std::string, std::string> load_external_captions(const std::string& path) {
    CsvTable t = read_csv(path, true);
    if (t.header != std::vector<std::string>{"stimulus_id", "caption"})
        throw ParseError(path + ": expected header stimulus_id,caption");
    std::map<std::string, std::string> out;
    for (size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::string where = path + ": line " + std::to_string(t.row_lines[i]);
        if (row[0].empty()) throw ParseError(where + ": empty stimulus_id");
        if (row[1].empty()) throw ParseError(where + ": empty caption for stimulus " + row[0]);
        if (!out.emplace(row[0], row[1]).second)
            throw ParseError(where + ": duplicate stimulus_id " + row[0]);
    }
    return out;
}

CaptionProvider::CaptionProvider(CaptionProviderConfig config, const DatasetManifest& manifest)
    : config_(std::move(config)), class_names_(manifest.class_names) {
    auto viol = config_.violations();
    if (!viol.empty()) throw ValidationError("caption provider: " + viol.front());
    for (const auto& s : manifest.stimuli) stimulus_class_[s.stimulus_id] = s.class_id;
    if (config_.mode == CaptionSource::external_file)
        external_ = load_external_captions(config_.external_path);
}

Caption CaptionProvider::caption_for_class(int class_id) const {
    if (class_id < 0 || class_id >= int(class_names_.size()))
        throw ValidationError("caption: class_id " + std::to_string(class_id) +
                              " has no class name in the manifest");
    if (config_.mode != CaptionSource::label_template)
        throw ValidationError("caption: external captions are keyed by stimulus, not class");
    // The class label is substituted verbatim; no case or punctuation changes.
    std::string text = config_.label_template;
    text.replace(text.find("{label}"), 7, class_names_[size_t(class_id)]);
    Caption c;
    c.text = std::move(text);
    c.source = CaptionSource::label_template;
    c.class_id = class_id;
    return c;
}

Caption CaptionProvider::caption_for_stimulus(const std::string& stimulus_id) const {
    auto cit = stimulus_class_.find(stimulus_id);
    if (cit == stimulus_class_.end())
        throw ValidationError("caption: unknown stimulus " + stimulus_id);
    if (config_.mode == CaptionSource::label_template) {
        Caption c = caption_for_class(cit->second);
        c.stimulus_id = stimulus_id;
        return c;
    }
    auto it = external_.find(stimulus_id);
    if (it == external_.end())
        throw ValidationError("caption: no external caption for stimulus " + stimulus_id);
    Caption c;
    c.text = it->second; // stored caption, returned unmodified
    c.source = CaptionSource::external_file;
    c.stimulus_id = stimulus_id;
    c.class_id = cit->second;
    return c;
}

} // namespace eegdec
