#pragma once

#include "eegdec/manifest.hpp"
#include "eegdec/types.hpp"

#include <map>
#include <string>

namespace eegdec {

struct CaptionProviderConfig {
    CaptionSource mode = CaptionSource::label_template;
    std::string label_template = "an image of {label}";
    std::string external_path; // required when mode == external_file

    std::vector<std::string> violations() const;
};

// Loads stimulus_id -> caption from a CSV with header `stimulus_id,caption`.
// Duplicate ids, empty captions and ragged rows are errors with line numbers.
std::map<std::string, std::string> load_external_captions(const std::string& path);

// Pure caption source: same stimulus always yields the same Caption.
class CaptionProvider {
  public:
    CaptionProvider(CaptionProviderConfig config, const DatasetManifest& manifest);

    Caption caption_for_class(int class_id) const;
    Caption caption_for_stimulus(const std::string& stimulus_id) const;

    const CaptionProviderConfig& config() const { return config_; }

  private:
    CaptionProviderConfig config_;
    std::vector<std::string> class_names_;
    std::map<std::string, int> stimulus_class_;
    std::map<std::string, std::string> external_;
};

} // namespace eegdec
