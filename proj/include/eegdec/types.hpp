#pragma once

#include "eegdec/errors.hpp"
#include "eegdec/mat.hpp"

#include <string>
#include <vector>

namespace eegdec {

// RGB image, float in [0,1], row-major HWC.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<float> rgb;

    Image() = default;
    Image(int h, int w) : height(h), width(w), rgb(size_t(h) * w * 3, 0.0f) {}

    float& at(int y, int x, int c) { return rgb[(size_t(y) * width + x) * 3 + c]; }
    const float& at(int y, int x, int c) const { return rgb[(size_t(y) * width + x) * 3 + c]; }

    bool same_shape(const Image& o) const { return height == o.height && width == o.width; }
};

// One EEG recording: channels x timesteps, plus identity.
struct EEGRecording {
    MatF signal; // [n_channels x n_timesteps]
    int subject_id = 0;
    int class_id = 0;
    std::string stimulus_id;
    std::string recording_id;
};

struct StimulusImage {
    Image pixels;
    std::string stimulus_id;
    int class_id = 0;
};

enum class CaptionSource { label_template, external_file };

struct Caption {
    std::string text;
    CaptionSource source = CaptionSource::label_template;
    std::string stimulus_id;
    int class_id = -1;
};

enum class TargetSpace { image, text };

inline std::string to_string(TargetSpace s) {
    return s == TargetSpace::image ? "image" : "text";
}

inline TargetSpace target_space_from_string(const std::string& s) {
    if (s == "image") return TargetSpace::image;
    if (s == "text") return TargetSpace::text;
    throw ValidationError("unknown target space '" + s + "' (expected image or text)");
}

// Alignment target: an image-space vector (stored as a 1 x d_img matrix) or a
// text-space token grid [n_tokens x d_text].
struct AlignmentTarget {
    TargetSpace space = TargetSpace::image;
    MatF data;
    std::string extractor_id;

    std::vector<std::string> violations() const {
        std::vector<std::string> out;
        if (space == TargetSpace::image && data.rows != 1)
            out.push_back("image-space target must be a single vector, got " +
                          std::to_string(data.rows) + " rows");
        if (data.rows < 1 || data.cols < 1) out.push_back("target has empty shape");
        if (!all_finite(data)) out.push_back("target contains non-finite entries");
        return out;
    }
};

} // namespace eegdec
