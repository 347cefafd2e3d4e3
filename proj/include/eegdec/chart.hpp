#pragma once

#include "eegdec/types.hpp"

#include <string>
#include <vector>

namespace eegdec {

struct BarChartSpec {
    std::string title;
    std::vector<std::string> labels;
    std::vector<double> values;
    bool lower_is_better = false;
};

// Renders a simple labeled bar chart (5x7 bitmap font, one bar per label).
Image render_bar_chart(const BarChartSpec& spec);

// Draws a text string into an image at (x, y); uppercase letters, digits and
// basic punctuation only, everything else prints as a dot.
void draw_text(Image& img, int x, int y, const std::string& text, float r, float g, float b);

} // namespace eegdec
