#include "eegdec/chart.hpp"

#include "eegdec/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

namespace eegdec {

namespace {

// 5x7 glyphs, row-major bits (bit 4 = leftmost column).
const std::map<char, std::array<uint8_t, 7>> kFont = {
    {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}}, {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}}, {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
    {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}}, {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
    {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}}, {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}}, {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
    {'A', {0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}}, {'B', {0x1e, 0x11, 0x11, 0x1e, 0x11, 0x11, 0x1e}},
    {'C', {0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e}}, {'D', {0x1c, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1c}},
    {'E', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f}}, {'F', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x10}},
    {'G', {0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0f}}, {'H', {0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
    {'I', {0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0c}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f}},
    {'M', {0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}}, {'P', {0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10}},
    {'Q', {0x0e, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0d}}, {'R', {0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11}},
    {'S', {0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e}}, {'T', {0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0a, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1b, 0x11}}, {'X', {0x11, 0x11, 0x0a, 0x04, 0x0a, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04}}, {'Z', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}}, {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f}}, {'+', {0x00, 0x04, 0x04, 0x1f, 0x04, 0x04, 0x00}},
    {':', {0x00, 0x0c, 0x0c, 0x00, 0x0c, 0x0c, 0x00}}, {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}}, {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'%', {0x19, 0x19, 0x02, 0x04, 0x08, 0x13, 0x13}}, {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

void put_pixel(Image& img, int x, int y, float r, float g, float b) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    img.at(y, x, 0) = r;
    img.at(y, x, 1) = g;
    img.at(y, x, 2) = b;
}

void fill_rect(Image& img, int x0, int y0, int x1, int y1, float r, float g, float b) {
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) put_pixel(img, x, y, r, g, b);
}

} // namespace

void draw_text(Image& img, int x, int y, const std::string& text, float r, float g, float b) {
    int cx = x;
    for (char raw : text) {
        char c = char(std::toupper(static_cast<unsigned char>(raw)));
        auto it = kFont.find(c);
        const auto& glyph = it != kFont.end() ? it->second : kFont.at('.');
        for (int gy = 0; gy < 7; ++gy)
            for (int gx = 0; gx < 5; ++gx)
                if (glyph[size_t(gy)] & (0x10 >> gx)) put_pixel(img, cx + gx, y + gy, r, g, b);
        cx += 6;
    }
}

Image render_bar_chart(const BarChartSpec& spec) {
    if (spec.labels.size() != spec.values.size() || spec.labels.empty())
        throw ValidationError("bar chart: need one value per label");

    const int bar_w = 46, gap = 18, margin = 48;
    const int plot_h = 160;
    const int width = std::max(260, margin * 2 + int(spec.labels.size()) * (bar_w + gap));
    const int height = plot_h + 90;

    Image img(height, width);
    fill_rect(img, 0, 0, width, height, 1.0f, 1.0f, 1.0f);
    draw_text(img, margin, 8, spec.title, 0.1f, 0.1f, 0.1f);

    double vmax = *std::max_element(spec.values.begin(), spec.values.end());
    double vmin = std::min(0.0, *std::min_element(spec.values.begin(), spec.values.end()));
    if (!(vmax > vmin)) vmax = vmin + 1.0;

    const int base_y = 30 + plot_h;
    fill_rect(img, margin - 2, 28, margin - 1, base_y + 1, 0.2f, 0.2f, 0.2f); // y axis
    fill_rect(img, margin - 2, base_y, width - margin / 2, base_y + 1, 0.2f, 0.2f, 0.2f);

    for (size_t i = 0; i < spec.values.size(); ++i) {
        double norm = (spec.values[i] - vmin) / (vmax - vmin);
        int h = int(std::lround(norm * (plot_h - 8)));
        int x0 = margin + 6 + int(i) * (bar_w + gap);
        float hue_r = 0.25f + 0.5f * float(i % 3 == 0);
        float hue_g = 0.35f + 0.4f * float(i % 3 == 1);
        float hue_b = 0.45f + 0.4f * float(i % 3 == 2);
        fill_rect(img, x0, base_y - h, x0 + bar_w, base_y, hue_r, hue_g, hue_b);

        char val[32];
        std::snprintf(val, sizeof val, "%.4g", spec.values[i]);
        draw_text(img, x0, base_y - h - 10, val, 0.1f, 0.1f, 0.1f);
        std::string label = spec.labels[i].substr(0, 8);
        draw_text(img, x0, base_y + 6, label, 0.1f, 0.1f, 0.1f);
    }
    if (spec.lower_is_better)
        draw_text(img, margin, base_y + 20, "LOWER IS BETTER", 0.4f, 0.4f, 0.4f);
    return img;
}

} // namespace eegdec
