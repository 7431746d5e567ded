#pragma once

#include <filesystem>
#include <vector>

#include "igcn/common.hpp"

namespace igcn {

// Single-channel grayscale image, row-major, values in [0, 1] after display
// normalization. Stored on disk as 16-bit binary PGM (P5).
struct Image {
    int height = 0;
    int width = 0;
    std::vector<float> px;

    Image() = default;
    Image(int h, int w) : height(h), width(w), px(static_cast<std::size_t>(h) * w, 0.0f) {}

    float& at(int y, int x) { return px[static_cast<std::size_t>(y) * width + x]; }
    float at(int y, int x) const { return px[static_cast<std::size_t>(y) * width + x]; }
};

Image load_pgm16(const std::filesystem::path& path);
void save_pgm16(const Image& img, const std::filesystem::path& path);

} // namespace igcn
