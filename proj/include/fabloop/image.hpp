#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fabloop/errors.hpp"

namespace fabloop {

inline std::size_t checked_area(int w, int h, const char* what) {
    if (w < 1 || h < 1)
        throw ValidationError(std::string(what) + ": width and height must be >= 1");
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
}

/// 8-bit grayscale image, row-major, origin at the top-left pixel center.
/// Coordinates are (u right, v down); pixel (u, v) sits at continuous (u, v).
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // width * height entries

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(checked_area(w, h, "GrayImage"), fill) {}

    std::uint8_t at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }
    std::uint8_t& at(int u, int v) { return pixels[static_cast<std::size_t>(v) * width + u]; }
    bool in_bounds(int u, int v) const { return u >= 0 && u < width && v >= 0 && v < height; }

    bool operator==(const GrayImage& o) const = default;
};

/// Per-pixel foreground mask produced by thresholding; 1 = defect candidate.
struct BinaryImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> mask;  // 0 or 1, width * height entries

    BinaryImage() = default;
    BinaryImage(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), mask(checked_area(w, h, "BinaryImage"), fill) {}

    bool at(int u, int v) const { return mask[static_cast<std::size_t>(v) * width + u] != 0; }
    void set(int u, int v, bool fg) { mask[static_cast<std::size_t>(v) * width + u] = fg ? 1 : 0; }

    bool operator==(const BinaryImage& o) const = default;
};

}  // namespace fabloop
