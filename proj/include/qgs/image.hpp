#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qgs {

// Row-major RGB image, values nominally in [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> px;  // 3 * width * height, interleaved

    Image() = default;
    Image(int w, int h) : width(w), height(h), px(size_t(3) * w * h, 0.0) {}

    double* at(int x, int y) { return px.data() + 3 * (size_t(y) * width + x); }
    const double* at(int x, int y) const { return px.data() + 3 * (size_t(y) * width + x); }
    size_t count() const { return px.size(); }
};

// 8-bit binary PPM (P6), values clamped and rounded.
void write_ppm(const Image& img, const std::string& path);
Image read_ppm(const std::string& path);

// 8-bit RGB PNG via zlib.
void write_png(const Image& img, const std::string& path);

}  // namespace qgs
