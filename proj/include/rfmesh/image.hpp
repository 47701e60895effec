#pragma once

// RGB image in linear double precision plus 8-bit PNG I/O. One quantization
// rule is shared by every writer so round trips are bit-stable.

#include <cstdint>
#include <string>
#include <vector>

#include "rfmesh/math.hpp"

namespace rfmesh {

struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> rgb;  // height*width*3, row-major, origin at top-left

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(size_t(w) * h * 3, 0.0) {}
    Image(int w, int h, const Vec3& fill) : width(w), height(h), rgb(size_t(w) * h * 3) {
        for (int i = 0; i < w * h; ++i) set_index(i, fill);
    }

    size_t pixel_count() const { return size_t(width) * height; }

    Vec3 at(int x, int y) const {
        size_t i = (size_t(y) * width + x) * 3;
        return {rgb[i], rgb[i + 1], rgb[i + 2]};
    }
    void set(int x, int y, const Vec3& c) { set_index(size_t(y) * width + x, c); }
    Vec3 at_index(size_t i) const { return {rgb[i * 3], rgb[i * 3 + 1], rgb[i * 3 + 2]}; }
    void set_index(size_t i, const Vec3& c) {
        rgb[i * 3] = c.x;
        rgb[i * 3 + 1] = c.y;
        rgb[i * 3 + 2] = c.z;
    }
};

// Clamp to [0,1] then round half away from zero to [0,255].
inline uint8_t quantize_u8(double v) {
    return uint8_t(std::floor(clamp01(v) * 255.0 + 0.5));
}
inline double dequantize_u8(uint8_t q) { return double(q) / 255.0; }

// 8-bit RGB PNG. Values are clamped and quantized with quantize_u8.
void save_png(const std::string& path, const Image& img);

// Writes raw 8-bit rows (RGB if channels==3, RGBA if 4).
void save_png_bytes(const std::string& path, int width, int height, int channels,
                    const std::vector<uint8_t>& data);

// Decodes any PNG to 8-bit RGBA.
void load_png_rgba(const std::string& path, int& width, int& height,
                   std::vector<uint8_t>& rgba);

// Decodes and composites over `background` using the alpha channel (straight
// alpha). Grayscale and paletted PNGs are expanded by libpng.
Image load_png(const std::string& path, const Vec3& background);

}  // namespace rfmesh
