#include "rfmesh/image.hpp"

#include <png.h>

#include <cstdio>
#include <stdexcept>

#include "rfmesh/errors.hpp"

namespace rfmesh {

namespace {

struct FileCloser {
    FILE* f = nullptr;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

}  // namespace

void save_png_bytes(const std::string& path, int width, int height, int channels,
                    const std::vector<uint8_t>& data) {
    if (channels != 3 && channels != 4) throw RuntimeFailure("png: channels must be 3 or 4");
    if (data.size() != size_t(width) * height * channels)
        throw RuntimeFailure("png: byte buffer size mismatch for " + path);

    FileCloser fc;
    fc.f = std::fopen(path.c_str(), "wb");
    if (!fc.f) throw RuntimeFailure("png: cannot open for write: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw RuntimeFailure("png: write struct alloc failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw RuntimeFailure("png: info struct alloc failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw RuntimeFailure("png: encode failed for " + path);
    }

    png_init_io(png, fc.f);
    png_set_IHDR(png, info, width, height, 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_RGBA,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<png_bytep>(data.data() + size_t(y) * width * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void save_png(const std::string& path, const Image& img) {
    std::vector<uint8_t> bytes(img.pixel_count() * 3);
    for (size_t i = 0; i < img.rgb.size(); ++i) bytes[i] = quantize_u8(img.rgb[i]);
    save_png_bytes(path, img.width, img.height, 3, bytes);
}

void load_png_rgba(const std::string& path, int& width, int& height,
                   std::vector<uint8_t>& rgba) {
    FileCloser fc;
    fc.f = std::fopen(path.c_str(), "rb");
    if (!fc.f) throw InputError("png: cannot open: " + path);

    png_byte header[8];
    if (std::fread(header, 1, 8, fc.f) != 8 || png_sig_cmp(header, 0, 8))
        throw InputError("png: not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw RuntimeFailure("png: read struct alloc failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw RuntimeFailure("png: info struct alloc failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InputError("png: decode failed for " + path);
    }

    png_init_io(png, fc.f);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_gray_to_rgb(png);
    png_set_add_alpha(png, 0xff, PNG_FILLER_AFTER);
    png_read_update_info(png, info);

    width = int(png_get_image_width(png, info));
    height = int(png_get_image_height(png, info));
    rgba.assign(size_t(width) * height * 4, 0);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) rows[y] = rgba.data() + size_t(y) * width * 4;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
}

Image load_png(const std::string& path, const Vec3& background) {
    int w = 0, h = 0;
    std::vector<uint8_t> rgba;
    load_png_rgba(path, w, h, rgba);
    Image img(w, h);
    for (size_t i = 0; i < size_t(w) * h; ++i) {
        double a = dequantize_u8(rgba[i * 4 + 3]);
        Vec3 c{dequantize_u8(rgba[i * 4]), dequantize_u8(rgba[i * 4 + 1]),
               dequantize_u8(rgba[i * 4 + 2])};
        img.set_index(i, c * a + background * (1.0 - a));
    }
    return img;
}

}  // namespace rfmesh
