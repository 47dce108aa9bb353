#include "svlf/image.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little, "pfmx writer assumes little-endian host");

namespace svlf {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

uint8_t to_byte(float v) {
    const float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    return static_cast<uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

void write_png(const std::string& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("png writer supports 1 or 3 channels");
    if (img.width == 0 || img.height == 0) throw std::invalid_argument("zero-size image");

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) throw std::runtime_error("libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png write failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<uint8_t> row(size_t(img.width) * img.channels);
    for (uint32_t y = 0; y < img.height; ++y) {
        for (uint32_t x = 0; x < img.width; ++x)
            for (uint32_t c = 0; c < img.channels; ++c)
                row[size_t(x) * img.channels + c] = to_byte(img.at(x, y, c));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) throw std::runtime_error("libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png read failed: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const uint32_t w = png_get_image_width(png, info);
    const uint32_t h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const uint32_t channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unsupported png channel count in " + path);
    }

    Image img = Image::make(w, h, channels);
    std::vector<uint8_t> row(size_t(w) * channels);
    for (uint32_t y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (uint32_t x = 0; x < w; ++x)
            for (uint32_t c = 0; c < channels; ++c)
                img.at(x, y, c) = row[size_t(x) * channels + c] / 255.0f;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_pfmx(const std::string& path, const Image& img) {
    if (img.channels != 1) throw std::invalid_argument("pfmx stores single-channel data");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open for writing: " + path);
    const char magic[4] = {'P', 'F', 'M', 'X'};
    const uint32_t header[3] = {img.width, img.height, 0};
    if (std::fwrite(magic, 1, 4, fp.get()) != 4 ||
        std::fwrite(header, 4, 3, fp.get()) != 3 ||
        std::fwrite(img.px.data(), 4, img.px.size(), fp.get()) != img.px.size())
        throw std::runtime_error("pfmx write failed: " + path);
}

Image read_pfmx(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    uint32_t header[3];
    if (std::fread(magic, 1, 4, fp.get()) != 4 || std::memcmp(magic, "PFMX", 4) != 0)
        throw std::runtime_error("bad pfmx magic in " + path);
    if (std::fread(header, 4, 3, fp.get()) != 3) throw std::runtime_error("truncated pfmx header");
    Image img = Image::make(header[0], header[1], 1);
    if (std::fread(img.px.data(), 4, img.px.size(), fp.get()) != img.px.size())
        throw std::runtime_error("truncated pfmx data in " + path);
    return img;
}

}  // namespace svlf
