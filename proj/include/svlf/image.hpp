#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace svlf {

// Row-major, interleaved channels, values in [0,1] for color/mask content.
struct Image {
    uint32_t width = 0, height = 0, channels = 1;
    std::vector<float> px;

    static Image make(uint32_t w, uint32_t h, uint32_t c, float fill = 0.f) {
        Image img;
        img.width = w;
        img.height = h;
        img.channels = c;
        img.px.assign(size_t(w) * h * c, fill);
        return img;
    }
    float& at(uint32_t x, uint32_t y, uint32_t c = 0) {
        return px[(size_t(y) * width + x) * channels + c];
    }
    float at(uint32_t x, uint32_t y, uint32_t c = 0) const {
        return px[(size_t(y) * width + x) * channels + c];
    }
};

// 8-bit PNG, gray (1 channel) or RGB (3 channels); values clamped to [0,1].
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);  // returns 1 or 3 channels, values /255

// Raw float32 file with a 16-byte header: magic "PFMX", u32 width, u32 height,
// u32 reserved; then little-endian float rows, top row first.
void write_pfmx(const std::string& path, const Image& img);  // 1 channel
Image read_pfmx(const std::string& path);

}  // namespace svlf
