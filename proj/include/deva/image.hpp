#pragma once

#include <cstdint>
#include <vector>

#include "deva/error.hpp"

namespace deva {

// All images are row-major. Accessors take (x, y) = (column, row).

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> data;  // 3 * width * height, interleaved r,g,b

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), data(size_t(3) * w * h, 0) {}

    uint8_t* px(int x, int y) { return data.data() + 3 * (size_t(y) * width + x); }
    const uint8_t* px(int x, int y) const { return data.data() + 3 * (size_t(y) * width + x); }
};

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    GrayImage() = default;
    GrayImage(int w, int h) : width(w), height(h), data(size_t(w) * h, 0.f) {}

    float at(int x, int y) const { return data[size_t(y) * width + x]; }
    float& at(int x, int y) { return data[size_t(y) * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

// Raw 16-bit depth as stored on disk (TUM: value = depth_scale * meters).
struct Raw16Image {
    int width = 0;
    int height = 0;
    std::vector<uint16_t> data;

    Raw16Image() = default;
    Raw16Image(int w, int h) : width(w), height(h), data(size_t(w) * h, 0) {}

    uint16_t at(int x, int y) const { return data[size_t(y) * width + x]; }
    uint16_t& at(int x, int y) { return data[size_t(y) * width + x]; }
};

// Metric depth in meters. 0 marks invalid measurements.
struct DepthImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;
    float depth_scale = 5000.f;  // raw units per meter used at decode time

    DepthImage() = default;
    DepthImage(int w, int h, float scale = 5000.f)
        : width(w), height(h), data(size_t(w) * h, 0.f), depth_scale(scale) {}

    float at(int x, int y) const { return data[size_t(y) * width + x]; }
    float& at(int x, int y) { return data[size_t(y) * width + x]; }
    bool valid(int x, int y) const { return at(x, y) > 0.f; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

// 1 = dynamic / remove, 0 = static / keep. Same convention everywhere.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(int w, int h) : width(w), height(h), bits(size_t(w) * h, 0) {}

    uint8_t at(int x, int y) const { return bits[size_t(y) * width + x]; }
    uint8_t& at(int x, int y) { return bits[size_t(y) * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    size_t popcount() const {
        size_t n = 0;
        for (uint8_t b : bits) n += b != 0;
        return n;
    }
    bool same_size(const BinaryMask& o) const { return width == o.width && height == o.height; }
    bool same_size(int w, int h) const { return width == w && height == h; }
};

// raw / depth_scale, in meters; raw 0 stays 0 (invalid).
DepthImage decode_depth(const Raw16Image& raw, double depth_scale);

// Rec. 601 luma.
GrayImage to_gray(const RgbImage& rgb);

}  // namespace deva
