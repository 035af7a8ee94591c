#include "deva/image.hpp"

namespace deva {

DepthImage decode_depth(const Raw16Image& raw, double depth_scale) {
    if (!(depth_scale > 0)) throw Error("decode_depth: depth_scale must be > 0");
    DepthImage out(raw.width, raw.height, float(depth_scale));
    const double inv = 1.0 / depth_scale;
    const int64_t n = int64_t(raw.data.size());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        out.data[size_t(i)] = float(double(raw.data[size_t(i)]) * inv);
    }
    return out;
}

GrayImage to_gray(const RgbImage& rgb) {
    GrayImage g(rgb.width, rgb.height);
    const int64_t n = int64_t(g.data.size());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const uint8_t* p = rgb.data.data() + 3 * size_t(i);
        g.data[size_t(i)] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    }
    return g;
}

}  // namespace deva
