#include "deva/dynamic_mask.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "deva/dbscan.hpp"
#include "deva/error.hpp"

namespace deva {
namespace {

// Window centers sit at 1, 4, 7, ... so every 3x3 window is fully inside the
// image; windows that would be truncated at the border are skipped.
struct WindowGrid {
    int rows = 0, cols = 0;
    static WindowGrid of(const DepthImage& d) {
        WindowGrid g;
        if (d.width >= 3 && d.height >= 3) {
            g.cols = (d.width - 3) / 3 + 1;
            g.rows = (d.height - 3) / 3 + 1;
        }
        return g;
    }
    // Traversal order follows the extraction loops: columns outer, rows inner.
    int index(int wc, int wr) const { return wc * rows + wr; }
    int count() const { return rows * cols; }
};

double variance9(const DepthImage& depth, int col, int row) {
    double sum = 0;
    for (int r = row - 1; r <= row + 1; ++r)
        for (int c = col - 1; c <= col + 1; ++c) sum += double(depth.at(c, r));
    const double mean = sum / 9.0;
    double ss = 0;
    for (int r = row - 1; r <= row + 1; ++r)
        for (int c = col - 1; c <= col + 1; ++c) {
            double dv = double(depth.at(c, r)) - mean;
            ss += dv * dv;
        }
    return ss / 9.0;
}

// First pixel in row-major window order with depth > 0, or row = -1.
DynamicPixel first_valid_pixel(const DepthImage& depth, int col, int row) {
    for (int r = row - 1; r <= row + 1; ++r)
        for (int c = col - 1; c <= col + 1; ++c)
            if (depth.at(c, r) > 0.f) return {r, c, depth.at(c, r)};
    return {-1, -1, 0.f};
}

template <bool Parallel>
DynamicPixelSet extract_impl(const DepthImage& depth, const VarianceThresholds& th) {
    th.validate();
    const WindowGrid grid = WindowGrid::of(depth);
    std::vector<DynamicPixel> slots(size_t(grid.count()), DynamicPixel{-1, -1, 0.f});
#pragma omp parallel for schedule(static) collapse(2) if (Parallel)
    for (int wc = 0; wc < grid.cols; ++wc) {
        for (int wr = 0; wr < grid.rows; ++wr) {
            const int col = 1 + 3 * wc;
            const int row = 1 + 3 * wr;
            const double v = variance9(depth, col, row);
            if (v >= th.tau_a && v <= th.tau_b) {
                DynamicPixel p = first_valid_pixel(depth, col, row);
                if (p.row >= 0) slots[size_t(grid.index(wc, wr))] = p;
            }
        }
    }
    DynamicPixelSet out;
    for (const auto& p : slots)
        if (p.row >= 0) out.push_back(p);
    return out;
}

template <bool Parallel>
BinaryMask band_mask_impl(const DepthImage& depth, double center, double tol) {
    BinaryMask m(depth.width, depth.height);
    const int64_t n = int64_t(depth.data.size());
#pragma omp parallel for schedule(static) if (Parallel)
    for (int64_t i = 0; i < n; ++i)
        m.bits[size_t(i)] = std::abs(double(depth.data[size_t(i)]) - center) <= tol ? 1 : 0;
    return m;
}

template <bool Parallel>
BinaryMask broad_impl(const DepthImage& depth, const DynamicPixelSet& pk) {
    BinaryMask m(depth.width, depth.height);
    if (pk.empty()) return m;
    float lo = std::numeric_limits<float>::max();
    float hi = std::numeric_limits<float>::lowest();
    for (const auto& p : pk) {
        lo = std::min(lo, p.depth);
        hi = std::max(hi, p.depth);
    }
    const int64_t n = int64_t(depth.data.size());
#pragma omp parallel for schedule(static) if (Parallel)
    for (int64_t i = 0; i < n; ++i) {
        const float d = depth.data[size_t(i)];
        m.bits[size_t(i)] = (d > lo && d < hi) ? 1 : 0;
    }
    return m;
}

// Separable square dilation: horizontal running max, then vertical.
BinaryMask dilate_separable(const BinaryMask& mask, int radius) {
    BinaryMask tmp(mask.width, mask.height);
    const int w = mask.width, h = mask.height;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        const uint8_t* src = mask.bits.data() + size_t(y) * w;
        uint8_t* dst = tmp.bits.data() + size_t(y) * w;
        for (int x = 0; x < w; ++x) {
            uint8_t v = 0;
            for (int k = std::max(0, x - radius); k <= std::min(w - 1, x + radius); ++k)
                v |= src[k];
            dst[x] = v;
        }
    }
    BinaryMask out(mask.width, mask.height);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        uint8_t* dst = out.bits.data() + size_t(y) * w;
        for (int x = 0; x < w; ++x) {
            uint8_t v = 0;
            for (int k = std::max(0, y - radius); k <= std::min(h - 1, y + radius); ++k)
                v |= tmp.bits[size_t(k) * w + x];
            dst[x] = v;
        }
    }
    return out;
}

float lower_median(std::vector<float>& v) {
    const size_t mid = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + long(mid), v.end());
    return v[mid];
}

}  // namespace

void VarianceThresholds::validate() const {
    if (!(tau_a > 0) || !(tau_a < tau_b)) throw Error("thresholds: need 0 < tau_a < tau_b");
    if (!(tau_c > 0) || !(tau_d > 0)) throw Error("thresholds: tau_c, tau_d must be > 0");
}

double window_variance(const DepthImage& depth, int col, int row) {
    if (col < 1 || col > depth.width - 2 || row < 1 || row > depth.height - 2)
        throw Error("window_variance: 3x3 window out of bounds");
    return variance9(depth, col, row);
}

DynamicPixelSet extract_dynamic_pixels(const DepthImage& depth, const VarianceThresholds& th) {
    return extract_impl<true>(depth, th);
}

std::vector<double> window_variances(const DepthImage& depth) {
    const WindowGrid grid = WindowGrid::of(depth);
    std::vector<double> out(size_t(grid.count()), 0.0);
#pragma omp parallel for schedule(static) collapse(2)
    for (int wc = 0; wc < grid.cols; ++wc)
        for (int wr = 0; wr < grid.rows; ++wr)
            out[size_t(grid.index(wc, wr))] = variance9(depth, 1 + 3 * wc, 1 + 3 * wr);
    return out;
}

BinaryMask depth_mask(const DepthImage& depth, const DynamicPixelSet& pk,
                      const VarianceThresholds& th, double pixel_eps, int pixel_min_pts) {
    th.validate();
    BinaryMask out(depth.width, depth.height);
    if (pk.empty()) return out;

    std::vector<double> coords;
    coords.reserve(pk.size() * 2);
    for (const auto& p : pk) {
        if (!depth.in_bounds(p.col, p.row)) throw Error("depth_mask: pixel out of bounds");
        coords.push_back(double(p.row));
        coords.push_back(double(p.col));
    }
    const ClusterLabeling labeling = dbscan(coords, 2, pixel_eps, pixel_min_pts);

    for (const auto& members : labeling.groups()) {
        int rmin = depth.height, rmax = -1, cmin = depth.width, cmax = -1;
        for (int idx : members) {
            rmin = std::min(rmin, pk[size_t(idx)].row);
            rmax = std::max(rmax, pk[size_t(idx)].row);
            cmin = std::min(cmin, pk[size_t(idx)].col);
            cmax = std::max(cmax, pk[size_t(idx)].col);
        }
        std::vector<float> valid;
        for (int r = rmin; r <= rmax; ++r)
            for (int c = cmin; c <= cmax; ++c) {
                float d = depth.at(c, r);
                if (double(d) > th.tau_c) valid.push_back(d);
            }
        if (valid.empty()) continue;
        const double median = double(lower_median(valid));

        BinaryMask region = largest_component(depth_band_mask(depth, median, th.tau_d));
        for (size_t i = 0; i < out.bits.size(); ++i) out.bits[i] |= region.bits[i];
    }
    return out;
}

BinaryMask broad_mask(const DepthImage& depth, const DynamicPixelSet& pk) {
    return broad_impl<true>(depth, pk);
}

BinaryMask merge_masks(const BinaryMask* ext, const BinaryMask& m_depth,
                       const BinaryMask& m_broad) {
    if (!m_depth.same_size(m_broad) || (ext && !ext->same_size(m_depth)))
        throw Error("merge_masks: mask dimensions differ");
    BinaryMask out(m_depth.width, m_depth.height);
    const int64_t n = int64_t(out.bits.size());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        uint8_t b = m_depth.bits[size_t(i)] | m_broad.bits[size_t(i)];
        if (ext) b |= ext->bits[size_t(i)];
        out.bits[size_t(i)] = b ? 1 : 0;
    }
    return out;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
    if (radius < 0) throw Error("dilate: radius must be >= 0");
    if (radius == 0) return mask;
    return dilate_separable(mask, radius);
}

BinaryMask depth_band_mask(const DepthImage& depth, double center, double tol) {
    return band_mask_impl<true>(depth, center, tol);
}

BinaryMask largest_component(const BinaryMask& mask) {
    const int w = mask.width, h = mask.height;
    std::vector<int32_t> label(size_t(w) * h, -1);
    std::vector<size_t> sizes;
    std::vector<int> stack;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t at = size_t(y) * w + x;
            if (!mask.bits[at] || label[at] >= 0) continue;
            const int32_t id = int32_t(sizes.size());
            size_t count = 0;
            stack.push_back(int(at));
            label[at] = id;
            while (!stack.empty()) {
                const int cur = stack.back();
                stack.pop_back();
                ++count;
                const int cy = cur / w, cx = cur % w;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        const int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                        const size_t nat = size_t(ny) * w + nx;
                        if (mask.bits[nat] && label[nat] < 0) {
                            label[nat] = id;
                            stack.push_back(int(nat));
                        }
                    }
            }
            sizes.push_back(count);
        }
    }

    BinaryMask out(w, h);
    if (sizes.empty()) return out;
    // First component with the maximal size wins; component ids are in
    // row-major discovery order, so this is the earliest top-left tie-break.
    int32_t best = 0;
    for (int32_t id = 1; id < int32_t(sizes.size()); ++id)
        if (sizes[size_t(id)] > sizes[size_t(best)]) best = id;
    for (size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = label[i] == best ? 1 : 0;
    return out;
}

namespace reference {

DynamicPixelSet extract_dynamic_pixels(const DepthImage& depth, const VarianceThresholds& th) {
    return extract_impl<false>(depth, th);
}

BinaryMask broad_mask(const DepthImage& depth, const DynamicPixelSet& pk) {
    return broad_impl<false>(depth, pk);
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
    if (radius < 0) throw Error("dilate: radius must be >= 0");
    BinaryMask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            uint8_t v = 0;
            for (int dy = -radius; dy <= radius && !v; ++dy)
                for (int dx = -radius; dx <= radius && !v; ++dx) {
                    int nx = x + dx, ny = y + dy;
                    if (nx >= 0 && nx < mask.width && ny >= 0 && ny < mask.height)
                        v = mask.at(nx, ny);
                }
            out.at(x, y) = v;
        }
    return out;
}

BinaryMask depth_band_mask(const DepthImage& depth, double center, double tol) {
    return band_mask_impl<false>(depth, center, tol);
}

}  // namespace reference
}  // namespace deva
