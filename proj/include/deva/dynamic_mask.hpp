#pragma once

#include <vector>

#include "deva/image.hpp"

namespace deva {

// Depth-variance band for dynamic-pixel extraction plus the local-mask
// refinement constants. Variances are meters^2, tau_c/tau_d meters.
struct VarianceThresholds {
    double tau_a = 5e-6;
    double tau_b = 5e-5;
    double tau_c = 0.05;
    double tau_d = 0.3;

    void validate() const;
};

struct DynamicPixel {
    int row = 0;
    int col = 0;
    float depth = 0;  // > 0 by construction
};

using DynamicPixelSet = std::vector<DynamicPixel>;

// Population variance (divide by 9) of the 3x3 depth window centered at
// (col, row), zeros included. The window must lie fully inside the image.
double window_variance(const DepthImage& depth, int col, int row);

// Stride-3 window sweep; for each window with tau_a <= variance <= tau_b the
// first pixel in row-major window order with depth > 0 is kept. At most one
// pixel per window.
DynamicPixelSet extract_dynamic_pixels(const DepthImage& depth, const VarianceThresholds& th);

// Variance of every stride-3 window, in traversal order (for histograms).
std::vector<double> window_variances(const DepthImage& depth);

// Clusters the dynamic pixels (DBSCAN on pixel coordinates, noise dropped),
// then per cluster: bounding box, median of depths > tau_c inside the box,
// band mask |F - median| <= tau_d over the whole image, largest 8-connected
// region. The per-cluster regions are OR-ed together.
BinaryMask depth_mask(const DepthImage& depth, const DynamicPixelSet& pk,
                      const VarianceThresholds& th, double pixel_eps = 9.0,
                      int pixel_min_pts = 4);

// 1 where min_depth(pk) < F < max_depth(pk), strict on both ends (1 = dynamic;
// the complement of the range is kept). Empty pk gives an all-zero mask.
BinaryMask broad_mask(const DepthImage& depth, const DynamicPixelSet& pk);

// Bitwise OR under the 1 = dynamic convention; ext may be null.
BinaryMask merge_masks(const BinaryMask* ext, const BinaryMask& m_depth,
                       const BinaryMask& m_broad);

// Morphological dilation with a square structuring element of side 2r+1.
BinaryMask dilate(const BinaryMask& mask, int radius);

// Largest 8-connected component; size ties go to the component containing the
// earliest pixel in row-major order. All-zero input stays all-zero.
BinaryMask largest_component(const BinaryMask& mask);

// |F - center| <= tol, evaluated over the whole image (zeros included).
BinaryMask depth_band_mask(const DepthImage& depth, double center, double tol);

namespace reference {
// Serial counterparts with identical outputs; kept for testing and benchmarks.
DynamicPixelSet extract_dynamic_pixels(const DepthImage& depth, const VarianceThresholds& th);
BinaryMask broad_mask(const DepthImage& depth, const DynamicPixelSet& pk);
BinaryMask dilate(const BinaryMask& mask, int radius);  // naive per-pixel window scan
BinaryMask depth_band_mask(const DepthImage& depth, double center, double tol);
}  // namespace reference

}  // namespace deva
