#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deva/geometry.hpp"
#include "deva/image.hpp"

namespace deva {

struct ColoredPoint {
    float x = 0, y = 0, z = 0;
    uint8_t r = 0, g = 0, b = 0;
};

struct ColoredPointCloud {
    std::vector<ColoredPoint> points;

    size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

inline constexpr double kDefaultMaxRange = 5.0;  // meters

// Back-project every stride-th pixel with depth in (0, max_range] and
// mask == 0 (mask may be null), transform camera-to-world, attach color.
ColoredPointCloud frame_to_cloud(const RgbImage& rgb, const DepthImage& depth,
                                 const BinaryMask* mask, const CameraIntrinsics& intr,
                                 const Se3Pose& pose_wc, int stride,
                                 double max_range = kDefaultMaxRange);

namespace reference {
ColoredPointCloud frame_to_cloud(const RgbImage& rgb, const DepthImage& depth,
                                 const BinaryMask* mask, const CameraIntrinsics& intr,
                                 const Se3Pose& pose_wc, int stride,
                                 double max_range = kDefaultMaxRange);
}  // namespace reference

// Concatenate clouds; voxel > 0 additionally downsamples to one point per
// occupied voxel (centroid position, mean color), emitted in sorted voxel
// order for deterministic output.
ColoredPointCloud stitch(const std::vector<ColoredPointCloud>& clouds, double voxel);

// PLY with float32 x,y,z and uchar red,green,blue. Binary files use
// little-endian layout and round-trip bit-exactly through import_ply.
void export_ply(const ColoredPointCloud& cloud, const std::string& path, bool binary);
ColoredPointCloud import_ply(const std::string& path);

}  // namespace deva
