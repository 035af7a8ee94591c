#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "deva/geometry.hpp"
#include "deva/image.hpp"
#include "deva/trajectory.hpp"

namespace deva {

// Ray-cast RGB-D test scene: a noise-textured back wall and floor, plus an
// optional textured box that translates through the view while the camera
// moves on a gentle non-collinear path. Ground-truth poses and per-frame
// box masks come with every frame; everything is a pure function of the
// options, so renders are deterministic.
struct SyntheticOptions {
    int width = 320;
    int height = 240;
    int frames = 30;
    double fps = 10.0;
    uint64_t seed = 7;
    bool with_box = true;
    double camera_step = 0.01;  // m/frame along +x
    double box_step = -0.02;    // m/frame along x
};

struct SyntheticFrame {
    double timestamp = 0;
    RgbImage rgb;
    DepthImage depth;     // meters, 0 = no hit
    BinaryMask box_mask;  // 1 = pixel shows the moving box
    Se3Pose pose_wc;
};

class SyntheticScene {
  public:
    explicit SyntheticScene(SyntheticOptions opts = {});

    const SyntheticOptions& options() const { return opts_; }
    CameraIntrinsics intrinsics() const { return intr_; }
    int frame_count() const { return opts_.frames; }
    double timestamp(int index) const;

    Se3Pose camera_pose(int index) const;  // camera-to-world
    SyntheticFrame render(int index) const;
    Trajectory groundtruth() const;

    // True when a world point lies inside the box volume at any frame,
    // grown by margin meters on every side.
    bool in_swept_volume(const Eigen::Vector3d& world, double margin = 0.0) const;

  private:
    Eigen::Vector3d box_center(int index) const;

    SyntheticOptions opts_;
    CameraIntrinsics intr_;
    Eigen::Matrix3d box_rot_;       // box-to-world rotation (yaw)
    Eigen::Vector3d box_half_;      // half extents, meters
    Eigen::Vector3d box_center0_;   // center at frame 0
};

// Write the scene to disk in TUM RGB-D layout: rgb/ and depth/ image
// directories with rgb.txt/depth.txt indices, groundtruth.txt,
// intrinsics.txt ("fx fy cx cy"), and masks_gt/ with per-frame box masks.
void write_tum_sequence(const SyntheticScene& scene, const std::string& dir,
                        double depth_scale = 5000.0);

}  // namespace deva
