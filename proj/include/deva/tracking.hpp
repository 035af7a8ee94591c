#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "deva/geometry.hpp"
#include "deva/image.hpp"
#include "deva/resampler.hpp"

namespace deva {

// ---------------------------------------------------------------------------
// Keypoint detection and sparse optical flow
// ---------------------------------------------------------------------------

// Half-resolution downsample by 2x2 box averaging.
GrayImage downsample_half(const GrayImage& img);

// Min-eigenvalue corner detection over a 2-level pyramid. Keypoint fields:
// x,y in full-resolution pixels, d = detection window diameter at full
// resolution, theta = intensity-centroid orientation in degrees [0,360),
// sigma = corner response, lambda = pyramid level. Strongest `max_count`
// corners in deterministic order (response desc, then y, x, level).
std::vector<Keypoint> detect_keypoints(const GrayImage& gray, int max_count);

struct FlowMatch {
    Eigen::Vector2d pt = Eigen::Vector2d::Zero();
    uint8_t status = 0;  // 1 = tracked, 0 = out of bounds / singular / divergent
};

// Pyramidal Lucas-Kanade: 3 levels, 21x21 window, <= 30 iterations per
// level, convergence at 1e-2 px step norm.
std::vector<FlowMatch> track_flow(const GrayImage& prev, const GrayImage& cur,
                                  const std::vector<Eigen::Vector2d>& pts);

namespace reference {
std::vector<FlowMatch> track_flow(const GrayImage& prev, const GrayImage& cur,
                                  const std::vector<Eigen::Vector2d>& pts);
}  // namespace reference

// ---------------------------------------------------------------------------
// Pose refinement
// ---------------------------------------------------------------------------

struct Correspondence {
    Eigen::Vector2d p = Eigen::Vector2d::Zero();  // observed pixel, current frame
    Eigen::Vector3d P = Eigen::Vector3d::Zero();  // 3-D point, previous camera frame
    int m = 1;                                    // selection flag; 0 contributes nothing
};

struct PoseOptions {
    int max_iterations = 20;
    double step_tolerance = 1e-8;
    double huber_delta = 2.0;      // px
    double inlier_threshold = 2.0;  // px
    bool robust = true;             // false = plain least squares
};

struct PoseEstimate {
    Se3Pose pose;  // maps previous-camera points into the current camera
    int inliers = 0;
    bool converged = false;
    std::vector<double> cost_history;  // cost at init, then after each accepted step
};

// Residual p - project(pose * P) and its 2x6 Jacobian w.r.t. the tangent
// update [translation, rotation] applied as R' = exp(w) R, t' = t + v.
Eigen::Vector2d reprojection_residual(const CameraIntrinsics& intr, const Se3Pose& pose,
                                      const Eigen::Vector3d& P, const Eigen::Vector2d& p);
Eigen::Matrix<double, 2, 6> reprojection_jacobian(const CameraIntrinsics& intr,
                                                  const Se3Pose& pose,
                                                  const Eigen::Vector3d& P);

// Levenberg-Marquardt refinement of Sum m_i * rho(||p_i - pi(R P_i + t)||).
// Throws Error("degenerate...") with fewer than 4 selected correspondences.
PoseEstimate estimate_pose(const std::vector<Correspondence>& corrs,
                           const CameraIntrinsics& intr, const Se3Pose& init,
                           const PoseOptions& opts = {});

// ---------------------------------------------------------------------------
// Frame-to-frame tracker
// ---------------------------------------------------------------------------

struct TrackerConfig {
    int max_keypoints = 800;
    bool resample = false;           // route correspondences through resample_keypoints
    ResampleConfig resample_cfg;
    PoseOptions pose;
};

struct FrameResult {
    Se3Pose pose_wc;       // camera-to-world pose of this frame
    Se3Pose relative;      // previous-camera -> current-camera motion
    bool lost = false;
    int detected = 0;      // keypoints found in this frame (after mask filter)
    int tracked = 0;       // flow matches surviving all validity filters
    int selected = 0;      // correspondences entering the solver with m=1
    int inliers = 0;
};

// Visual odometry over an RGB-D stream. Keypoints detected on each frame
// seed optical flow into the next; masks (1 = dynamic) veto detection and
// matching; pose refinement is seeded with a constant-velocity prediction.
// Fewer than 4 usable correspondences propagates the prediction and marks
// the frame lost.
class Tracker {
  public:
    Tracker(const CameraIntrinsics& intr, TrackerConfig cfg = {});

    // mask may be null (no dynamic filter).
    FrameResult process(const RgbImage& rgb, const DepthImage& depth, const BinaryMask* mask);

    const Se3Pose& current_pose() const { return pose_wc_; }

  private:
    CameraIntrinsics intr_;
    TrackerConfig cfg_;
    bool has_prev_ = false;
    GrayImage prev_gray_;
    DepthImage prev_depth_;
    std::vector<Keypoint> prev_keypoints_;
    Se3Pose pose_wc_;
    Se3Pose velocity_;  // last relative motion, constant-velocity prediction
};

}  // namespace deva
