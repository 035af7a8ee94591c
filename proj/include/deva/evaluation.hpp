#pragma once

#include <vector>

#include <Eigen/Core>

#include "deva/geometry.hpp"
#include "deva/trajectory.hpp"

namespace deva {

struct PosePair {
    double t_est = 0, t_gt = 0;
    Se3Pose est, gt;
};

// Greedy nearest-timestamp pairing within max_diff, each pose used at most
// once, sorted by estimated timestamp. Zero pairs is an error.
std::vector<PosePair> associate_trajectories(const Trajectory& est, const Trajectory& gt,
                                             double max_diff = 0.02);

// Closed-form least-squares rigid alignment (scale fixed to 1) mapping est
// positions onto gt: returns T with T(est) ~ gt. Collinear or coincident
// input raises Error("degenerate geometry").
Se3Pose umeyama_se3(const std::vector<Eigen::Vector3d>& est,
                    const std::vector<Eigen::Vector3d>& gt);

// RMSE of position differences after Umeyama alignment, in meters.
double ate_rmse(const Trajectory& est, const Trajectory& gt, double max_diff = 0.02);

struct RpeResult {
    double trans_rmse = 0;    // m/s
    double rot_rmse_deg = 0;  // degrees/s
    int pairs = 0;
};

// Relative-pose error over time intervals of length delta: for each pair i
// with an associated pair at t_i + delta (nearest within max_diff),
// E = (Qi^-1 Qj)^-1 (Pi^-1 Pj); RMSE of ||trans(E)||/delta and of
// angle(E)/delta in degrees. No valid intervals is an error.
RpeResult rpe(const Trajectory& est, const Trajectory& gt, double delta = 1.0,
              double max_diff = 0.02);

struct MetricReport {
    double ate_rmse = 0;       // m
    double rpe_trans_rmse = 0;  // m/s
    double rpe_rot_rmse = 0;    // deg/s
    int pairs_used = 0;
};

MetricReport evaluate_trajectories(const Trajectory& est, const Trajectory& gt,
                                   double rpe_delta = 1.0, double max_diff = 0.02);

// Per-associated-pair position errors after alignment, for CSV export.
std::vector<double> per_pair_ate_errors(const Trajectory& est, const Trajectory& gt,
                                        double max_diff = 0.02);

}  // namespace deva
