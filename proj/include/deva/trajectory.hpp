#pragma once

#include <string>
#include <vector>

#include "deva/geometry.hpp"

namespace deva {

// One camera-to-world pose sample.
struct TrajectorySample {
    double timestamp = 0;
    Se3Pose pose;
};

using Trajectory = std::vector<TrajectorySample>;

// TUM text format: "timestamp tx ty tz qx qy qz qw", '#' comments.
// Quaternions are normalized on load. Malformed lines are skipped and counted.
Trajectory read_tum_trajectory(const std::string& path, int* skipped = nullptr);
void write_tum_trajectory(const std::string& path, const Trajectory& traj);

// Greedy nearest-timestamp pairing within max_diff, each element used at most
// once, candidate pairs taken in order of increasing |dt|. Returned pairs are
// sorted by the first stream's timestamp.
std::vector<std::pair<int, int>> associate_timestamps(const std::vector<double>& a,
                                                      const std::vector<double>& b,
                                                      double max_diff);

}  // namespace deva
