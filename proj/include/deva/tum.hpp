#pragma once

#include <optional>
#include <string>
#include <vector>

#include "deva/image.hpp"
#include "deva/trajectory.hpp"

namespace deva {

struct FrameRecord {
    double timestamp = 0;  // seconds, from the rgb stream
    std::string rgb_path;
    std::string depth_path;
    double depth_timestamp = 0;
};

struct SequenceData {
    std::vector<FrameRecord> frames;          // sorted by timestamp, strictly increasing
    std::optional<Trajectory> groundtruth;    // present when groundtruth.txt exists
    int skipped_lines = 0;                    // malformed lines across all index files
};

// Loads a TUM-format directory: rgb.txt + depth.txt (+ optional
// groundtruth.txt). RGB and depth entries are associated greedily by nearest
// timestamp within max_diff. Missing index files or an empty association are
// fatal.
SequenceData load_sequence(const std::string& dir, double max_diff = 0.02);

// Reads "fx fy cx cy" from a text file ('#' comments allowed).
CameraIntrinsics read_intrinsics(const std::string& path);

}  // namespace deva
