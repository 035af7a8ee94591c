#include "deva/tum.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "deva/error.hpp"

namespace fs = std::filesystem;

namespace deva {
namespace {

struct TimedFile {
    double timestamp;
    std::string path;
};

// "timestamp filename" per line, '#' comments. Malformed lines are counted.
std::vector<TimedFile> read_index(const std::string& file, const std::string& base_dir,
                                  int* skipped) {
    std::ifstream in(file);
    if (!in) throw Error("missing index file: " + file);
    std::vector<TimedFile> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream iss(line);
        double ts;
        std::string name;
        if (!(iss >> ts >> name) || !(ts >= 0) || !std::isfinite(ts)) {
            ++*skipped;
            continue;
        }
        out.push_back({ts, (fs::path(base_dir) / name).string()});
    }
    std::sort(out.begin(), out.end(),
              [](const TimedFile& a, const TimedFile& b) { return a.timestamp < b.timestamp; });
    return out;
}

}  // namespace

SequenceData load_sequence(const std::string& dir, double max_diff) {
    SequenceData seq;
    auto rgb = read_index((fs::path(dir) / "rgb.txt").string(), dir, &seq.skipped_lines);
    auto depth = read_index((fs::path(dir) / "depth.txt").string(), dir, &seq.skipped_lines);

    std::vector<double> rgb_ts(rgb.size()), depth_ts(depth.size());
    for (size_t i = 0; i < rgb.size(); ++i) rgb_ts[i] = rgb[i].timestamp;
    for (size_t i = 0; i < depth.size(); ++i) depth_ts[i] = depth[i].timestamp;

    auto pairs = associate_timestamps(rgb_ts, depth_ts, max_diff);
    if (pairs.empty()) throw Error("no rgb/depth associations within " +
                                   std::to_string(max_diff) + " s in " + dir);

    double last_ts = -1;
    for (const auto& [i, j] : pairs) {
        if (rgb[i].timestamp <= last_ts) continue;  // enforce strictly increasing
        last_ts = rgb[i].timestamp;
        FrameRecord rec;
        rec.timestamp = rgb[i].timestamp;
        rec.rgb_path = rgb[i].path;
        rec.depth_path = depth[j].path;
        rec.depth_timestamp = depth[j].timestamp;
        seq.frames.push_back(rec);
    }

    auto gt_path = fs::path(dir) / "groundtruth.txt";
    if (fs::exists(gt_path)) {
        int bad = 0;
        seq.groundtruth = read_tum_trajectory(gt_path.string(), &bad);
        seq.skipped_lines += bad;
    }
    return seq;
}

CameraIntrinsics read_intrinsics(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open intrinsics file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream iss(line);
        double fx, fy, cx, cy;
        if (iss >> fx >> fy >> cx >> cy) return CameraIntrinsics(fx, fy, cx, cy);
    }
    throw Error("no 'fx fy cx cy' line in " + path);
}

}  // namespace deva
