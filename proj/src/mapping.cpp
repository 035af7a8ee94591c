#include "deva/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <tuple>

#include "deva/error.hpp"

namespace deva {
namespace {

template <bool Parallel>
ColoredPointCloud frame_to_cloud_impl(const RgbImage& rgb, const DepthImage& depth,
                                      const BinaryMask* mask, const CameraIntrinsics& intr,
                                      const Se3Pose& pose_wc, int stride, double max_range) {
    if (rgb.width != depth.width || rgb.height != depth.height)
        throw Error("frame_to_cloud: rgb and depth dimensions differ");
    if (mask && !mask->same_size(depth.width, depth.height))
        throw Error("frame_to_cloud: mask dimensions differ");
    if (stride < 1) throw Error("frame_to_cloud: stride must be >= 1");
    if (!(max_range > 0)) throw Error("frame_to_cloud: max_range must be > 0");

    const int cols = (rgb.width + stride - 1) / stride;
    const int rows = (rgb.height + stride - 1) / stride;
    std::vector<ColoredPoint> slots(size_t(cols) * rows);
    std::vector<uint8_t> valid(size_t(cols) * rows, 0);

#pragma omp parallel for collapse(2) schedule(static) if (Parallel)
    for (int ry = 0; ry < rows; ++ry)
        for (int rx = 0; rx < cols; ++rx) {
            const int x = rx * stride, y = ry * stride;
            const float z = depth.at(x, y);
            if (!(z > 0) || double(z) > max_range) continue;
            if (mask && mask->at(x, y) != 0) continue;
            const Eigen::Vector3d pw = pose_wc.apply(intr.backproject(x, y, double(z)));
            const uint8_t* c = rgb.px(x, y);
            ColoredPoint pt;
            pt.x = float(pw.x());
            pt.y = float(pw.y());
            pt.z = float(pw.z());
            pt.r = c[0];
            pt.g = c[1];
            pt.b = c[2];
            slots[size_t(ry) * cols + rx] = pt;
            valid[size_t(ry) * cols + rx] = 1;
        }

    ColoredPointCloud cloud;
    for (size_t i = 0; i < slots.size(); ++i)
        if (valid[i]) cloud.points.push_back(slots[i]);
    return cloud;
}

struct VoxelKey {
    int64_t x, y, z;
    bool operator<(const VoxelKey& o) const {
        return std::tie(x, y, z) < std::tie(o.x, o.y, o.z);
    }
    bool operator==(const VoxelKey& o) const { return x == o.x && y == o.y && z == o.z; }
};

int64_t floor_div_cell(float v, double voxel) {
    return int64_t(std::floor(double(v) / voxel));
}

}  // namespace

ColoredPointCloud frame_to_cloud(const RgbImage& rgb, const DepthImage& depth,
                                 const BinaryMask* mask, const CameraIntrinsics& intr,
                                 const Se3Pose& pose_wc, int stride, double max_range) {
    return frame_to_cloud_impl<true>(rgb, depth, mask, intr, pose_wc, stride, max_range);
}

namespace reference {
ColoredPointCloud frame_to_cloud(const RgbImage& rgb, const DepthImage& depth,
                                 const BinaryMask* mask, const CameraIntrinsics& intr,
                                 const Se3Pose& pose_wc, int stride, double max_range) {
    return frame_to_cloud_impl<false>(rgb, depth, mask, intr, pose_wc, stride, max_range);
}
}  // namespace reference

ColoredPointCloud stitch(const std::vector<ColoredPointCloud>& clouds, double voxel) {
    if (voxel < 0) throw Error("stitch: voxel must be >= 0");
    ColoredPointCloud merged;
    size_t total = 0;
    for (const auto& c : clouds) total += c.points.size();
    merged.points.reserve(total);
    for (const auto& c : clouds)
        merged.points.insert(merged.points.end(), c.points.begin(), c.points.end());
    if (voxel == 0 || merged.points.empty()) return merged;

    std::vector<std::pair<VoxelKey, int>> keyed(merged.points.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < int(merged.points.size()); ++i) {
        const ColoredPoint& p = merged.points[size_t(i)];
        keyed[size_t(i)] = {{floor_div_cell(p.x, voxel), floor_div_cell(p.y, voxel),
                             floor_div_cell(p.z, voxel)},
                            i};
    }
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    ColoredPointCloud out;
    size_t i = 0;
    while (i < keyed.size()) {
        size_t j = i;
        double sx = 0, sy = 0, sz = 0, sr = 0, sg = 0, sb = 0;
        while (j < keyed.size() && keyed[j].first == keyed[i].first) {
            const ColoredPoint& p = merged.points[size_t(keyed[j].second)];
            sx += p.x;
            sy += p.y;
            sz += p.z;
            sr += p.r;
            sg += p.g;
            sb += p.b;
            ++j;
        }
        const double n = double(j - i);
        ColoredPoint p;
        p.x = float(sx / n);
        p.y = float(sy / n);
        p.z = float(sz / n);
        p.r = uint8_t(std::lround(sr / n));
        p.g = uint8_t(std::lround(sg / n));
        p.b = uint8_t(std::lround(sb / n));
        out.points.push_back(p);
        i = j;
    }
    return out;
}

void export_ply(const ColoredPointCloud& cloud, const std::string& path, bool binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write ply: " + path);
    out << "ply\n"
        << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n")
        << "element vertex " << cloud.points.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        << "end_header\n";
    if (binary) {
        for (const auto& p : cloud.points) {
            char buf[15];
            std::memcpy(buf + 0, &p.x, 4);
            std::memcpy(buf + 4, &p.y, 4);
            std::memcpy(buf + 8, &p.z, 4);
            buf[12] = char(p.r);
            buf[13] = char(p.g);
            buf[14] = char(p.b);
            out.write(buf, 15);
        }
    } else {
        char line[160];
        for (const auto& p : cloud.points) {
            std::snprintf(line, sizeof(line), "%.9g %.9g %.9g %d %d %d\n", double(p.x),
                          double(p.y), double(p.z), int(p.r), int(p.g), int(p.b));
            out << line;
        }
    }
    if (!out) throw Error("write failed: " + path);
}

ColoredPointCloud import_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open ply: " + path);

    std::string line;
    if (!std::getline(in, line) || (line != "ply" && line != "ply\r"))
        throw Error("not a ply file: " + path);
    bool binary = false;
    size_t count = 0;
    std::vector<std::string> props;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream iss(line);
        std::string tok;
        iss >> tok;
        if (tok == "format") {
            std::string fmt;
            iss >> fmt;
            if (fmt == "binary_little_endian")
                binary = true;
            else if (fmt != "ascii")
                throw Error("unsupported ply format: " + fmt);
        } else if (tok == "element") {
            std::string name;
            iss >> name >> count;
            if (name != "vertex") throw Error("unsupported ply element: " + name);
        } else if (tok == "property") {
            std::string type, name;
            iss >> type >> name;
            props.push_back(type + " " + name);
        } else if (tok == "end_header") {
            break;
        } else if (tok != "comment" && tok != "ply") {
            throw Error("unexpected ply header line: " + line);
        }
    }
    const std::vector<std::string> expected = {"float x",   "float y",     "float z",
                                              "uchar red", "uchar green", "uchar blue"};
    if (props != expected) throw Error("unsupported ply property layout: " + path);

    ColoredPointCloud cloud;
    cloud.points.resize(count);
    if (binary) {
        for (auto& p : cloud.points) {
            char buf[15];
            in.read(buf, 15);
            if (!in) throw Error("truncated ply payload: " + path);
            std::memcpy(&p.x, buf + 0, 4);
            std::memcpy(&p.y, buf + 4, 4);
            std::memcpy(&p.z, buf + 8, 4);
            p.r = uint8_t(buf[12]);
            p.g = uint8_t(buf[13]);
            p.b = uint8_t(buf[14]);
        }
    } else {
        for (auto& p : cloud.points) {
            int r, g, b;
            if (!(in >> p.x >> p.y >> p.z >> r >> g >> b))
                throw Error("truncated ply payload: " + path);
            p.r = uint8_t(r);
            p.g = uint8_t(g);
            p.b = uint8_t(b);
        }
    }
    return cloud;
}

}  // namespace deva
