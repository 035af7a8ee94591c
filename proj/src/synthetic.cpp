#include "deva/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "deva/error.hpp"
#include "deva/image_io.hpp"
#include "deva/rng.hpp"

namespace deva {
namespace {

constexpr double kWallZ = 3.2;
constexpr double kFloorY = 0.9;
constexpr double kFloorFarZ = 2.6;
constexpr double kBoxYawDeg = 30.0;
const Eigen::Vector3d kBoxHalf(0.22, 0.40, 0.14);
const Eigen::Vector3d kBoxCenter0(0.45, 0.45, 1.45);

double lattice01(uint64_t seed, int64_t ix, int64_t iy) {
    uint64_t s = seed ^ (uint64_t(ix) * 0x9E3779B97F4A7C15ULL) ^
                 (uint64_t(iy) * 0xC2B2AE3D27D4EB4FULL);
    return double(Rng::splitmix64(s) >> 11) * 0x1.0p-53;
}

double value_noise(uint64_t seed, double x, double y) {
    const double fx = std::floor(x), fy = std::floor(y);
    const int64_t ix = int64_t(fx), iy = int64_t(fy);
    double tx = x - fx, ty = y - fy;
    tx = tx * tx * (3 - 2 * tx);
    ty = ty * ty * (3 - 2 * ty);
    const double v00 = lattice01(seed, ix, iy), v10 = lattice01(seed, ix + 1, iy);
    const double v01 = lattice01(seed, ix, iy + 1), v11 = lattice01(seed, ix + 1, iy + 1);
    return (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 + (1 - tx) * ty * v01 +
           tx * ty * v11;
}

double texture01(uint64_t seed, double x, double y) {
    return 0.55 * value_noise(seed, x, y) + 0.30 * value_noise(seed ^ 0xA5A5ULL, 2.6 * x + 11.3, 2.6 * y + 7.7) +
           0.15 * value_noise(seed ^ 0x3C3CULL, 6.1 * x + 3.1, 6.1 * y + 19.7);
}

void shade(uint64_t seed, double x, double y, uint8_t* rgb) {
    const double t1 = texture01(seed, x, y);
    const double t2 = texture01(seed ^ 0x5151ULL, x, y);
    const double t3 = texture01(seed ^ 0x9292ULL, x, y);
    auto to_byte = [](double v) { return uint8_t(std::clamp(30.0 + 200.0 * v, 0.0, 255.0)); };
    rgb[0] = to_byte(t1);
    rgb[1] = to_byte(0.7 * t1 + 0.3 * t2);
    rgb[2] = to_byte(0.6 * t1 + 0.4 * t3);
}

// Slab test; returns smallest positive ray parameter or +inf.
double intersect_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                     const Eigen::Matrix3d& rot, const Eigen::Vector3d& center,
                     const Eigen::Vector3d& half) {
    const Eigen::Vector3d ob = rot.transpose() * (o - center);
    const Eigen::Vector3d db = rot.transpose() * d;
    double tmin = -std::numeric_limits<double>::infinity();
    double tmax = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        if (std::abs(db[a]) < 1e-12) {
            if (std::abs(ob[a]) > half[a]) return std::numeric_limits<double>::infinity();
            continue;
        }
        double t0 = (-half[a] - ob[a]) / db[a];
        double t1 = (half[a] - ob[a]) / db[a];
        if (t0 > t1) std::swap(t0, t1);
        tmin = std::max(tmin, t0);
        tmax = std::min(tmax, t1);
        if (tmin > tmax) return std::numeric_limits<double>::infinity();
    }
    if (tmax < 0) return std::numeric_limits<double>::infinity();
    return tmin > 0 ? tmin : std::numeric_limits<double>::infinity();
}

}  // namespace

SyntheticScene::SyntheticScene(SyntheticOptions opts) : opts_(opts) {
    if (opts_.width < 32 || opts_.height < 32)
        throw Error("synthetic scene: image must be at least 32x32");
    if (opts_.frames < 1) throw Error("synthetic scene: need at least 1 frame");
    if (!(opts_.fps > 0)) throw Error("synthetic scene: fps must be > 0");
    intr_ = CameraIntrinsics(250.0, 250.0, (opts_.width - 1) * 0.5, (opts_.height - 1) * 0.5);
    const double yaw = kBoxYawDeg * M_PI / 180.0;
    box_rot_ = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()).toRotationMatrix();
    box_half_ = kBoxHalf;
    box_center0_ = kBoxCenter0;
}

double SyntheticScene::timestamp(int index) const { return index / opts_.fps; }

Se3Pose SyntheticScene::camera_pose(int index) const {
    Se3Pose pose;
    pose.t = Eigen::Vector3d(opts_.camera_step * index,
                             0.01 * std::sin(2 * M_PI * index / 20.0), 0.002 * index);
    return pose;
}

Eigen::Vector3d SyntheticScene::box_center(int index) const {
    return box_center0_ + Eigen::Vector3d(opts_.box_step * index, 0, 0);
}

SyntheticFrame SyntheticScene::render(int index) const {
    if (index < 0 || index >= opts_.frames) throw Error("synthetic scene: frame out of range");
    const int w = opts_.width, h = opts_.height;
    SyntheticFrame frame;
    frame.timestamp = timestamp(index);
    frame.pose_wc = camera_pose(index);
    frame.rgb = RgbImage(w, h);
    frame.depth = DepthImage(w, h);
    frame.box_mask = BinaryMask(w, h);

    const Eigen::Vector3d origin = frame.pose_wc.t;
    const Eigen::Matrix3d rot = frame.pose_wc.q.toRotationMatrix();
    const Eigen::Vector3d bc = box_center(index);
    const uint64_t seed = opts_.seed;
    constexpr double kInf = std::numeric_limits<double>::infinity();

#pragma omp parallel for schedule(static)
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
            const Eigen::Vector3d dir_cam((u - intr_.cx) / intr_.fx, (v - intr_.cy) / intr_.fy,
                                          1.0);
            const Eigen::Vector3d d = rot * dir_cam;

            double t_wall = kInf, t_floor = kInf, t_box = kInf;
            if (d.z() > 1e-12) {
                const double t = (kWallZ - origin.z()) / d.z();
                if (t > 0) t_wall = t;
            }
            if (d.y() > 1e-12) {
                const double t = (kFloorY - origin.y()) / d.y();
                // The floor stops short of the wall so their junction keeps a
                // fixed depth step instead of blending smoothly.
                if (t > 0 && origin.z() + t * d.z() <= kFloorFarZ) t_floor = t;
            }
            if (opts_.with_box) t_box = intersect_box(origin, d, box_rot_, bc, box_half_);

            const double t = std::min({t_wall, t_floor, t_box});
            uint8_t* px = frame.rgb.px(u, v);
            if (t == kInf) {
                px[0] = 20;
                px[1] = 24;
                px[2] = 32;
                continue;  // depth stays 0 (no return)
            }
            frame.depth.at(u, v) = float(t);  // ray parameter equals camera z-depth
            const Eigen::Vector3d p = origin + t * d;
            if (t == t_box) {
                frame.box_mask.at(u, v) = 1;
                const Eigen::Vector3d pb = box_rot_.transpose() * (p - bc);
                shade(seed ^ 0xB0B0ULL, 30.0 * (pb.x() + pb.z()),
                      30.0 * (pb.y() + 0.37 * pb.x()), px);
            } else if (t == t_floor) {
                shade(seed ^ 0xF100ULL, 18.0 * p.x(), 18.0 * p.z(), px);
            } else {
                shade(seed ^ 0x3A11ULL, 14.0 * p.x(), 14.0 * p.y(), px);
            }
        }
    return frame;
}

Trajectory SyntheticScene::groundtruth() const {
    Trajectory traj;
    traj.reserve(size_t(opts_.frames));
    for (int i = 0; i < opts_.frames; ++i) traj.push_back({timestamp(i), camera_pose(i)});
    return traj;
}

bool SyntheticScene::in_swept_volume(const Eigen::Vector3d& world, double margin) const {
    if (!opts_.with_box) return false;
    for (int i = 0; i < opts_.frames; ++i) {
        const Eigen::Vector3d pb = box_rot_.transpose() * (world - box_center(i));
        if (std::abs(pb.x()) <= box_half_.x() + margin &&
            std::abs(pb.y()) <= box_half_.y() + margin &&
            std::abs(pb.z()) <= box_half_.z() + margin)
            return true;
    }
    return false;
}

void write_tum_sequence(const SyntheticScene& scene, const std::string& dir,
                        double depth_scale) {
    namespace fs = std::filesystem;
    if (!(depth_scale > 0)) throw Error("write_tum_sequence: depth_scale must be > 0");
    fs::create_directories(fs::path(dir) / "rgb");
    fs::create_directories(fs::path(dir) / "depth");
    fs::create_directories(fs::path(dir) / "masks_gt");

    std::ofstream rgb_index((fs::path(dir) / "rgb.txt").string());
    std::ofstream depth_index((fs::path(dir) / "depth.txt").string());
    if (!rgb_index || !depth_index) throw Error("cannot write sequence index files: " + dir);
    rgb_index << "# color images\n# timestamp filename\n";
    depth_index << "# depth images\n# timestamp filename\n";

    char ts[64];
    for (int i = 0; i < scene.frame_count(); ++i) {
        SyntheticFrame frame = scene.render(i);
        std::snprintf(ts, sizeof(ts), "%.6f", frame.timestamp);

        write_rgb((fs::path(dir) / "rgb" / (std::string(ts) + ".png")).string(), frame.rgb);
        Raw16Image raw(frame.depth.width, frame.depth.height);
        for (size_t k = 0; k < raw.data.size(); ++k) {
            const double scaled = std::lround(double(frame.depth.data[k]) * depth_scale);
            raw.data[k] = uint16_t(std::clamp(scaled, 0.0, 65535.0));
        }
        write_raw16((fs::path(dir) / "depth" / (std::string(ts) + ".png")).string(), raw);
        write_mask((fs::path(dir) / "masks_gt" / (std::string(ts) + ".png")).string(),
                   frame.box_mask);

        rgb_index << ts << " rgb/" << ts << ".png\n";
        depth_index << ts << " depth/" << ts << ".png\n";
    }

    write_tum_trajectory((fs::path(dir) / "groundtruth.txt").string(), scene.groundtruth());
    std::ofstream intr((fs::path(dir) / "intrinsics.txt").string());
    if (!intr) throw Error("cannot write intrinsics file: " + dir);
    char line[128];
    const CameraIntrinsics k = scene.intrinsics();
    std::snprintf(line, sizeof(line), "%.6f %.6f %.6f %.6f\n", k.fx, k.fy, k.cx, k.cy);
    intr << line;
}

}  // namespace deva
