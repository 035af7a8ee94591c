#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "deva/error.hpp"
#include "deva/mapping.hpp"
#include "deva/rng.hpp"
#include "oracles.hpp"

using namespace deva;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    RgbImage rgb{8, 6};
    DepthImage depth{8, 6};
    CameraIntrinsics intr{100.0, 100.0, 3.5, 2.5};

    Fixture() {
        Rng rng(99);
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 8; ++x) {
                uint8_t* px = rgb.px(x, y);
                px[0] = uint8_t(rng.next_u64() % 256);
                px[1] = uint8_t(rng.next_u64() % 256);
                px[2] = uint8_t(rng.next_u64() % 256);
                depth.at(x, y) = float(rng.uniform(0.5, 3.0));
            }
    }
};

fs::path temp_dir() {
    fs::path dir = fs::temp_directory_path() / "deva_tests";
    fs::create_directories(dir);
    return dir;
}

ColoredPointCloud random_cloud(size_t n, uint64_t seed) {
    Rng rng(seed);
    ColoredPointCloud cloud;
    cloud.points.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        ColoredPoint p;
        p.x = float(rng.uniform(-10.0, 10.0));
        p.y = float(rng.uniform(-10.0, 10.0));
        p.z = float(rng.uniform(-10.0, 10.0));
        p.r = uint8_t(rng.next_u64() % 256);
        p.g = uint8_t(rng.next_u64() % 256);
        p.b = uint8_t(rng.next_u64() % 256);
        cloud.points.push_back(p);
    }
    return cloud;
}

bool identical(const ColoredPointCloud& a, const ColoredPointCloud& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        const auto &p = a.points[i], &q = b.points[i];
        if (p.x != q.x || p.y != q.y || p.z != q.z) return false;
        if (p.r != q.r || p.g != q.g || p.b != q.b) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("an all-dynamic mask yields an empty cloud") {
    Fixture f;
    BinaryMask mask(8, 6);
    for (auto& v : mask.bits) v = 1;
    CHECK(frame_to_cloud(f.rgb, f.depth, &mask, f.intr, Se3Pose::identity(), 1).empty());
}

TEST_CASE("the principal point back-projects onto the optical axis") {
    RgbImage rgb{8, 6};
    DepthImage depth{8, 6};
    uint8_t* px = rgb.px(3, 2);
    px[0] = 10;
    px[1] = 20;
    px[2] = 30;
    depth.at(3, 2) = 1.0f;
    CameraIntrinsics intr(100.0, 100.0, 3.0, 2.0);
    ColoredPointCloud cloud = frame_to_cloud(rgb, depth, nullptr, intr, Se3Pose::identity(), 1);
    REQUIRE(cloud.size() == 1);
    CHECK(cloud.points[0].x == doctest::Approx(0.0));
    CHECK(cloud.points[0].y == doctest::Approx(0.0));
    CHECK(cloud.points[0].z == doctest::Approx(1.0));
    CHECK(cloud.points[0].r == 10);
    CHECK(cloud.points[0].g == 20);
    CHECK(cloud.points[0].b == 30);
}

TEST_CASE("stride, range, and zero-depth filters prune pixels") {
    Fixture f;
    f.depth.at(0, 0) = 0.0f;    // invalid
    f.depth.at(2, 0) = 10.0f;   // beyond range
    ColoredPointCloud full = frame_to_cloud(f.rgb, f.depth, nullptr, f.intr,
                                            Se3Pose::identity(), 1, 5.0);
    CHECK(full.size() == 8 * 6 - 2);

    ColoredPointCloud s2 = frame_to_cloud(f.rgb, f.depth, nullptr, f.intr,
                                          Se3Pose::identity(), 2, 5.0);
    // Stride 2 visits x,y in {0,2,4,...}; (0,0) is invalid, (2,0) out of range.
    CHECK(s2.size() == 4 * 3 - 2);

    ColoredPointCloud near = frame_to_cloud(f.rgb, f.depth, nullptr, f.intr,
                                            Se3Pose::identity(), 1, 1.0);
    for (const auto& p : near.points) CHECK(p.z <= 1.0f + 1e-6f);

    CHECK_THROWS_AS(frame_to_cloud(f.rgb, f.depth, nullptr, f.intr, Se3Pose::identity(), 0),
                    Error);
}

TEST_CASE("the camera pose moves the cloud into world coordinates") {
    Fixture f;
    Rng rng(5);
    const Se3Pose pose = oracle::random_pose(rng, 2.0);
    ColoredPointCloud cam = frame_to_cloud(f.rgb, f.depth, nullptr, f.intr,
                                           Se3Pose::identity(), 1);
    ColoredPointCloud world = frame_to_cloud(f.rgb, f.depth, nullptr, f.intr, pose, 1);
    REQUIRE(cam.size() == world.size());
    for (size_t i = 0; i < cam.size(); ++i) {
        const Eigen::Vector3d p(cam.points[i].x, cam.points[i].y, cam.points[i].z);
        const Eigen::Vector3d w(world.points[i].x, world.points[i].y, world.points[i].z);
        CHECK((pose.apply(p) - w).norm() < 1e-5);
    }
}

TEST_CASE("parallel and serial back-projection agree bitwise") {
    Fixture f;
    BinaryMask mask(8, 6);
    mask.at(4, 3) = 1;
    Rng rng(6);
    const Se3Pose pose = oracle::random_pose(rng, 1.0);
    for (int stride : {1, 2, 3}) {
        ColoredPointCloud a = frame_to_cloud(f.rgb, f.depth, &mask, f.intr, pose, stride);
        ColoredPointCloud b =
            reference::frame_to_cloud(f.rgb, f.depth, &mask, f.intr, pose, stride);
        CHECK(identical(a, b));
    }
}

TEST_CASE("stitching without a voxel grid concatenates") {
    ColoredPointCloud a = random_cloud(10, 1), b = random_cloud(7, 2);
    ColoredPointCloud merged = stitch({a, b}, 0.0);
    REQUIRE(merged.size() == 17);
    CHECK(identical(stitch({merged}, 0.0), merged));
    CHECK(stitch({}, 0.0).empty());
}

TEST_CASE("voxel downsampling keeps one centroid per occupied cell") {
    ColoredPointCloud cloud;
    // Two tight clumps a meter apart plus a loner.
    for (int i = 0; i < 4; ++i) {
        cloud.points.push_back({0.10f + 0.01f * float(i), 0.10f, 0.10f, 100, 0, 0});
        cloud.points.push_back({1.10f, 1.10f + 0.01f * float(i), 0.10f, 0, 100, 0});
    }
    cloud.points.push_back({-2.0f, 0.5f, 3.0f, 0, 0, 100});

    const double voxel = 0.5;
    ColoredPointCloud down = stitch({cloud}, voxel);
    REQUIRE(down.size() == 3);

    // Each output point sits within half a voxel diagonal of a clump mean.
    const double bound = voxel * std::sqrt(3.0) / 2.0;
    const Eigen::Vector3d means[] = {{0.115, 0.10, 0.10}, {1.10, 1.115, 0.10}, {-2.0, 0.5, 3.0}};
    for (const auto& m : means) {
        double best = 1e9;
        for (const auto& p : down.points)
            best = std::min(best, (Eigen::Vector3d(p.x, p.y, p.z) - m).norm());
        CHECK(best < bound);
    }

    // Idempotent: every surviving point already occupies its own voxel.
    CHECK(identical(stitch({down}, voxel), down));

    CHECK_THROWS_AS(stitch({cloud}, -0.1), Error);
}

TEST_CASE("voxel centroids average position and color") {
    ColoredPointCloud cloud;
    cloud.points.push_back({0.10f, 0.10f, 0.10f, 10, 20, 30});
    cloud.points.push_back({0.20f, 0.10f, 0.10f, 30, 40, 50});
    ColoredPointCloud down = stitch({cloud}, 1.0);
    REQUIRE(down.size() == 1);
    CHECK(down.points[0].x == doctest::Approx(0.15).epsilon(1e-6));
    CHECK(down.points[0].r == 20);
    CHECK(down.points[0].g == 30);
    CHECK(down.points[0].b == 40);
}

TEST_CASE("binary PLY round-trips bit-exactly") {
    const fs::path path = temp_dir() / "roundtrip.ply";
    for (size_t n : {size_t(0), size_t(1), size_t(100000)}) {
        ColoredPointCloud cloud = random_cloud(n, 40 + n);
        export_ply(cloud, path.string(), true);
        ColoredPointCloud back = import_ply(path.string());
        CHECK(identical(cloud, back));
    }
}

TEST_CASE("ascii PLY round-trips through the declared precision") {
    const fs::path path = temp_dir() / "ascii.ply";
    ColoredPointCloud cloud = random_cloud(500, 77);
    export_ply(cloud, path.string(), false);
    ColoredPointCloud back = import_ply(path.string());
    REQUIRE(back.size() == cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) {
        CHECK(back.points[i].x == doctest::Approx(cloud.points[i].x).epsilon(1e-6));
        CHECK(back.points[i].r == cloud.points[i].r);
    }
}

TEST_CASE("malformed PLY input is rejected") {
    const fs::path dir = temp_dir();
    CHECK_THROWS_AS(import_ply((dir / "missing.ply").string()), Error);

    const fs::path bad = dir / "bad.ply";
    std::ofstream(bad) << "not a ply header\n";
    CHECK_THROWS_AS(import_ply(bad.string()), Error);

    const fs::path truncated = dir / "trunc.ply";
    {
        ColoredPointCloud cloud = random_cloud(50, 3);
        export_ply(cloud, truncated.string(), true);
        fs::resize_file(truncated, fs::file_size(truncated) - 20);
    }
    CHECK_THROWS_AS(import_ply(truncated.string()), Error);
}
