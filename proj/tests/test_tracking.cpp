#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "deva/error.hpp"
#include "deva/rng.hpp"
#include "deva/synthetic.hpp"
#include "deva/tracking.hpp"
#include "oracles.hpp"

using namespace deva;

namespace {

// Smooth random field: white noise box-blurred a few times. Plenty of texture
// for flow and corners without aliasing.
GrayImage textured_image(int w, int h, uint64_t seed) {
    Rng rng(seed);
    GrayImage img(w, h);
    for (auto& v : img.data) v = float(rng.uniform(0.0, 255.0));
    for (int pass = 0; pass < 3; ++pass) {
        GrayImage out(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                float acc = 0;
                int cnt = 0;
                for (int dy = -2; dy <= 2; ++dy)
                    for (int dx = -2; dx <= 2; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                        acc += img.at(nx, ny);
                        ++cnt;
                    }
                out.at(x, y) = acc / float(cnt);
            }
        img = out;
    }
    return img;
}

// Bilinear sample with clamped coordinates, mirroring the tracker's access.
float sample(const GrayImage& img, double x, double y) {
    x = std::clamp(x, 0.0, double(img.width - 1));
    y = std::clamp(y, 0.0, double(img.height - 1));
    const int x0 = std::min(int(x), img.width - 2);
    const int y0 = std::min(int(y), img.height - 2);
    const double ax = x - x0, ay = y - y0;
    return float((1 - ax) * (1 - ay) * img.at(x0, y0) + ax * (1 - ay) * img.at(x0 + 1, y0) +
                 (1 - ax) * ay * img.at(x0, y0 + 1) + ax * ay * img.at(x0 + 1, y0 + 1));
}

GrayImage shifted(const GrayImage& src, double dx, double dy) {
    GrayImage out(src.width, src.height);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) out.at(x, y) = sample(src, x - dx, y - dy);
    return out;
}

std::vector<Correspondence> synthetic_correspondences(const CameraIntrinsics& intr,
                                                      const Se3Pose& pose, int n,
                                                      uint64_t seed) {
    Rng rng(seed);
    std::vector<Correspondence> corrs;
    corrs.reserve(size_t(n));
    while (int(corrs.size()) < n) {
        Correspondence c;
        c.P = Eigen::Vector3d(rng.uniform(-1.0, 1.0), rng.uniform(-0.8, 0.8),
                              rng.uniform(2.0, 5.0));
        const Eigen::Vector3d q = pose.apply(c.P);
        if (q.z() < 0.5) continue;
        c.p = intr.project(q);
        corrs.push_back(c);
    }
    return corrs;
}

Se3Pose small_motion() {
    Se3Pose pose;
    pose.q = Eigen::Quaterniond(Eigen::AngleAxisd(0.06, Eigen::Vector3d(0.2, 1.0, -0.3).normalized()));
    pose.t = Eigen::Vector3d(0.08, -0.05, 0.12);
    return pose;
}

}  // namespace

TEST_CASE("box downsampling halves dimensions and averages quads") {
    GrayImage img(4, 2);
    float vals[] = {10, 20, 30, 40, 50, 60, 70, 80};
    std::copy(vals, vals + 8, img.data.begin());
    GrayImage half = downsample_half(img);
    REQUIRE(half.width == 2);
    REQUIRE(half.height == 1);
    CHECK(half.at(0, 0) == doctest::Approx((10 + 20 + 50 + 60) / 4.0));
    CHECK(half.at(1, 0) == doctest::Approx((30 + 40 + 70 + 80) / 4.0));

    GrayImage odd(5, 3);
    GrayImage h2 = downsample_half(odd);
    CHECK(h2.width == 2);
    CHECK(h2.height == 1);
}

TEST_CASE("a constant image has no corners") {
    GrayImage img(64, 64);
    for (auto& v : img.data) v = 128.0f;
    CHECK(detect_keypoints(img, 100).empty());
}

TEST_CASE("a bright square yields its four corners first") {
    GrayImage img(48, 48);
    for (int y = 14; y <= 31; ++y)
        for (int x = 14; x <= 31; ++x) img.at(x, y) = 255.0f;
    auto kps = detect_keypoints(img, 200);
    REQUIRE(kps.size() >= 4);

    const double cx[] = {14, 31, 14, 31};
    const double cy[] = {14, 14, 31, 31};
    std::vector<char> found(4, 0);
    for (const auto& kp : kps) {
        bool near_corner = false;
        for (int c = 0; c < 4; ++c) {
            if (std::hypot(kp.x - cx[c], kp.y - cy[c]) <= 2.0) {
                found[size_t(c)] = 1;
                near_corner = true;
            }
        }
        CHECK(near_corner);  // nothing fires along the flat edges or interior
    }
    CHECK(found == std::vector<char>(4, 1));
}

TEST_CASE("keypoints come back sorted by response and capped at max_count") {
    GrayImage img = textured_image(96, 96, 5);
    auto all = detect_keypoints(img, 10000);
    REQUIRE(all.size() > 20);
    for (size_t i = 1; i < all.size(); ++i) CHECK(all[i - 1].sigma >= all[i].sigma);

    auto capped = detect_keypoints(img, 10);
    REQUIRE(capped.size() == 10);
    for (size_t i = 0; i < capped.size(); ++i) {
        CHECK(capped[i].x == all[i].x);
        CHECK(capped[i].y == all[i].y);
    }
}

TEST_CASE("keypoint fields are populated and in range") {
    GrayImage img = textured_image(80, 60, 9);
    auto kps = detect_keypoints(img, 500);
    REQUIRE(!kps.empty());
    bool saw_level1 = false;
    for (const auto& k : kps) {
        CHECK(k.x >= 0);
        CHECK(k.x <= 79);
        CHECK(k.y >= 0);
        CHECK(k.y <= 59);
        CHECK(k.d > 0);
        CHECK(k.sigma > 0);
        CHECK((k.theta == -1.0 || (k.theta >= 0.0 && k.theta < 360.0)));
        CHECK((k.lambda == 0 || k.lambda == 1));
        saw_level1 |= k.lambda == 1;
    }
    CHECK(saw_level1);
}

TEST_CASE("detection is deterministic") {
    GrayImage img = textured_image(64, 64, 33);
    auto a = detect_keypoints(img, 300);
    auto b = detect_keypoints(img, 300);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].x == b[i].x);
        CHECK(a[i].y == b[i].y);
        CHECK(a[i].sigma == b[i].sigma);
    }
}

TEST_CASE("flow on identical images stays put") {
    GrayImage img = textured_image(128, 128, 17);
    std::vector<Eigen::Vector2d> pts;
    Rng rng(3);
    for (int i = 0; i < 40; ++i)
        pts.emplace_back(rng.uniform(30.0, 98.0), rng.uniform(30.0, 98.0));
    auto matches = track_flow(img, img, pts);
    REQUIRE(matches.size() == pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
        REQUIRE(matches[i].status == 1);
        CHECK((matches[i].pt - pts[i]).norm() < 0.05);
    }
}

TEST_CASE("flow recovers a synthetic two-pixel shift") {
    GrayImage img = textured_image(128, 128, 88);
    GrayImage moved = shifted(img, 2.0, 0.0);
    std::vector<Eigen::Vector2d> pts;
    Rng rng(4);
    for (int i = 0; i < 30; ++i)
        pts.emplace_back(rng.uniform(40.0, 88.0), rng.uniform(40.0, 88.0));
    auto matches = track_flow(img, moved, pts);
    int good = 0;
    for (size_t i = 0; i < pts.size(); ++i) {
        if (!matches[i].status) continue;
        ++good;
        CHECK(std::abs(matches[i].pt.x() - (pts[i].x() + 2.0)) < 0.1);
        CHECK(std::abs(matches[i].pt.y() - pts[i].y()) < 0.1);
    }
    CHECK(good >= 25);
}

TEST_CASE("flow flags points that leave the image") {
    GrayImage img = textured_image(96, 96, 55);
    GrayImage moved = shifted(img, 40.0, 0.0);
    // A point near the right edge lands far outside after the shift.
    std::vector<Eigen::Vector2d> pts = {{90.0, 48.0}, {-5.0, 10.0}};
    auto matches = track_flow(img, moved, pts);
    CHECK(matches[0].status == 0);
    CHECK(matches[1].status == 0);
}

TEST_CASE("parallel and serial flow agree bitwise") {
    GrayImage img = textured_image(128, 96, 61);
    GrayImage moved = shifted(img, 1.3, -0.8);
    std::vector<Eigen::Vector2d> pts;
    Rng rng(5);
    for (int i = 0; i < 50; ++i)
        pts.emplace_back(rng.uniform(25.0, 100.0), rng.uniform(25.0, 70.0));
    auto a = track_flow(img, moved, pts);
    auto b = reference::track_flow(img, moved, pts);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].status == b[i].status);
        CHECK(a[i].pt == b[i].pt);
    }
}

TEST_CASE("pinhole projection and back-projection are inverse maps") {
    CameraIntrinsics intr(525.0, 525.0, 319.5, 239.5);
    CHECK((intr.backproject(319.5, 239.5, 1.0) - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);
    Eigen::Vector3d p(0.3, -0.2, 2.5);
    Eigen::Vector2d uv = intr.project(p);
    CHECK((intr.backproject(uv.x(), uv.y(), p.z()) - p).norm() < 1e-12);
}

TEST_CASE("reprojection residual vanishes on perfect correspondences") {
    CameraIntrinsics intr(500, 500, 320, 240);
    const Se3Pose pose = small_motion();
    auto corrs = synthetic_correspondences(intr, pose, 10, 1);
    for (const auto& c : corrs)
        CHECK(reprojection_residual(intr, pose, c.P, c.p).norm() < 1e-10);
}

TEST_CASE("reprojection jacobian matches finite differences") {
    CameraIntrinsics intr(500, 480, 320, 240);
    const Se3Pose pose = small_motion();
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Vector3d P(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                                rng.uniform(1.5, 5.0));
        const Eigen::Vector2d p = intr.project(pose.apply(P)) + Eigen::Vector2d(1.0, -2.0);
        const Eigen::Matrix<double, 2, 6> J = reprojection_jacobian(intr, pose, P);

        const double h = 1e-7;
        for (int k = 0; k < 6; ++k) {
            auto perturbed = [&](double step) {
                Se3Pose q = pose;
                Eigen::Vector3d delta = Eigen::Vector3d::Zero();
                if (k < 3) {
                    delta[k] = step;
                    q.t += delta;
                } else {
                    delta[k - 3] = step;
                    q.q = (quat_exp(delta) * q.q).normalized();
                }
                return reprojection_residual(intr, q, P, p);
            };
            const Eigen::Vector2d fd = (perturbed(h) - perturbed(-h)) / (2 * h);
            CHECK((J.col(k) - fd).norm() < 1e-4 * std::max(1.0, fd.norm()));
        }
    }
}

TEST_CASE("pose refinement is a fixed point at the true pose") {
    CameraIntrinsics intr(500, 500, 320, 240);
    const Se3Pose truth = small_motion();
    auto corrs = synthetic_correspondences(intr, truth, 60, 2);
    PoseEstimate est = estimate_pose(corrs, intr, truth);
    double rot = 0;
    const double trans = oracle::pose_distance(truth, est.pose, &rot);
    CHECK(trans < 1e-10);
    CHECK(rot < 1e-10);
    CHECK(est.inliers == 60);
    CHECK(est.converged);
}

TEST_CASE("pose refinement recovers a known motion from scratch") {
    CameraIntrinsics intr(500, 500, 320, 240);
    const Se3Pose truth = small_motion();
    auto corrs = synthetic_correspondences(intr, truth, 120, 3);
    PoseEstimate est = estimate_pose(corrs, intr, Se3Pose::identity());
    double rot = 0;
    const double trans = oracle::pose_distance(truth, est.pose, &rot);
    CHECK(trans < 1e-6);
    CHECK(rot < 1e-6);
    CHECK(std::abs(est.pose.q.norm() - 1.0) < 1e-12);
}

TEST_CASE("deselected outliers do not perturb the solution") {
    CameraIntrinsics intr(500, 500, 320, 240);
    const Se3Pose truth = small_motion();
    auto corrs = synthetic_correspondences(intr, truth, 100, 4);
    Rng rng(777);
    for (int i = 0; i < 30; ++i) {
        corrs[size_t(i)].p += Eigen::Vector2d(rng.uniform(40.0, 160.0), rng.uniform(-160.0, -40.0));
        corrs[size_t(i)].m = 0;
    }
    PoseEstimate est = estimate_pose(corrs, intr, Se3Pose::identity());
    double rot = 0;
    const double trans = oracle::pose_distance(truth, est.pose, &rot);
    CHECK(trans < 1e-5);
    CHECK(rot < 1e-5);

    SUBCASE("the same outliers left selected degrade the estimate tenfold") {
        for (int i = 0; i < 30; ++i) corrs[size_t(i)].m = 1;
        PoseEstimate bad = estimate_pose(corrs, intr, Se3Pose::identity());
        double rot_bad = 0;
        const double trans_bad = oracle::pose_distance(truth, bad.pose, &rot_bad);
        CHECK(trans_bad >= 10.0 * std::max(trans, 1e-12));
        CHECK(rot_bad >= 10.0 * std::max(rot, 1e-12));
    }
}

TEST_CASE("fewer than four selected correspondences is degenerate") {
    CameraIntrinsics intr(500, 500, 320, 240);
    auto corrs = synthetic_correspondences(intr, small_motion(), 10, 5);
    for (size_t i = 3; i < corrs.size(); ++i) corrs[i].m = 0;
    CHECK_THROWS_WITH_AS(estimate_pose(corrs, intr, Se3Pose::identity()),
                         doctest::Contains("degenerate"), Error);
    CHECK_THROWS_AS(estimate_pose({}, intr, Se3Pose::identity()), Error);
}

TEST_CASE("accepted cost history never increases") {
    CameraIntrinsics intr(500, 500, 320, 240);
    const Se3Pose truth = small_motion();
    auto corrs = synthetic_correspondences(intr, truth, 80, 6);
    Rng rng(11);
    for (int i = 0; i < 20; ++i)
        corrs[size_t(i)].p += Eigen::Vector2d(rng.uniform(-80.0, 80.0), rng.uniform(-80.0, 80.0));
    PoseEstimate est = estimate_pose(corrs, intr, Se3Pose::identity());
    REQUIRE(est.cost_history.size() >= 2);
    for (size_t i = 1; i < est.cost_history.size(); ++i)
        CHECK(est.cost_history[i] <= est.cost_history[i - 1] + 1e-12);
}

TEST_CASE("pose estimate is invariant to correspondence order") {
    CameraIntrinsics intr(500, 500, 320, 240);
    const Se3Pose truth = small_motion();
    auto corrs = synthetic_correspondences(intr, truth, 70, 7);
    Rng rng(13);
    for (int i = 0; i < 10; ++i)
        corrs[size_t(i)].p += Eigen::Vector2d(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));

    PoseEstimate a = estimate_pose(corrs, intr, Se3Pose::identity());
    auto shuffled = corrs;
    for (size_t i = shuffled.size(); i > 1; --i)
        std::swap(shuffled[i - 1], shuffled[size_t(rng.next_u64() % i)]);
    PoseEstimate b = estimate_pose(shuffled, intr, Se3Pose::identity());

    double rot = 0;
    const double trans = oracle::pose_distance(a.pose, b.pose, &rot);
    CHECK(trans < 1e-10);
    CHECK(rot < 1e-10);
}

TEST_CASE("plain least squares is available without the robust loss") {
    CameraIntrinsics intr(500, 500, 320, 240);
    const Se3Pose truth = small_motion();
    auto corrs = synthetic_correspondences(intr, truth, 50, 8);
    PoseOptions opts;
    opts.robust = false;
    PoseEstimate est = estimate_pose(corrs, intr, Se3Pose::identity(), opts);
    CHECK(oracle::pose_distance(truth, est.pose, nullptr) < 1e-6);
}

TEST_CASE("tracker reports identity motion on a repeated frame") {
    SyntheticOptions opts;
    opts.frames = 1;
    SyntheticScene scene(opts);
    SyntheticFrame f = scene.render(0);
    Tracker tracker(scene.intrinsics());
    tracker.process(f.rgb, f.depth, nullptr);
    FrameResult r = tracker.process(f.rgb, f.depth, nullptr);
    CHECK(!r.lost);
    CHECK(r.relative.t.norm() < 1e-6);
    CHECK(r.relative.rotation_angle() < 1e-6);
}

TEST_CASE("tracker follows a static scene within millimeters per frame") {
    SyntheticOptions opts;
    opts.frames = 10;
    opts.with_box = false;
    SyntheticScene scene(opts);
    Tracker tracker(scene.intrinsics());
    double worst = 0;
    for (int i = 0; i < opts.frames; ++i) {
        SyntheticFrame f = scene.render(i);
        FrameResult r = tracker.process(f.rgb, f.depth, nullptr);
        REQUIRE(!r.lost);
        if (i == 0) continue;
        // True relative motion previous->current in the previous camera frame.
        const Se3Pose gt_rel = scene.camera_pose(i).inverse().compose(scene.camera_pose(i - 1));
        const double err = (r.relative.t - gt_rel.t).norm();
        worst = std::max(worst, err);
    }
    CHECK(worst < 2e-3);
}

TEST_CASE("masking the moving box keeps the pose on the static background") {
    SyntheticOptions opts;
    opts.frames = 10;
    SyntheticScene scene(opts);

    auto run = [&](bool masked) {
        Tracker tracker(scene.intrinsics());
        double err_sum = 0;
        for (int i = 0; i < opts.frames; ++i) {
            SyntheticFrame f = scene.render(i);
            FrameResult r = tracker.process(f.rgb, f.depth, masked ? &f.box_mask : nullptr);
            const Se3Pose gt_wc = scene.camera_pose(i);
            err_sum += (r.pose_wc.t - gt_wc.t).norm();
        }
        return err_sum / opts.frames;
    };

    const double masked_err = run(true);
    const double unmasked_err = run(false);
    CHECK(masked_err < 0.5 * unmasked_err);
    CHECK(masked_err < 0.05);
}
