#include "deva/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "deva/error.hpp"

namespace deva {
namespace {

constexpr int kFlowLevels = 3;
constexpr int kFlowHalfWindow = 10;  // 21x21 window
constexpr int kFlowMaxIterations = 30;
constexpr double kFlowStepTolerance = 1e-2;
constexpr int kDetectLevels = 2;
constexpr int kDetectWindow = 3;
constexpr int kOrientationRadius = 7;

float clamped_at(const GrayImage& img, int x, int y) {
    x = std::clamp(x, 0, img.width - 1);
    y = std::clamp(y, 0, img.height - 1);
    return img.at(x, y);
}

struct GradientImages {
    GrayImage gx, gy;
};

GradientImages gradients(const GrayImage& img) {
    GradientImages g;
    g.gx = GrayImage(img.width, img.height);
    g.gy = GrayImage(img.width, img.height);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            g.gx.at(x, y) = 0.5f * (clamped_at(img, x + 1, y) - clamped_at(img, x - 1, y));
            g.gy.at(x, y) = 0.5f * (clamped_at(img, x, y + 1) - clamped_at(img, x, y - 1));
        }
    return g;
}

double bilinear(const GrayImage& img, double x, double y) {
    int ix = int(std::floor(x)), iy = int(std::floor(y));
    ix = std::clamp(ix, 0, img.width - 2);
    iy = std::clamp(iy, 0, img.height - 2);
    const double fx = x - ix, fy = y - iy;
    const double v00 = img.at(ix, iy), v10 = img.at(ix + 1, iy);
    const double v01 = img.at(ix, iy + 1), v11 = img.at(ix + 1, iy + 1);
    return (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 +
           fx * fy * v11;
}

bool window_fits(const GrayImage& img, double x, double y, int half) {
    return x - half >= 0.0 && y - half >= 0.0 && x + half <= double(img.width - 1) &&
           y + half <= double(img.height - 1);
}

struct FlowPyramid {
    std::vector<GrayImage> img;
    std::vector<GradientImages> grad;
};

FlowPyramid build_flow_pyramid(const GrayImage& base) {
    FlowPyramid pyr;
    pyr.img.push_back(base);
    for (int l = 1; l < kFlowLevels; ++l) {
        const GrayImage& prev = pyr.img.back();
        if (prev.width / 2 < 2 * kFlowHalfWindow + 4 || prev.height / 2 < 2 * kFlowHalfWindow + 4)
            break;
        pyr.img.push_back(downsample_half(prev));
    }
    pyr.grad.reserve(pyr.img.size());
    for (const auto& level : pyr.img) pyr.grad.push_back(gradients(level));
    return pyr;
}

FlowMatch track_point(const FlowPyramid& prev, const FlowPyramid& cur,
                      const Eigen::Vector2d& p) {
    FlowMatch out;
    const int top = int(prev.img.size()) - 1;
    Eigen::Vector2d nu = Eigen::Vector2d::Zero();
    double last_step = 0;
    bool iterated = false;

    for (int level = top; level >= 0; --level) {
        const double scale = double(1 << level);
        const Eigen::Vector2d pl = p / scale;
        const GrayImage& pimg = prev.img[size_t(level)];
        const GrayImage& cimg = cur.img[size_t(level)];
        const GradientImages& pgrad = prev.grad[size_t(level)];

        if (!window_fits(pimg, pl.x(), pl.y(), kFlowHalfWindow)) {
            if (level == 0) return out;  // template exits the image
            nu *= 2.0;
            continue;
        }

        // Template patch and its spatial gradient matrix, fixed per level.
        const int n = 2 * kFlowHalfWindow + 1;
        std::vector<double> tval(size_t(n) * n), tgx(size_t(n) * n), tgy(size_t(n) * n);
        double gxx = 0, gxy = 0, gyy = 0;
        for (int dy = -kFlowHalfWindow, k = 0; dy <= kFlowHalfWindow; ++dy)
            for (int dx = -kFlowHalfWindow; dx <= kFlowHalfWindow; ++dx, ++k) {
                const double sx = pl.x() + dx, sy = pl.y() + dy;
                tval[size_t(k)] = bilinear(pimg, sx, sy);
                tgx[size_t(k)] = bilinear(pgrad.gx, sx, sy);
                tgy[size_t(k)] = bilinear(pgrad.gy, sx, sy);
                gxx += tgx[size_t(k)] * tgx[size_t(k)];
                gxy += tgx[size_t(k)] * tgy[size_t(k)];
                gyy += tgy[size_t(k)] * tgy[size_t(k)];
            }
        const double det = gxx * gyy - gxy * gxy;
        const double mineig = 0.5 * (gxx + gyy - std::sqrt((gxx - gyy) * (gxx - gyy) +
                                                           4 * gxy * gxy));
        if (mineig < 1e-6 || det <= 0) return out;  // untrackable patch

        for (int it = 0; it < kFlowMaxIterations; ++it) {
            iterated = true;
            const Eigen::Vector2d q = pl + nu;
            if (!window_fits(cimg, q.x(), q.y(), kFlowHalfWindow)) {
                if (level == 0) return out;
                break;
            }
            double bx = 0, by = 0;
            for (int dy = -kFlowHalfWindow, k = 0; dy <= kFlowHalfWindow; ++dy)
                for (int dx = -kFlowHalfWindow; dx <= kFlowHalfWindow; ++dx, ++k) {
                    const double di =
                        tval[size_t(k)] - bilinear(cimg, q.x() + dx, q.y() + dy);
                    bx += di * tgx[size_t(k)];
                    by += di * tgy[size_t(k)];
                }
            const double sx = (gyy * bx - gxy * by) / det;
            const double sy = (gxx * by - gxy * bx) / det;
            nu += Eigen::Vector2d(sx, sy);
            last_step = std::hypot(sx, sy);
            if (last_step < kFlowStepTolerance) break;
        }
        if (level > 0) nu *= 2.0;
    }

    if (!iterated || last_step > 0.5) return out;  // never refined or diverged
    const Eigen::Vector2d match = p + nu;
    const GrayImage& base = cur.img[0];
    if (match.x() < 0 || match.y() < 0 || match.x() > base.width - 1 ||
        match.y() > base.height - 1)
        return out;
    out.pt = match;
    out.status = 1;
    return out;
}

template <bool Parallel>
std::vector<FlowMatch> track_flow_impl(const GrayImage& prev, const GrayImage& cur,
                                       const std::vector<Eigen::Vector2d>& pts) {
    if (prev.width != cur.width || prev.height != cur.height)
        throw Error("track_flow: image dimensions differ");
    FlowPyramid ppyr = build_flow_pyramid(prev);
    FlowPyramid cpyr = build_flow_pyramid(cur);
    std::vector<FlowMatch> out(pts.size());
#pragma omp parallel for schedule(dynamic) if (Parallel)
    for (int i = 0; i < int(pts.size()); ++i)
        out[size_t(i)] = track_point(ppyr, cpyr, pts[size_t(i)]);
    return out;
}

// Detection response at one level: min eigenvalue of the 3x3-summed
// structure tensor, zero inside the unusable border.
GrayImage corner_response(const GrayImage& img, const GradientImages& g) {
    GrayImage resp(img.width, img.height);
    std::fill(resp.data.begin(), resp.data.end(), 0.f);
    const int half = kDetectWindow / 2;
    const int margin = half + 1;
#pragma omp parallel for schedule(static)
    for (int y = margin; y < img.height - margin; ++y)
        for (int x = margin; x < img.width - margin; ++x) {
            double sxx = 0, sxy = 0, syy = 0;
            for (int dy = -half; dy <= half; ++dy)
                for (int dx = -half; dx <= half; ++dx) {
                    const double ix = g.gx.at(x + dx, y + dy);
                    const double iy = g.gy.at(x + dx, y + dy);
                    sxx += ix * ix;
                    sxy += ix * iy;
                    syy += iy * iy;
                }
            const double tr = sxx + syy;
            const double d = std::sqrt((sxx - syy) * (sxx - syy) + 4 * sxy * sxy);
            resp.at(x, y) = float(0.5 * (tr - d));
        }
    return resp;
}

double centroid_orientation(const GrayImage& img, int cx, int cy) {
    double m10 = 0, m01 = 0;
    for (int dy = -kOrientationRadius; dy <= kOrientationRadius; ++dy)
        for (int dx = -kOrientationRadius; dx <= kOrientationRadius; ++dx) {
            if (dx * dx + dy * dy > kOrientationRadius * kOrientationRadius) continue;
            const double v = clamped_at(img, cx + dx, cy + dy);
            m10 += dx * v;
            m01 += dy * v;
        }
    if (m10 == 0 && m01 == 0) return -1;
    double deg = std::atan2(m01, m10) * 180.0 / M_PI;
    if (deg < 0) deg += 360.0;
    if (deg >= 360.0) deg = 0.0;
    return deg;
}

}  // namespace

GrayImage downsample_half(const GrayImage& img) {
    GrayImage out(img.width / 2, img.height / 2);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            out.at(x, y) = 0.25f * (img.at(2 * x, 2 * y) + img.at(2 * x + 1, 2 * y) +
                                    img.at(2 * x, 2 * y + 1) + img.at(2 * x + 1, 2 * y + 1));
    return out;
}

std::vector<Keypoint> detect_keypoints(const GrayImage& gray, int max_count) {
    if (gray.width < 16 || gray.height < 16)
        throw Error("detect_keypoints: image must be at least 16x16");
    if (max_count < 1) return {};

    struct Candidate {
        Keypoint kp;
        int level;
    };
    std::vector<Candidate> all;

    GrayImage level_img = gray;
    for (int level = 0; level < kDetectLevels; ++level) {
        if (level > 0) {
            if (level_img.width / 2 < 16 || level_img.height / 2 < 16) break;
            level_img = downsample_half(level_img);
        }
        GradientImages g = gradients(level_img);
        GrayImage resp = corner_response(level_img, g);
        float max_resp = 0.f;
        for (float v : resp.data) max_resp = std::max(max_resp, v);
        if (max_resp <= 0.f) continue;
        const float threshold = 0.01f * max_resp;

        const double scale = double(1 << level);
        const double offset = (scale - 1.0) * 0.5;  // box-filter pixel center shift
        for (int y = 1; y < level_img.height - 1; ++y)
            for (int x = 1; x < level_img.width - 1; ++x) {
                const float r = resp.at(x, y);
                if (r < threshold) continue;
                // Keep the top-left element of response plateaus exactly once.
                bool keep = r >= resp.at(x - 1, y - 1) && r >= resp.at(x, y - 1) &&
                            r >= resp.at(x + 1, y - 1) && r >= resp.at(x - 1, y) &&
                            r > resp.at(x + 1, y) && r > resp.at(x - 1, y + 1) &&
                            r > resp.at(x, y + 1) && r > resp.at(x + 1, y + 1);
                if (!keep) continue;
                Keypoint kp;
                kp.x = x * scale + offset;
                kp.y = y * scale + offset;
                kp.d = kDetectWindow * scale;
                kp.theta = centroid_orientation(level_img, x, y);
                kp.sigma = r;
                kp.lambda = level;
                all.push_back({kp, level});
            }
    }

    std::sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
        if (a.kp.sigma != b.kp.sigma) return a.kp.sigma > b.kp.sigma;
        if (a.kp.y != b.kp.y) return a.kp.y < b.kp.y;
        if (a.kp.x != b.kp.x) return a.kp.x < b.kp.x;
        return a.level < b.level;
    });
    if (int(all.size()) > max_count) all.resize(size_t(max_count));

    std::vector<Keypoint> out;
    out.reserve(all.size());
    for (const auto& c : all) out.push_back(c.kp);
    return out;
}

std::vector<FlowMatch> track_flow(const GrayImage& prev, const GrayImage& cur,
                                  const std::vector<Eigen::Vector2d>& pts) {
    return track_flow_impl<true>(prev, cur, pts);
}

namespace reference {
std::vector<FlowMatch> track_flow(const GrayImage& prev, const GrayImage& cur,
                                  const std::vector<Eigen::Vector2d>& pts) {
    return track_flow_impl<false>(prev, cur, pts);
}
}  // namespace reference

Eigen::Vector2d reprojection_residual(const CameraIntrinsics& intr, const Se3Pose& pose,
                                      const Eigen::Vector3d& P, const Eigen::Vector2d& p) {
    return p - intr.project(pose.apply(P));
}

Eigen::Matrix<double, 2, 6> reprojection_jacobian(const CameraIntrinsics& intr,
                                                  const Se3Pose& pose,
                                                  const Eigen::Vector3d& P) {
    const Eigen::Vector3d a = pose.q * P;  // rotated point, before translation
    const Eigen::Vector3d q = a + pose.t;
    const double iz = 1.0 / q.z();
    Eigen::Matrix<double, 2, 3> dpi;
    dpi << intr.fx * iz, 0, -intr.fx * q.x() * iz * iz,
           0, intr.fy * iz, -intr.fy * q.y() * iz * iz;

    Eigen::Matrix3d skew_a;
    skew_a << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;

    Eigen::Matrix<double, 2, 6> J;
    J.block<2, 3>(0, 0) = -dpi;            // translation part
    J.block<2, 3>(0, 3) = dpi * skew_a;    // rotation part, r = p - pi(exp(w) a + t + v)
    return J;
}

PoseEstimate estimate_pose(const std::vector<Correspondence>& corrs,
                           const CameraIntrinsics& intr, const Se3Pose& init,
                           const PoseOptions& opts) {
    int selected = 0;
    for (const auto& c : corrs) selected += (c.m != 0);
    if (selected < 4) throw Error("estimate_pose: degenerate, fewer than 4 selected points");

    const double delta = opts.huber_delta;
    auto cost_of = [&](const Se3Pose& pose) {
        double cost = 0;
        for (const auto& c : corrs) {
            if (c.m == 0) continue;
            const Eigen::Vector3d q = pose.apply(c.P);
            if (q.z() <= 1e-9) return std::numeric_limits<double>::infinity();
            const double e = (c.p - intr.project(q)).norm();
            if (!opts.robust || e <= delta)
                cost += e * e;
            else
                cost += delta * (2 * e - delta);
        }
        return cost;
    };

    PoseEstimate result;
    Se3Pose pose = init;
    pose.normalize();
    double cost = cost_of(pose);
    result.cost_history.push_back(cost);

    double lambda = 1e-4;
    for (int it = 0; it < opts.max_iterations; ++it) {
        Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
        Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
        for (const auto& c : corrs) {
            if (c.m == 0) continue;
            const Eigen::Vector3d q = pose.apply(c.P);
            if (q.z() <= 1e-9) continue;
            const Eigen::Vector2d r = c.p - intr.project(q);
            const double e = r.norm();
            const double w = (opts.robust && e > delta) ? delta / e : 1.0;
            const Eigen::Matrix<double, 2, 6> J = reprojection_jacobian(intr, pose, c.P);
            H += w * J.transpose() * J;
            g += w * J.transpose() * r;
        }

        Eigen::Matrix<double, 6, 6> damped = H;
        for (int k = 0; k < 6; ++k) damped(k, k) += lambda * std::max(H(k, k), 1e-12);
        const Eigen::Matrix<double, 6, 1> step = damped.ldlt().solve(-g);
        if (!step.allFinite()) {
            lambda *= 10;
            continue;
        }
        if (step.norm() < opts.step_tolerance) {
            result.converged = true;
            break;
        }

        Se3Pose candidate;
        candidate.q = (quat_exp(step.tail<3>()) * pose.q).normalized();
        candidate.t = quat_exp(step.tail<3>()) * pose.t + step.head<3>();
        const double cand_cost = cost_of(candidate);
        if (cand_cost < cost) {
            pose = candidate;
            cost = cand_cost;
            result.cost_history.push_back(cost);
            lambda = std::max(lambda / 3, 1e-12);
        } else {
            lambda *= 10;
        }
    }

    result.pose = pose;
    for (const auto& c : corrs) {
        if (c.m == 0) continue;
        const Eigen::Vector3d q = pose.apply(c.P);
        if (q.z() <= 1e-9) continue;
        if ((c.p - intr.project(q)).norm() < opts.inlier_threshold) ++result.inliers;
    }
    return result;
}

Tracker::Tracker(const CameraIntrinsics& intr, TrackerConfig cfg)
    : intr_(intr), cfg_(std::move(cfg)) {}

FrameResult Tracker::process(const RgbImage& rgb, const DepthImage& depth,
                             const BinaryMask* mask) {
    if (rgb.width != depth.width || rgb.height != depth.height)
        throw Error("tracker: rgb and depth dimensions differ");
    if (mask && (mask->width != rgb.width || mask->height != rgb.height))
        throw Error("tracker: mask dimensions differ");

    FrameResult res;
    GrayImage gray = to_gray(rgb);

    auto detect_filtered = [&]() {
        std::vector<Keypoint> kps = detect_keypoints(gray, cfg_.max_keypoints);
        if (!mask) return kps;
        std::vector<Keypoint> out;
        out.reserve(kps.size());
        for (const auto& kp : kps) {
            const int x = std::clamp(int(std::lround(kp.x)), 0, gray.width - 1);
            const int y = std::clamp(int(std::lround(kp.y)), 0, gray.height - 1);
            if (mask->at(x, y) == 0) out.push_back(kp);
        }
        return out;
    };

    if (!has_prev_) {
        prev_keypoints_ = detect_filtered();
        res.detected = int(prev_keypoints_.size());
        res.pose_wc = pose_wc_;
        prev_gray_ = std::move(gray);
        prev_depth_ = depth;
        has_prev_ = true;
        return res;
    }

    std::vector<Eigen::Vector2d> pts;
    pts.reserve(prev_keypoints_.size());
    for (const auto& kp : prev_keypoints_) pts.emplace_back(kp.x, kp.y);
    std::vector<FlowMatch> matches = track_flow(prev_gray_, gray, pts);

    std::vector<Correspondence> corrs;
    std::vector<Keypoint> survivors;
    for (size_t i = 0; i < matches.size(); ++i) {
        if (!matches[i].status) continue;
        const auto& kp = prev_keypoints_[i];
        const int px = int(std::lround(kp.x)), py = int(std::lround(kp.y));
        if (!prev_depth_.in_bounds(px, py)) continue;
        const float z = prev_depth_.at(px, py);
        if (!(z > 0)) continue;
        const Eigen::Vector2d& m = matches[i].pt;
        const int mx = std::clamp(int(std::lround(m.x())), 0, gray.width - 1);
        const int my = std::clamp(int(std::lround(m.y())), 0, gray.height - 1);
        if (mask && mask->at(mx, my) != 0) continue;
        Correspondence c;
        c.p = m;
        c.P = intr_.backproject(kp.x, kp.y, double(z));
        c.m = 1;
        corrs.push_back(c);
        survivors.push_back(kp);
    }
    res.tracked = int(corrs.size());

    if (cfg_.resample && !survivors.empty()) {
        ResampleResult rs = resample_keypoints(survivors, cfg_.resample_cfg);
        for (size_t i = 0; i < corrs.size(); ++i) corrs[i].m = rs.kept_flags[i] ? 1 : 0;
    }
    for (const auto& c : corrs) res.selected += (c.m != 0);

    if (res.selected < 4) {
        res.lost = true;
        res.relative = velocity_;  // constant-velocity fallback
    } else {
        PoseEstimate est = estimate_pose(corrs, intr_, velocity_, cfg_.pose);
        res.relative = est.pose;
        res.inliers = est.inliers;
    }
    velocity_ = res.relative;
    pose_wc_ = pose_wc_.compose(res.relative.inverse());
    res.pose_wc = pose_wc_;

    prev_keypoints_ = detect_filtered();
    res.detected = int(prev_keypoints_.size());
    prev_gray_ = std::move(gray);
    prev_depth_ = depth;
    return res;
}

}  // namespace deva
