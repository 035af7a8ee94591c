#include "deva/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "deva/error.hpp"

namespace deva {
namespace {

std::vector<PosePair> paired_or_throw(const Trajectory& est, const Trajectory& gt,
                                      double max_diff) {
    std::vector<PosePair> pairs = associate_trajectories(est, gt, max_diff);
    if (pairs.size() < 2) throw Error("trajectory comparison needs at least 2 paired poses");
    return pairs;
}

}  // namespace

std::vector<PosePair> associate_trajectories(const Trajectory& est, const Trajectory& gt,
                                             double max_diff) {
    if (est.empty() || gt.empty()) throw Error("associate_trajectories: empty trajectory");
    std::vector<double> ta, tb;
    ta.reserve(est.size());
    tb.reserve(gt.size());
    for (const auto& s : est) ta.push_back(s.timestamp);
    for (const auto& s : gt) tb.push_back(s.timestamp);
    std::vector<std::pair<int, int>> idx = associate_timestamps(ta, tb, max_diff);
    if (idx.empty()) throw Error("associate_trajectories: no timestamp pairs within tolerance");
    std::vector<PosePair> out;
    out.reserve(idx.size());
    for (auto [i, j] : idx)
        out.push_back({est[size_t(i)].timestamp, gt[size_t(j)].timestamp, est[size_t(i)].pose,
                       gt[size_t(j)].pose});
    return out;
}

Se3Pose umeyama_se3(const std::vector<Eigen::Vector3d>& est,
                    const std::vector<Eigen::Vector3d>& gt) {
    if (est.size() != gt.size()) throw Error("umeyama_se3: position counts differ");
    const int n = int(est.size());
    if (n < 3) throw Error("umeyama_se3: need at least 3 paired positions");

    Eigen::Vector3d mu_est = Eigen::Vector3d::Zero(), mu_gt = Eigen::Vector3d::Zero();
    for (int i = 0; i < n; ++i) {
        mu_est += est[size_t(i)];
        mu_gt += gt[size_t(i)];
    }
    mu_est /= n;
    mu_gt /= n;

    Eigen::Matrix3d sigma = Eigen::Matrix3d::Zero();
    for (int i = 0; i < n; ++i)
        sigma += (gt[size_t(i)] - mu_gt) * (est[size_t(i)] - mu_est).transpose();
    sigma /= n;

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sv = svd.singularValues();
    if (!(sv(0) > 0) || sv(1) <= 1e-12 * sv(0))
        throw Error("umeyama_se3: degenerate geometry (collinear or coincident positions)");

    Eigen::Matrix3d S = Eigen::Matrix3d::Identity();
    S(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
    const Eigen::Matrix3d R = svd.matrixU() * S * svd.matrixV().transpose();

    Se3Pose T;
    T.q = Eigen::Quaterniond(R).normalized();
    T.t = mu_gt - R * mu_est;
    return T;
}

double ate_rmse(const Trajectory& est, const Trajectory& gt, double max_diff) {
    std::vector<PosePair> pairs = paired_or_throw(est, gt, max_diff);
    std::vector<Eigen::Vector3d> pe, pg;
    pe.reserve(pairs.size());
    pg.reserve(pairs.size());
    for (const auto& pr : pairs) {
        pe.push_back(pr.est.t);
        pg.push_back(pr.gt.t);
    }
    const Se3Pose T = umeyama_se3(pe, pg);
    double sse = 0;
    for (size_t i = 0; i < pe.size(); ++i) sse += (T.apply(pe[i]) - pg[i]).squaredNorm();
    return std::sqrt(sse / double(pe.size()));
}

std::vector<double> per_pair_ate_errors(const Trajectory& est, const Trajectory& gt,
                                        double max_diff) {
    std::vector<PosePair> pairs = paired_or_throw(est, gt, max_diff);
    std::vector<Eigen::Vector3d> pe, pg;
    for (const auto& pr : pairs) {
        pe.push_back(pr.est.t);
        pg.push_back(pr.gt.t);
    }
    const Se3Pose T = umeyama_se3(pe, pg);
    std::vector<double> out(pe.size());
    for (size_t i = 0; i < pe.size(); ++i) out[i] = (T.apply(pe[i]) - pg[i]).norm();
    return out;
}

RpeResult rpe(const Trajectory& est, const Trajectory& gt, double delta, double max_diff) {
    if (!(delta > 0)) throw Error("rpe: delta must be > 0");
    std::vector<PosePair> pairs = paired_or_throw(est, gt, max_diff);

    RpeResult res;
    double trans_sq = 0, rot_sq = 0;
    for (size_t i = 0; i < pairs.size(); ++i) {
        const double target = pairs[i].t_est + delta;
        // Nearest later pair within max_diff of t_i + delta.
        size_t best = pairs.size();
        double best_diff = max_diff;
        for (size_t j = i + 1; j < pairs.size(); ++j) {
            const double diff = std::abs(pairs[j].t_est - target);
            if (diff <= best_diff) {
                best_diff = diff;
                best = j;
            }
            if (pairs[j].t_est > target + max_diff) break;
        }
        if (best == pairs.size()) continue;

        const Se3Pose rel_est = relative_motion(pairs[i].est, pairs[best].est);
        const Se3Pose rel_gt = relative_motion(pairs[i].gt, pairs[best].gt);
        const Se3Pose E = relative_motion(rel_gt, rel_est);
        const double tv = E.t.norm() / delta;
        const double rv = E.rotation_angle() * 180.0 / M_PI / delta;
        trans_sq += tv * tv;
        rot_sq += rv * rv;
        ++res.pairs;
    }
    if (res.pairs == 0) throw Error("rpe: no interval pairs found (trajectory too short?)");
    res.trans_rmse = std::sqrt(trans_sq / res.pairs);
    res.rot_rmse_deg = std::sqrt(rot_sq / res.pairs);
    return res;
}

MetricReport evaluate_trajectories(const Trajectory& est, const Trajectory& gt,
                                   double rpe_delta, double max_diff) {
    MetricReport rep;
    std::vector<PosePair> pairs = paired_or_throw(est, gt, max_diff);
    rep.pairs_used = int(pairs.size());
    rep.ate_rmse = ate_rmse(est, gt, max_diff);
    const RpeResult r = rpe(est, gt, rpe_delta, max_diff);
    rep.rpe_trans_rmse = r.trans_rmse;
    rep.rpe_rot_rmse = r.rot_rmse_deg;
    return rep;
}

}  // namespace deva
