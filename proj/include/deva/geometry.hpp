#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "deva/error.hpp"

namespace deva {

struct CameraIntrinsics {
    double fx = 0, fy = 0, cx = 0, cy = 0;

    CameraIntrinsics() = default;
    CameraIntrinsics(double fx_, double fy_, double cx_, double cy_)
        : fx(fx_), fy(fy_), cx(cx_), cy(cy_) {
        if (!(fx > 0) || !(fy > 0)) throw Error("intrinsics: fx, fy must be > 0");
    }

    // Pinhole projection of a camera-frame point (z > 0).
    Eigen::Vector2d project(const Eigen::Vector3d& p) const {
        return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
    }

    // Inverse projection of pixel (u, v) at metric depth z.
    Eigen::Vector3d backproject(double u, double v, double z) const {
        return {(u - cx) * z / fx, (v - cy) * z / fy, z};
    }
};

// Rigid transform: apply(p) = q * p + t. Quaternion kept unit-norm.
struct Se3Pose {
    Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
    Eigen::Vector3d t = Eigen::Vector3d::Zero();

    static Se3Pose identity() { return {}; }

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return q * p + t; }

    Se3Pose compose(const Se3Pose& rhs) const {
        Se3Pose out;
        out.q = (q * rhs.q).normalized();
        out.t = q * rhs.t + t;
        return out;
    }

    Se3Pose inverse() const {
        Se3Pose out;
        out.q = q.conjugate();
        out.t = -(out.q * t);
        return out;
    }

    void normalize() { q.normalize(); }

    // Rotation angle in radians, stable near identity.
    double rotation_angle() const {
        return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
    }
};

// Relative motion error between two pose deltas, angle in radians.
inline Se3Pose relative_motion(const Se3Pose& from, const Se3Pose& to) {
    return from.inverse().compose(to);
}

// Quaternion exponential of a rotation vector, stable near zero.
inline Eigen::Quaterniond quat_exp(const Eigen::Vector3d& omega) {
    const double angle = omega.norm();
    if (angle < 1e-12) {
        Eigen::Quaterniond q(1.0, 0.5 * omega.x(), 0.5 * omega.y(), 0.5 * omega.z());
        q.normalize();
        return q;
    }
    const Eigen::Vector3d axis = omega / angle;
    return Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis));
}

}  // namespace deva
