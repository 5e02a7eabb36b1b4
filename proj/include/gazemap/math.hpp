#pragma once

#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <numbers>

namespace gazemap {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using Quat = Eigen::Quaterniond;

/// Builds a quaternion from the (x, y, z, w) order used by every file format here.
inline Quat quat_xyzw(double x, double y, double z, double w) { return Quat(w, x, y, z); }

/// Rigid pose plus per-axis scale, applied as T * R * S.
struct Transform {
    Vec3 translation = Vec3::Zero();
    Quat rotation = Quat::Identity();
    Vec3 scale = Vec3::Ones();

    Mat4 matrix() const {
        Mat4 m = Mat4::Identity();
        m.topLeftCorner<3, 3>() = rotation.toRotationMatrix() * scale.asDiagonal();
        m.topRightCorner<3, 1>() = translation;
        return m;
    }

    Vec3 apply(const Vec3& p) const { return rotation * p.cwiseProduct(scale) + translation; }

    double max_abs_scale() const { return scale.cwiseAbs().maxCoeff(); }
};

/// World-from-camera pose; the camera looks down -z with +x right and +y up.
struct CameraPose {
    Vec3 position = Vec3::Zero();
    Quat rotation = Quat::Identity();

    /// Camera-from-world matrix.
    Mat4 view_matrix() const {
        const Eigen::Matrix3d rt = rotation.toRotationMatrix().transpose();
        Mat4 m = Mat4::Identity();
        m.topLeftCorner<3, 3>() = rt;
        m.topRightCorner<3, 1>() = -rt * position;
        return m;
    }
};

/// Near-plane extents of a perspective frustum, in meters.
struct FrustumParams {
    double left = -0.1;
    double right = 0.1;
    double bottom = -0.1;
    double top = 0.1;
    double near = 0.1;
    double far = 100.0;

    bool valid() const {
        return std::isfinite(left) && std::isfinite(right) && std::isfinite(bottom) &&
               std::isfinite(top) && std::isfinite(near) && std::isfinite(far) && left < right &&
               bottom < top && near > 0.0 && far > near;
    }
};

/// OpenGL-style off-center perspective matrix (column vectors, camera looking down -z).
inline Mat4 perspective_matrix(const FrustumParams& fr) {
    const double l = fr.left, r = fr.right, b = fr.bottom, t = fr.top, n = fr.near, f = fr.far;
    Mat4 m = Mat4::Zero();
    m(0, 0) = 2.0 * n / (r - l);
    m(0, 2) = (r + l) / (r - l);
    m(1, 1) = 2.0 * n / (t - b);
    m(1, 2) = (t + b) / (t - b);
    m(2, 2) = -(f + n) / (f - n);
    m(2, 3) = -2.0 * f * n / (f - n);
    m(3, 2) = -1.0;
    return m;
}

/// Inverse of perspective_matrix for matrices of that exact form.
inline FrustumParams frustum_from_matrix(const Mat4& m) {
    FrustumParams fr;
    const double c = m(2, 2), d = m(2, 3);
    fr.near = d / (c - 1.0);
    fr.far = d / (c + 1.0);
    fr.left = fr.near * (m(0, 2) - 1.0) / m(0, 0);
    fr.right = fr.near * (m(0, 2) + 1.0) / m(0, 0);
    fr.bottom = fr.near * (m(1, 2) - 1.0) / m(1, 1);
    fr.top = fr.near * (m(1, 2) + 1.0) / m(1, 1);
    return fr;
}

inline Vec3 transform_point(const Mat4& m, const Vec3& p) {
    return m.topLeftCorner<3, 3>() * p + m.topRightCorner<3, 1>();
}

/// Plane as (normal, offset); a point x is on the inner side when normal.dot(x) + offset >= 0.
struct Plane {
    Vec3 normal = Vec3::UnitZ();
    double offset = 0.0;

    double signed_distance(const Vec3& p) const { return normal.dot(p) + offset; }
};

/// Six planes bounding a view volume in the space the source matrix maps from.
struct FrustumPlanes {
    std::array<Plane, 6> planes{};

    /// Extracts the planes from a clip-from-space matrix (Gribb/Hartmann), normalized.
    static FrustumPlanes from_matrix(const Mat4& clip_from_space) {
        FrustumPlanes out;
        const Vec4 r0 = clip_from_space.row(0).transpose();
        const Vec4 r1 = clip_from_space.row(1).transpose();
        const Vec4 r2 = clip_from_space.row(2).transpose();
        const Vec4 r3 = clip_from_space.row(3).transpose();
        const std::array<Vec4, 6> raw = {r3 + r0, r3 - r0, r3 + r1, r3 - r1, r3 + r2, r3 - r2};
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const double len = raw[i].head<3>().norm();
            out.planes[i].normal = raw[i].head<3>() / len;
            out.planes[i].offset = raw[i][3] / len;
        }
        return out;
    }

    /// False only when the sphere lies entirely outside one plane.
    bool intersects_sphere(const Vec3& center, double radius) const {
        for (const auto& p : planes) {
            if (p.signed_distance(center) < -radius) return false;
        }
        return true;
    }
};

/// Angle in [0, pi] between two non-zero vectors.
inline double angle_between(const Vec3& a, const Vec3& b) {
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace gazemap
