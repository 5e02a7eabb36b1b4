#pragma once

#include "gazemap/error.hpp"
#include "gazemap/math.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace gazemap {

/// Replaces an object's base transform for the duration of one fixation.
struct ObjectOverride {
    std::string object_id;
    Transform transform;
};

struct Fixation {
    double start_time = 0.0;
    double duration = 0.0;
    CameraPose camera;
    FrustumParams frustum;
    /// Unit gaze direction in camera space; points into -z.
    Vec3 gaze_dir = -Vec3::UnitZ();
    std::vector<ObjectOverride> overrides;
};

inline constexpr double kDefaultThetaRad = 0.01745;

/// Gaussian gaze cone: theta is one standard deviation, phi the 4-sigma cutoff half-angle.
struct GazeCone {
    double theta = kDefaultThetaRad;
    double sigma = std::tan(kDefaultThetaRad);
    double phi = std::atan(4.0 * std::tan(kDefaultThetaRad));

    static GazeCone from_theta(double theta) {
        if (!(theta > 0.0 && theta < std::numbers::pi / 2)) {
            throw ConfigError("theta", "angular deviation must lie in (0, pi/2)");
        }
        const double sigma = std::tan(theta);
        return {theta, sigma, std::atan(4.0 * sigma)};
    }
};

namespace detail {
// Relative slack on the 4-sigma boundary so the closed cone survives rounding.
inline constexpr double kCutoffSlack = 1e-12;
}  // namespace detail

/// Duration-weighted Gaussian contribution of a camera-space point `p`.
///
/// Zero behind the viewpoint and beyond the 4-sigma cone.
inline double gaussian_weight(const Vec3& p, const Vec3& gaze_dir, double duration, const GazeCone& cone) {
    const double d1 = p.dot(gaze_dir);
    if (!(d1 > 0.0)) return 0.0;
    const double d2 = (p - d1 * gaze_dir).norm();
    const double d = d1 * cone.sigma;
    // ratio is sigma_k / sigma.
    const double ratio = d2 / d;
    if (ratio > 4.0 * (1.0 + detail::kCutoffSlack)) return 0.0;
    return duration / (cone.sigma * std::sqrt(2.0 * std::numbers::pi)) * std::exp(-0.5 * ratio * ratio);
}

/// Intersection of the 4-sigma cone with the near plane z = -n (camera space).
struct EllipseParams {
    Vec3 gaze_hit;  ///< where the central gaze ray meets the near plane (E)
    Vec3 center;    ///< true center of the conic, midpoint of a0/a1
    double major_a = 0.0;
    double minor_b = 0.0;
    double inclination_alpha = 0.0;
    Vec3 a0, a1;  ///< major-axis vertices
    Vec3 b0, b1;  ///< chord through gaze_hit perpendicular to the major axis
};

inline Vec3 intersect_near_plane(const Vec3& dir, double near) { return (-near / dir.z()) * dir; }

/// Rotates the gaze ray by +-phi about the radial and tangential axes and intersects
/// the four rays with the near plane.
///
/// Throws GazeOutsideFrustumError when part of the cone does not reach z = -n.
inline EllipseParams ellipse_intersection(const Vec3& gaze_dir, double near, const GazeCone& cone) {
    const Vec3 r = gaze_dir.normalized();
    const Vec3 forward = -Vec3::UnitZ();
    const Vec3 right = Vec3::UnitX();

    Vec3 u1 = r.cross(forward);
    if (u1.norm() < 1e-12) {
        // Central gaze: any axis perpendicular to r works, the section is a circle.
        u1 = Vec3::UnitY();
    }
    u1.normalize();
    const Vec3 u2 = r.cross(u1).normalized();

    auto rotate = [&](const Vec3& axis, double angle) {
        const Quat q(std::cos(angle / 2), axis.x() * std::sin(angle / 2), axis.y() * std::sin(angle / 2),
                     axis.z() * std::sin(angle / 2));
        return Vec3(q * r);
    };
    const Vec3 ra0 = rotate(u1, -cone.phi);
    const Vec3 ra1 = rotate(u1, cone.phi);
    const Vec3 rb0 = rotate(u2, -cone.phi);
    const Vec3 rb1 = rotate(u2, cone.phi);
    for (const Vec3* v : {&r, &ra0, &ra1, &rb0, &rb1}) {
        if (!(v->z() < -1e-9)) {
            throw GazeOutsideFrustumError("4-sigma gaze cone does not intersect the near plane");
        }
    }

    EllipseParams e;
    e.gaze_hit = intersect_near_plane(r, near);
    e.a0 = intersect_near_plane(ra0, near);
    e.a1 = intersect_near_plane(ra1, near);
    e.b0 = intersect_near_plane(rb0, near);
    e.b1 = intersect_near_plane(rb1, near);
    e.major_a = (e.a1 - e.a0).norm() / 2.0;
    e.center = (e.a0 + e.a1) / 2.0;

    // The b chord passes through gaze_hit, which sits off-center on the major axis
    // for a tilted cone; scale it up to the full minor radius.
    const double chord_half = (e.b1 - e.b0).norm() / 2.0;
    const double offset = (e.gaze_hit - e.center).norm();
    const double shrink = 1.0 - (offset * offset) / (e.major_a * e.major_a);
    e.minor_b = shrink > 0.0 ? chord_half / std::sqrt(shrink) : chord_half;

    const Vec3 me(e.gaze_hit.x(), e.gaze_hit.y(), 0.0);
    const double me_len = me.norm();
    e.inclination_alpha = me_len > 1e-15 ? std::acos(std::clamp(right.dot(me / me_len), -1.0, 1.0)) : 0.0;
    return e;
}

struct CropBounds {
    double left = 0.0;
    double right = 0.0;
    double bottom = 0.0;
    double top = 0.0;
};

/// Axis-aligned bounding box of the rotated ellipse on the near plane.
inline CropBounds crop_bounds(const EllipseParams& e) {
    const double ca = std::cos(e.inclination_alpha), sa = std::sin(e.inclination_alpha);
    const double a2 = e.major_a * e.major_a, b2 = e.minor_b * e.minor_b;
    const double half_w = std::sqrt(a2 * ca * ca + b2 * sa * sa);
    const double half_h = std::sqrt(a2 * sa * sa + b2 * ca * ca);
    return {e.center.x() - half_w, e.center.x() + half_w, e.center.y() - half_h, e.center.y() + half_h};
}

struct CropFrustum {
    FrustumParams params;
    Mat4 projection = Mat4::Identity();
};

inline Mat4 crop_projection_matrix(const CropBounds& bounds, double near, double far) {
    const FrustumParams fr{bounds.left, bounds.right, bounds.bottom, bounds.top, near, far};
    if (!fr.valid()) throw InvalidFrustumError("crop frustum bounds are degenerate");
    return perspective_matrix(fr);
}

/// Perspective frustum tightly enclosing the fixation's 4-sigma cone.
inline CropFrustum make_crop_frustum(const Fixation& fx, const GazeCone& cone) {
    const auto ellipse = ellipse_intersection(fx.gaze_dir, fx.frustum.near, cone);
    const auto b = crop_bounds(ellipse);
    CropFrustum out;
    out.params = {b.left, b.right, b.bottom, b.top, fx.frustum.near, fx.frustum.far};
    out.projection = crop_projection_matrix(b, fx.frustum.near, fx.frustum.far);
    return out;
}

/// NDC cube test on a clip-space position, with a tiny tolerance for rounding on the faces.
inline bool inside_ndc_cube(const Vec4& clip) {
    const double w = clip.w();
    if (!(w > 0.0)) return false;
    const double lim = w * (1.0 + 1e-9);
    return std::abs(clip.x()) <= lim && std::abs(clip.y()) <= lim && std::abs(clip.z()) <= lim;
}

}  // namespace gazemap
