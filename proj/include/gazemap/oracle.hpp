#pragma once

// Brute-force reference implementations. They share no code path with the z-buffer
// pipeline beyond the Gaussian itself and exist to check it.

#include "gazemap/density.hpp"
#include "gazemap/gaze.hpp"
#include "gazemap/geometry.hpp"

#include <vector>

namespace gazemap::oracle {

inline constexpr double kRaySlack = 1e-6;

/// World-space triangles of a scene pose, grouped per object with an AABB.
struct WorldTriangles {
    struct Object {
        Eigen::AlignedBox3d box;
        std::vector<std::array<Vec3, 3>> triangles;
    };
    std::vector<Object> objects;

    static WorldTriangles build(const Scene& scene, const std::vector<Mat4>& models) {
        WorldTriangles w;
        for (std::size_t o = 0; o < scene.objects.size(); ++o) {
            Object obj;
            const auto& mesh = scene.objects[o].mesh;
            for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
                const auto v = mesh.corners(t);
                std::array<Vec3, 3> wt;
                for (int i = 0; i < 3; ++i) {
                    wt[i] = transform_point(models[o], v[i]);
                    obj.box.extend(wt[i]);
                }
                obj.triangles.push_back(wt);
            }
            w.objects.push_back(std::move(obj));
        }
        return w;
    }

    static WorldTriangles build(const Scene& scene) {
        std::vector<Mat4> models;
        for (const auto& obj : scene.objects) models.push_back(obj.transform.matrix());
        return build(scene, models);
    }
};

/// Moller-Trumbore; returns the hit distance along the unit direction, or a negative value.
inline double ray_triangle(const Vec3& origin, const Vec3& dir, const std::array<Vec3, 3>& tri) {
    const Vec3 e1 = tri[1] - tri[0];
    const Vec3 e2 = tri[2] - tri[0];
    const Vec3 pv = dir.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-300) return -1.0;
    const double inv = 1.0 / det;
    const Vec3 tv = origin - tri[0];
    const double u = tv.dot(pv) * inv;
    if (u < 0.0 || u > 1.0) return -1.0;
    const Vec3 qv = tv.cross(e1);
    const double v = dir.dot(qv) * inv;
    if (v < 0.0 || u + v > 1.0) return -1.0;
    return e2.dot(qv) * inv;
}

namespace detail {

inline bool segment_hits_box(const Vec3& origin, const Vec3& dir, double length, const Eigen::AlignedBox3d& box) {
    double t0 = 0.0, t1 = length;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(dir[a]) < 1e-300) {
            if (origin[a] < box.min()[a] || origin[a] > box.max()[a]) return false;
            continue;
        }
        double ta = (box.min()[a] - origin[a]) / dir[a];
        double tb = (box.max()[a] - origin[a]) / dir[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1 + 1e-9) return false;
    }
    return true;
}

}  // namespace detail

/// True iff nothing in the scene lies strictly between origin and target (minus kRaySlack).
inline bool ray_visible(const WorldTriangles& world, const Vec3& origin, const Vec3& target) {
    const Vec3 delta = target - origin;
    const double dist = delta.norm();
    if (!(dist > 0.0)) return true;
    const Vec3 dir = delta / dist;
    const double limit = dist - kRaySlack;
    for (const auto& obj : world.objects) {
        if (!detail::segment_hits_box(origin, dir, dist, obj.box)) continue;
        for (const auto& tri : obj.triangles) {
            const double t = ray_triangle(origin, dir, tri);
            if (t > 1e-12 && t < limit) return false;
        }
    }
    return true;
}

inline bool ray_visible(const Scene& scene, const Vec3& origin, const Vec3& target) {
    return ray_visible(WorldTriangles::build(scene), origin, target);
}

/// Closed 4-sigma cone test in camera space, same boundary slack as gaussian_weight.
inline bool cone_contains(const Vec3& gaze_dir, const Vec3& p, double phi) {
    if (!(p.dot(gaze_dir) > 0.0)) return false;
    return angle_between(p, gaze_dir) <= phi * (1.0 + 1e-12);
}

/// Reference density: every sample, every fixation, ray-cast occlusion, no z-buffer.
inline DensityMap naive_accumulate(const Scene& scene, const std::vector<SampledMesh>& meshes,
                                   const std::vector<Fixation>& fixations, const GenerationConfig& config) {
    const auto cone = GazeCone::from_theta(config.theta);
    DensityMap map = DensityMap::zeros(meshes);
    for (const auto& fx : fixations) {
        if (!config.time_window.contains(fx.start_time)) continue;
        const auto models = object_matrices(scene, fx);
        const auto world = WorldTriangles::build(scene, models);
        const Mat4 view = fx.camera.view_matrix();
        for (std::size_t o = 0; o < meshes.size(); ++o) {
            if (!config.includes(scene.objects[o].object_id)) continue;
            const Mat4 mv = view * models[o];
            for (std::size_t i = 0; i < meshes[o].total_samples; ++i) {
                const Vec3 eye = transform_point(mv, meshes[o].local_positions[i]);
                const double depth = -eye.z();
                if (depth < fx.frustum.near || depth > fx.frustum.far) continue;
                const double w = gaussian_weight(eye, fx.gaze_dir, fx.duration, cone);
                if (w == 0.0) continue;
                const Vec3 target = transform_point(models[o], meshes[o].local_positions[i]);
                if (!ray_visible(world, fx.camera.position, target)) continue;
                map.values[o][i] += w;
                map.global_max = std::max(map.global_max, map.values[o][i]);
            }
        }
    }
    return map;
}

}  // namespace gazemap::oracle
