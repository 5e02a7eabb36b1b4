#pragma once

#include "gazemap/geometry.hpp"
#include "gazemap/math.hpp"
#include "gazemap/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace gazemap {

inline constexpr int kDefaultZBufferResolution = 512;
inline constexpr std::uint32_t kClusterSize = 64;

/// Half-open run of consecutive triangle indices.
struct TriangleRange {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
};

struct BoundingSphere {
    Vec3 center = Vec3::Zero();
    double radius = 0.0;
};

namespace detail {

inline BoundingSphere sphere_around(const Mesh& mesh, const std::uint32_t* tris, std::size_t count) {
    Eigen::AlignedBox3d box;
    for (std::size_t k = 0; k < count; ++k) {
        for (auto vi : mesh.triangles[tris[k]]) box.extend(mesh.vertices[vi]);
    }
    if (box.isEmpty()) return {};
    BoundingSphere s{box.center(), 0.0};
    for (std::size_t k = 0; k < count; ++k) {
        for (auto vi : mesh.triangles[tris[k]]) s.radius = std::max(s.radius, (mesh.vertices[vi] - s.center).norm());
    }
    return s;
}

// Spreads the low 21 bits of v so that two zero bits follow each one.
inline std::uint64_t spread_bits(std::uint64_t v) {
    v &= 0x1fffff;
    v = (v | v << 32) & 0x1f00000000ffffULL;
    v = (v | v << 16) & 0x1f0000ff0000ffULL;
    v = (v | v << 8) & 0x100f00f00f00f00fULL;
    v = (v | v << 4) & 0x10c30c30c30c30c3ULL;
    v = (v | v << 2) & 0x1249249249249249ULL;
    return v;
}

// Triangle indices ordered along a Morton curve through their centroids (ties by index).
inline std::vector<std::uint32_t> morton_order(const Mesh& mesh) {
    const auto n = mesh.triangles.size();
    std::vector<Vec3> centroid(n);
    Eigen::AlignedBox3d box;
    for (std::size_t t = 0; t < n; ++t) {
        const auto c = mesh.corners(t);
        centroid[t] = (c[0] + c[1] + c[2]) / 3.0;
        box.extend(centroid[t]);
    }
    std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed(n);
    const Vec3 lo = n ? box.min() : Vec3::Zero();
    const Vec3 extent = n ? Vec3(box.sizes().cwiseMax(1e-12)) : Vec3::Ones();
    for (std::size_t t = 0; t < n; ++t) {
        const Vec3 q = ((centroid[t] - lo).cwiseQuotient(extent) * 2097151.0).cwiseMax(0.0).cwiseMin(2097151.0);
        const auto code = spread_bits(static_cast<std::uint64_t>(q.x())) |
                          spread_bits(static_cast<std::uint64_t>(q.y())) << 1 |
                          spread_bits(static_cast<std::uint64_t>(q.z())) << 2;
        keyed[t] = {code, static_cast<std::uint32_t>(t)};
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::uint32_t> order(n);
    for (std::size_t k = 0; k < n; ++k) order[k] = keyed[k].second;
    return order;
}

}  // namespace detail

/// Object-local bounding spheres for a mesh and for each cluster of kClusterSize triangles.
/// Clusters are runs of `order`, a spatially coherent permutation of the triangle indices.
struct MeshBounds {
    BoundingSphere object;
    std::vector<BoundingSphere> clusters;
    std::vector<std::uint32_t> order;

    static MeshBounds build(const Mesh& mesh) {
        MeshBounds b;
        b.order = detail::morton_order(mesh);
        const auto n = static_cast<std::uint32_t>(mesh.triangles.size());
        b.object = detail::sphere_around(mesh, b.order.data(), n);
        for (std::uint32_t c = 0; c < n; c += kClusterSize) {
            b.clusters.push_back(detail::sphere_around(mesh, b.order.data() + c, std::min(kClusterSize, n - c)));
        }
        return b;
    }

    /// Positions [begin, end) into `order` covered by one cluster.
    TriangleRange cluster_range(std::size_t cluster, std::size_t triangle_count) const {
        const auto begin = static_cast<std::uint32_t>(cluster * kClusterSize);
        return {begin, static_cast<std::uint32_t>(std::min<std::size_t>(triangle_count, begin + kClusterSize))};
    }
};

inline std::vector<MeshBounds> build_scene_bounds(const Scene& scene) {
    std::vector<MeshBounds> out;
    out.reserve(scene.objects.size());
    for (const auto& obj : scene.objects) out.push_back(MeshBounds::build(obj.mesh));
    return out;
}

inline BoundingSphere to_world(const BoundingSphere& s, const Mat4& model) {
    const double scale = std::max({model.col(0).head<3>().norm(), model.col(1).head<3>().norm(),
                                   model.col(2).head<3>().norm()});
    return {transform_point(model, s.center), s.radius * scale};
}

/// Cluster-granular culling: runs of positions into bounds.order whose cluster sphere meets the frustum.
inline std::vector<TriangleRange> cull_clusters(const Mesh& mesh, const MeshBounds& bounds, const Mat4& model,
                                                const FrustumPlanes& planes) {
    std::vector<TriangleRange> out;
    if (mesh.triangles.empty()) return out;
    const auto whole = to_world(bounds.object, model);
    if (!planes.intersects_sphere(whole.center, whole.radius)) return out;
    for (std::size_t c = 0; c < bounds.clusters.size(); ++c) {
        const auto s = to_world(bounds.clusters[c], model);
        if (!planes.intersects_sphere(s.center, s.radius)) continue;
        const auto r = bounds.cluster_range(c, mesh.triangles.size());
        if (!out.empty() && out.back().end == r.begin) {
            out.back().end = r.end;
        } else {
            out.push_back(r);
        }
    }
    return out;
}

/// Conservative per-triangle culling of the whole scene (base transforms); a triangle is
/// dropped only when all three vertices lie outside the same frustum plane.
inline std::vector<std::vector<std::uint32_t>> cull_triangles(const Scene& scene, const FrustumPlanes& planes) {
    std::vector<std::vector<std::uint32_t>> kept(scene.objects.size());
    for (std::size_t o = 0; o < scene.objects.size(); ++o) {
        const auto& obj = scene.objects[o];
        const Mat4 model = obj.transform.matrix();
        const auto bounds = MeshBounds::build(obj.mesh);
        for (const auto& range : cull_clusters(obj.mesh, bounds, model, planes)) {
            for (auto k = range.begin; k < range.end; ++k) {
                const auto t = bounds.order[k];
                const auto v = obj.mesh.corners(t);
                const std::array<Vec3, 3> w = {transform_point(model, v[0]), transform_point(model, v[1]),
                                               transform_point(model, v[2])};
                bool outside = false;
                for (const auto& p : planes.planes) {
                    if (p.signed_distance(w[0]) < 0 && p.signed_distance(w[1]) < 0 && p.signed_distance(w[2]) < 0) {
                        outside = true;
                        break;
                    }
                }
                if (!outside) kept[o].push_back(t);
            }
        }
        std::sort(kept[o].begin(), kept[o].end());
    }
    return kept;
}

/// One object's contribution to a render: its mesh, model matrix and triangle runs.
/// With `order` set, ranges index into it rather than into the triangle list.
struct DrawItem {
    const Mesh* mesh = nullptr;
    Mat4 model = Mat4::Identity();
    std::vector<TriangleRange> ranges;
    std::uint32_t object_index = 0;
    const std::vector<std::uint32_t>* order = nullptr;

    std::uint32_t triangle(std::uint32_t k) const { return order ? (*order)[k] : k; }
};

/// Draw list covering every triangle of every object at its base transform.
inline std::vector<DrawItem> draw_all(const Scene& scene) {
    std::vector<DrawItem> items;
    for (std::size_t o = 0; o < scene.objects.size(); ++o) {
        const auto& obj = scene.objects[o];
        items.push_back({&obj.mesh, obj.transform.matrix(),
                         {{0, static_cast<std::uint32_t>(obj.mesh.triangles.size())}},
                         static_cast<std::uint32_t>(o)});
    }
    return items;
}

/// A rasterized pixel sample handed to the fragment callback.
struct Fragment {
    int x = 0;
    int y = 0;
    double inv_depth = 0.0;  ///< 1 / eye-space distance along -z; larger is nearer
    double dinv_dx = 0.0;  ///< screen-space gradient of 1/depth
    double dinv_dy = 0.0;
    std::uint32_t object_index = 0;
    std::uint32_t triangle_index = 0;

    double depth() const { return 1.0 / inv_depth; }
};

namespace detail {

struct ScreenTriangle {
    std::array<double, 3> x, y, inv_w;
    double area, inv_area;
    double edge_tol;  // bound on the rounding error of any edge value inside the bounding box
    int min_x, max_x, min_y, max_y;
    double dinv_dx, dinv_dy;
    std::uint32_t object_index, triangle_index;
};

inline double edge(double ax, double ay, double bx, double by, double px, double py) {
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

// Same value as edge(), but evaluated from a fixed endpoint so that the two triangles
// sharing an edge get exactly opposite signs.
inline double shared_edge(double ax, double ay, double bx, double by, double px, double py) {
    if (ax < bx || (ax == bx && ay < by)) return edge(ax, ay, bx, by, px, py);
    return -edge(bx, by, ax, ay, px, py);
}

// Top-left fill rule for a positively oriented triangle in y-down screen space.
inline bool owns_edge(double ax, double ay, double bx, double by) {
    const double dx = bx - ax, dy = by - ay;
    return dy < 0.0 || (dy == 0.0 && dx > 0.0);
}

struct ScreenVertex {
    double x, y, inv_w;
};

inline ScreenVertex project_to_screen(const Vec4& c, int width, int height) {
    const double iw = 1.0 / c.w();
    return {(c.x() * iw + 1.0) * 0.5 * width, (1.0 - c.y() * iw) * 0.5 * height, iw};
}

// First pixel index whose center (i + 0.5) is >= v, clamped to [0, n]; v is finite.
inline int first_center_at_or_after(double v, int n) {
    const double t = v - 0.5;
    if (!(t > -1.0)) return 0;
    if (t >= n) return n;
    const int i = static_cast<int>(t);  // t > -1, so truncation is floor for t >= 0 and 0 otherwise
    return (t > i) ? i + 1 : i;
}

// Last pixel index whose center is <= v, clamped to [-1, n - 1].
inline int last_center_at_or_before(double v, int n) {
    const double t = v - 0.5;
    if (!(t >= 0.0)) return -1;
    if (t >= n - 1) return n - 1;
    return static_cast<int>(t);
}

inline void emit_screen_triangle(const std::array<ScreenVertex, 3>& v, int width, int height,
                                 std::uint32_t object_index, std::uint32_t triangle_index,
                                 std::vector<ScreenTriangle>& out) {
    const double fx0 = std::min(v[0].x, std::min(v[1].x, v[2].x)), fx1 = std::max(v[0].x, std::max(v[1].x, v[2].x));
    const double fy0 = std::min(v[0].y, std::min(v[1].y, v[2].y)), fy1 = std::max(v[0].y, std::max(v[1].y, v[2].y));
    if (!std::isfinite(fx0 + fx1 + fy0 + fy1)) return;
    // Pixel centers sit at i + 0.5.
    const int min_x = first_center_at_or_after(fx0, width), max_x = last_center_at_or_before(fx1, width);
    if (min_x > max_x) return;
    const int min_y = first_center_at_or_after(fy0, height), max_y = last_center_at_or_before(fy1, height);
    if (min_y > max_y) return;
    double area = edge(v[0].x, v[0].y, v[1].x, v[1].y, v[2].x, v[2].y);
    if (!(std::abs(area) > 0.0) || !std::isfinite(area)) return;

    ScreenTriangle st;
    const std::array<int, 3> order = area < 0.0 ? std::array<int, 3>{0, 2, 1} : std::array<int, 3>{0, 1, 2};
    for (int i = 0; i < 3; ++i) {
        st.x[i] = v[order[i]].x;
        st.y[i] = v[order[i]].y;
        st.inv_w[i] = v[order[i]].inv_w;
    }
    area = std::abs(area);
    st.area = area;
    st.inv_area = 1.0 / area;
    st.min_x = min_x;
    st.max_x = max_x;
    st.min_y = min_y;
    st.max_y = max_y;
    // d(lambda_i)/dx = -(b.y - a.y) / area for the edge opposite vertex i.
    const std::array<int, 3> ia = {1, 2, 0}, ib = {2, 0, 1};
    st.dinv_dx = st.dinv_dy = 0.0;
    for (int i = 0; i < 3; ++i) {
        st.dinv_dx += st.inv_w[i] * -(st.y[ib[i]] - st.y[ia[i]]);
        st.dinv_dy += st.inv_w[i] * (st.x[ib[i]] - st.x[ia[i]]);
    }
    st.dinv_dx *= st.inv_area;
    st.dinv_dy *= st.inv_area;
    const double extent = std::max(std::max(std::abs(fx0), std::abs(fx1)), std::max(std::abs(fy0), std::abs(fy1))) + 1.0;
    st.edge_tol = 1e-13 * extent * extent * (max_x - min_x + 8);
    st.object_index = object_index;
    st.triangle_index = triangle_index;
    out.push_back(st);
}

// Clips against the near plane (z >= -w) and emits the resulting fan. `screen` optionally
// holds the already projected corners, used when no clipping is needed.
inline void setup_triangle(const std::array<Vec4, 3>& c, int width, int height, std::uint32_t object_index,
                           std::uint32_t triangle_index, std::vector<ScreenTriangle>& out,
                           const std::array<ScreenVertex, 3>* screen = nullptr) {
    // Trivial reject against the six clip planes.
    for (int axis = 0; axis < 3; ++axis) {
        if (c[0][axis] > c[0].w() && c[1][axis] > c[1].w() && c[2][axis] > c[2].w()) return;
        if (c[0][axis] < -c[0].w() && c[1][axis] < -c[1].w() && c[2][axis] < -c[2].w()) return;
    }
    std::array<double, 3> dist;
    bool all_in = true;
    for (int i = 0; i < 3; ++i) {
        dist[i] = c[i].z() + c[i].w();
        all_in = all_in && dist[i] >= 0.0;
    }
    if (all_in) {
        if (screen) {
            emit_screen_triangle(*screen, width, height, object_index, triangle_index, out);
        } else {
            emit_screen_triangle({project_to_screen(c[0], width, height), project_to_screen(c[1], width, height),
                                  project_to_screen(c[2], width, height)},
                                 width, height, object_index, triangle_index, out);
        }
        return;
    }
    std::array<Vec4, 4> poly;
    int n = 0;
    for (int i = 0; i < 3; ++i) {
        const int j = (i + 1) % 3;
        if (dist[i] >= 0.0) poly[n++] = c[i];
        if ((dist[i] >= 0.0) != (dist[j] >= 0.0)) {
            const double t = dist[i] / (dist[i] - dist[j]);
            Vec4 p = c[i] + t * (c[j] - c[i]);
            p.z() = -p.w();
            poly[n++] = p;
        }
    }
    for (int i = 1; i + 1 < n; ++i) {
        emit_screen_triangle({project_to_screen(poly[0], width, height), project_to_screen(poly[i], width, height),
                              project_to_screen(poly[i + 1], width, height)},
                             width, height, object_index, triangle_index, out);
    }
}

}  // namespace detail

/// Scan-converts the draw list and calls frag(const Fragment&) for every covered pixel
/// whose depth lies in [near, far]. Rows are split into bands across workers, so the
/// callback may run concurrently but never for the same pixel.
template <typename FragmentFn>
void rasterize(const std::vector<DrawItem>& items, const Mat4& view, const Mat4& projection, int width, int height,
               unsigned workers, FragmentFn&& frag) {
    const FrustumParams fr = frustum_from_matrix(projection);
    const double inv_near = 1.0 / fr.near, inv_far = 1.0 / fr.far;
    std::vector<detail::ScreenTriangle> tris;
    std::vector<Vec4> clip_cache;
    std::vector<detail::ScreenVertex> screen_cache;
    for (const auto& item : items) {
        const Mat4 mvp = projection * view * item.model;
        const auto& mesh = *item.mesh;
        std::size_t selected = 0;
        for (const auto& r : item.ranges) selected += r.end - r.begin;
        const bool cache_all = selected * 3 > mesh.vertices.size();
        if (cache_all) {
            clip_cache.resize(mesh.vertices.size());
            screen_cache.resize(mesh.vertices.size());
            for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
                clip_cache[v] = mvp * mesh.vertices[v].homogeneous();
                screen_cache[v] = detail::project_to_screen(clip_cache[v], width, height);
            }
        }
        for (const auto& r : item.ranges) {
            for (auto k = r.begin; k < r.end; ++k) {
                const auto t = item.triangle(k);
                const auto& idx = mesh.triangles[t];
                if (cache_all) {
                    const std::array<Vec4, 3> c = {clip_cache[idx[0]], clip_cache[idx[1]], clip_cache[idx[2]]};
                    const std::array<detail::ScreenVertex, 3> sv = {screen_cache[idx[0]], screen_cache[idx[1]],
                                                                    screen_cache[idx[2]]};
                    detail::setup_triangle(c, width, height, item.object_index, t, tris, &sv);
                } else {
                    std::array<Vec4, 3> c;
                    for (int i = 0; i < 3; ++i) c[i] = mvp * mesh.vertices[idx[i]].homogeneous();
                    detail::setup_triangle(c, width, height, item.object_index, t, tris);
                }
            }
        }
    }

    const unsigned bands = std::min<unsigned>(std::max(1u, workers), static_cast<unsigned>(height));
    parallel_blocks(static_cast<std::size_t>(height), bands, [&](std::size_t row0, std::size_t row1, unsigned) {
        const int y0 = static_cast<int>(row0), y1 = static_cast<int>(row1) - 1;
        Fragment f;
        for (const auto& st : tris) {
            const int ty0 = std::max(st.min_y, y0), ty1 = std::min(st.max_y, y1);
            if (ty0 > ty1) continue;
            const bool own0 = detail::owns_edge(st.x[1], st.y[1], st.x[2], st.y[2]);
            const bool own1 = detail::owns_edge(st.x[2], st.y[2], st.x[0], st.y[0]);
            const bool own2 = detail::owns_edge(st.x[0], st.y[0], st.x[1], st.y[1]);
            f.object_index = st.object_index;
            f.triangle_index = st.triangle_index;
            f.dinv_dx = st.dinv_dx;
            f.dinv_dy = st.dinv_dy;
            // x-steps of the three edge functions; they are stepped incrementally and
            // re-evaluated exactly whenever rounding could decide the sign.
            const std::array<double, 3> step = {st.y[1] - st.y[2], st.y[2] - st.y[0], st.y[0] - st.y[1]};
            for (int y = ty0; y <= ty1; ++y) {
                const double py = y + 0.5;
                // Candidate span from the three edge lines, widened by a pixel against rounding.
                double lo = st.min_x, hi = st.max_x;
                for (int i = 0; i < 3; ++i) {
                    const int a = (i + 1) % 3, b = (i + 2) % 3;
                    const double at_left = detail::edge(st.x[a], st.y[a], st.x[b], st.y[b], st.min_x + 0.5, py);
                    if (step[i] > 1e-6) {
                        lo = std::max(lo, st.min_x - at_left / step[i] - 1.0);
                    } else if (step[i] < -1e-6) {
                        hi = std::min(hi, st.min_x - at_left / step[i] + 1.0);
                    }
                }
                if (!(lo <= hi)) continue;
                const int x_begin = static_cast<int>(std::ceil(lo)), x_end = static_cast<int>(std::floor(hi));
                const double px0 = x_begin + 0.5;
                std::array<double, 3> e = {detail::shared_edge(st.x[1], st.y[1], st.x[2], st.y[2], px0, py),
                                           detail::shared_edge(st.x[2], st.y[2], st.x[0], st.y[0], px0, py),
                                           detail::shared_edge(st.x[0], st.y[0], st.x[1], st.y[1], px0, py)};
                const double tol = st.edge_tol;
                bool entered = false;
                for (int x = x_begin; x <= x_end; ++x, e[0] += step[0], e[1] += step[1], e[2] += step[2]) {
                    if (e[0] < -tol || e[1] < -tol || e[2] < -tol) {
                        if (entered) break;
                        continue;
                    }
                    const double px = x + 0.5;
                    double e0 = e[0], e1 = e[1], e2 = e[2];
                    if (e0 <= tol) e0 = detail::shared_edge(st.x[1], st.y[1], st.x[2], st.y[2], px, py);
                    if (e1 <= tol) e1 = detail::shared_edge(st.x[2], st.y[2], st.x[0], st.y[0], px, py);
                    if (e2 <= tol) e2 = detail::shared_edge(st.x[0], st.y[0], st.x[1], st.y[1], px, py);
                    if (e0 < 0.0 || e1 < 0.0 || e2 < 0.0) continue;
                    if ((e0 == 0.0 && !own0) || (e1 == 0.0 && !own1) || (e2 == 0.0 && !own2)) continue;
                    entered = true;
                    const double inv = (e0 * st.inv_w[0] + e1 * st.inv_w[1] + e2 * st.inv_w[2]) * st.inv_area;
                    if (!(inv >= inv_far)) continue;
                    f.x = x;
                    f.y = y;
                    f.inv_depth = std::min(inv, inv_near);
                    frag(f);
                }
            }
        }
    });
}

inline constexpr std::uint64_t kNoSurface = ~std::uint64_t{0};

inline std::uint64_t surface_key(std::uint32_t object_index, std::uint32_t triangle_index) {
    return (std::uint64_t{object_index} << 32) | triangle_index;
}

/// Minimum eye-space depth per pixel plus the inverse-depth slope and identity of the
/// winning surface.
struct DepthBuffer {
    /// Geometry behind the surface ids; refers to the rendered meshes, which must outlive the buffer.
    struct Source {
        const Mesh* mesh = nullptr;
        Mat4 model_view = Mat4::Identity();
    };

    int width = 0;
    int height = 0;
    std::vector<double> depth;
    std::vector<double> dinv_dx;
    std::vector<double> dinv_dy;
    /// surface_key of the winning triangle, kNoSurface where empty.
    std::vector<std::uint64_t> surface;
    /// Indexed by object index; empty when no geometry is attached.
    std::vector<Source> sources;
    Mat4 view = Mat4::Identity();
    Mat4 projection = Mat4::Identity();
    double near = 0.0;
    double far = 0.0;

    DepthBuffer() = default;
    DepthBuffer(int w, int h, const Mat4& view_m, const Mat4& proj_m)
        : width(w), height(h), depth(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity()),
          dinv_dx(depth.size(), 0.0), dinv_dy(depth.size(), 0.0), surface(depth.size(), kNoSurface), view(view_m),
          projection(proj_m) {
        const auto fr = frustum_from_matrix(proj_m);
        near = fr.near;
        far = fr.far;
    }

    double at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
};

struct ZBufferSize {
    int width = kDefaultZBufferResolution;
    int height = kDefaultZBufferResolution;
};

inline DepthBuffer rasterize_depth(const std::vector<DrawItem>& items, const Mat4& view, const Mat4& projection,
                                   ZBufferSize size, unsigned workers = 1) {
    DepthBuffer buf(std::max(1, size.width), std::max(1, size.height), view, projection);
    // Z-test on inverse depth; linear depth is taken once per pixel afterwards.
    struct Texel {
        double inv = 0.0, dx = 0.0, dy = 0.0;
        std::uint64_t surface = kNoSurface;
    };
    thread_local std::vector<Texel> scratch;
    auto& texels = scratch;  // named so the worker threads share this thread's buffer
    texels.assign(buf.depth.size(), Texel{});
    rasterize(items, view, projection, buf.width, buf.height, workers, [&](const Fragment& f) {
        auto& t = texels[static_cast<std::size_t>(f.y) * buf.width + f.x];
        if (f.inv_depth > t.inv) t = {f.inv_depth, f.dinv_dx, f.dinv_dy, surface_key(f.object_index, f.triangle_index)};
    });
    for (std::size_t i = 0; i < texels.size(); ++i) {
        if (texels[i].inv > 0.0) {
            buf.depth[i] = 1.0 / texels[i].inv;
            buf.dinv_dx[i] = texels[i].dx;
            buf.dinv_dy[i] = texels[i].dy;
            buf.surface[i] = texels[i].surface;
        }
    }
    for (const auto& item : items) {
        if (buf.sources.size() <= item.object_index) buf.sources.resize(item.object_index + 1);
        buf.sources[item.object_index] = {item.mesh, view * item.model};
    }
    return buf;
}

/// Renders the whole scene at its base transforms after frustum culling.
inline DepthBuffer rasterize_depth(const Scene& scene, const Mat4& view, const Mat4& projection, ZBufferSize size,
                                   unsigned workers = 1) {
    const auto planes = FrustumPlanes::from_matrix(projection * view);
    const auto bounds = build_scene_bounds(scene);
    std::vector<DrawItem> items;
    for (std::size_t o = 0; o < scene.objects.size(); ++o) {
        const auto& obj = scene.objects[o];
        const Mat4 model = obj.transform.matrix();
        auto ranges = cull_clusters(obj.mesh, bounds[o], model, planes);
        if (!ranges.empty()) {
            items.push_back({&obj.mesh, model, std::move(ranges), static_cast<std::uint32_t>(o), &bounds[o].order});
        }
    }
    return rasterize_depth(items, view, projection, size, workers);
}

/// Depth-match tolerance: max(abs, rel * depth).
struct EpsilonPolicy {
    double abs = 1e-3;
    double rel = 1e-3;
    /// Evaluate the stored surface at the point's sub-pixel position instead of the pixel center.
    bool subpixel = true;

    double tolerance(double depth) const { return std::max(abs, rel * depth); }
};

namespace detail {

// Surface depth of pixel i evaluated at screen position (sx, sy); NaN when empty.
inline double surface_depth_at(const DepthBuffer& buf, int px, int py, double sx, double sy, bool subpixel) {
    const auto i = static_cast<std::size_t>(py) * buf.width + px;
    const double stored = buf.depth[i];
    if (!std::isfinite(stored)) return std::numeric_limits<double>::quiet_NaN();
    if (!subpixel) return stored;
    const double inv = 1.0 / stored + buf.dinv_dx[i] * (sx - (px + 0.5)) + buf.dinv_dy[i] * (sy - (py + 0.5));
    return inv > 0.0 ? 1.0 / inv : stored;
}

// Distance along the unit ray from the eye-space origin to the triangle, or a negative value.
inline double ray_hit(const Vec3& dir, const std::array<Vec3, 3>& tri) {
    const Vec3 e1 = tri[1] - tri[0];
    const Vec3 e2 = tri[2] - tri[0];
    const Vec3 pv = dir.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-300) return -1.0;
    const double inv = 1.0 / det;
    const Vec3 tv = -tri[0];
    const double u = tv.dot(pv) * inv;
    if (u < 0.0 || u > 1.0) return -1.0;
    const Vec3 qv = tv.cross(e1);
    const double v = dir.dot(qv) * inv;
    if (v < 0.0 || u + v > 1.0) return -1.0;
    return e2.dot(qv) * inv;
}

// Where the surfaces of the 3x3 pixel block around (px, py), extrapolated to the point, do
// not agree on one depth, casts the eye ray against their triangles: hidden if one lies in
// front of the point, visible if the ray meets one at or beyond it. Empty when the block is
// consistent or no surface meets the ray.
inline std::optional<bool> resolve_mixed_block(const DepthBuffer& buf, const Vec3& eye, double depth, double tol,
                                               double sx, double sy) {
    if (buf.sources.empty()) return std::nullopt;
    const int px = static_cast<int>(sx), py = static_cast<int>(sy);
    const int x0 = std::max(0, px - 1), x1 = std::min(buf.width - 1, px + 1);
    const int y0 = std::max(0, py - 1), y1 = std::min(buf.height - 1, py + 1);
    std::array<std::uint64_t, 9> ids;
    int n = 0;
    bool empty = false;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const auto id = buf.surface[static_cast<std::size_t>(y) * buf.width + x];
            if (id == kNoSurface) {
                empty = true;
            } else if (std::find(ids.begin(), ids.begin() + n, id) == ids.begin() + n) {
                ids[n++] = id;
            }
        }
    }
    if (!empty) {
        if (n < 2) return std::nullopt;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double d = surface_depth_at(buf, x, y, sx, sy, true);
                lo = std::min(lo, d);
                hi = std::max(hi, d);
            }
        }
        if (hi - lo <= tol) return std::nullopt;
    }
    const double dist = eye.norm();
    const Vec3 dir = eye / dist;
    const double tol_ray = tol * dist / depth;
    bool reached = false;
    for (int i = 0; i < n; ++i) {
        const auto object = static_cast<std::uint32_t>(ids[i] >> 32);
        const auto triangle = static_cast<std::uint32_t>(ids[i]);
        if (object >= buf.sources.size() || !buf.sources[object].mesh) return std::nullopt;
        const auto& src = buf.sources[object];
        auto tri = src.mesh->corners(triangle);
        for (auto& v : tri) v = transform_point(src.model_view, v);
        const double t = ray_hit(dir, tri);
        if (!(t > 0.0)) continue;
        const double hit_depth = t * depth / dist;
        if (hit_depth < buf.near || hit_depth > buf.far) continue;
        if (t < dist - tol_ray) return false;
        reached = true;
    }
    if (reached) return true;
    return std::nullopt;
}

}  // namespace detail

/// Visibility of a camera-space point whose clip position is already known.
///
/// With sub-pixel reconstruction, a point whose neighbourhood shows several surfaces is
/// tested exactly against those triangles. Otherwise the surfaces of the 2x2 pixel centers
/// around the point are tried in turn, so samples on a silhouette still find the surface they
/// lie on.
inline bool is_visible_eye(const DepthBuffer& buf, const Vec3& eye, const Vec4& clip, const EpsilonPolicy& eps) {
    const double depth = -eye.z();
    if (!(depth >= buf.near) || !(depth <= buf.far) || !(clip.w() > 0.0)) return false;
    const double sx = (clip.x() / clip.w() + 1.0) * 0.5 * buf.width;
    const double sy = (1.0 - clip.y() / clip.w()) * 0.5 * buf.height;
    if (!(sx >= 0.0 && sx < buf.width && sy >= 0.0 && sy < buf.height)) return false;
    const int px = static_cast<int>(sx), py = static_cast<int>(sy);
    const double tol = eps.tolerance(depth);
    auto matches = [&](int x, int y) {
        return std::abs(depth - detail::surface_depth_at(buf, x, y, sx, sy, eps.subpixel)) <= tol;
    };
    if (!eps.subpixel) return matches(px, py);
    if (const auto exact = detail::resolve_mixed_block(buf, eye, depth, tol, sx, sy)) return *exact;
    if (matches(px, py)) return true;
    const int nx = sx < px + 0.5 ? px - 1 : px + 1;
    const int ny = sy < py + 0.5 ? py - 1 : py + 1;
    const bool x_ok = nx >= 0 && nx < buf.width, y_ok = ny >= 0 && ny < buf.height;
    return (x_ok && matches(nx, py)) || (y_ok && matches(px, ny)) || (x_ok && y_ok && matches(nx, ny));
}

inline bool is_visible(const DepthBuffer& buf, const Vec3& world_point, const EpsilonPolicy& eps = {}) {
    const Vec3 eye = transform_point(buf.view, world_point);
    const Vec4 clip = buf.projection * eye.homogeneous();
    return is_visible_eye(buf, eye, clip, eps);
}

}  // namespace gazemap
