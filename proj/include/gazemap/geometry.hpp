#pragma once

#include "gazemap/error.hpp"
#include "gazemap/math.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace gazemap {

using TriangleIndices = std::array<std::uint32_t, 3>;

/// Triangle soup in object-local meters.
struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<TriangleIndices> triangles;

    std::array<Vec3, 3> corners(std::size_t tri) const {
        const auto& t = triangles[tri];
        return {vertices[t[0]], vertices[t[1]], vertices[t[2]]};
    }
};

struct SceneObject {
    std::string object_id;
    Mesh mesh;
    Transform transform;
};

struct Scene {
    std::vector<SceneObject> objects;

    /// Digest of the files the scene was loaded from; empty for in-memory scenes.
    std::string content_digest;

    /// Index of the object with this id, or objects.size() when absent.
    std::size_t find(std::string_view id) const {
        for (std::size_t i = 0; i < objects.size(); ++i) {
            if (objects[i].object_id == id) return i;
        }
        return objects.size();
    }

    /// Checks index ranges, unit rotations and id uniqueness.
    void validate() const {
        std::unordered_set<std::string> seen;
        for (const auto& obj : objects) {
            if (!seen.insert(obj.object_id).second) {
                throw ParseError("scene", 0, "duplicate object_id '" + obj.object_id + "'");
            }
            if (std::abs(obj.transform.rotation.norm() - 1.0) > 1e-6) {
                throw ParseError("scene", 0, "rotation of '" + obj.object_id + "' is not a unit quaternion");
            }
            const auto nverts = obj.mesh.vertices.size();
            for (const auto& t : obj.mesh.triangles) {
                if (t[0] >= nverts || t[1] >= nverts || t[2] >= nverts) {
                    throw ParseError("scene", 0, "triangle index out of range in '" + obj.object_id + "'");
                }
            }
        }
    }
};

/// Triangle area from its three edge lengths (Heron).
///
/// Uses Kahan's ordering of the factors, which is algebraically s(s-a)(s-b)(s-c)
/// but stays accurate for needle-shaped triangles.
inline double triangle_area(const Vec3& v0, const Vec3& v1, const Vec3& v2) {
    std::array<double, 3> e = {(v1 - v0).norm(), (v2 - v1).norm(), (v2 - v0).norm()};
    std::sort(e.begin(), e.end(), std::greater<>());
    const double a = e[0], b = e[1], c = e[2];
    const double radicand = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    if (!(radicand > 0.0)) return 0.0;
    return 0.25 * std::sqrt(radicand);
}

inline constexpr double kDegenerateArea = 1e-12;

/// Subdivision resolution reaching at least `k` samples per square meter.
inline int adaptive_resolution(double area, double k) {
    if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("k", "sampling density must be positive");
    if (!(area >= kDegenerateArea)) return 1;
    const double delta = 1.0 + 8.0 * k * area;
    if (delta < 25.0) return 1;
    return std::max(1, static_cast<int>(std::ceil((-3.0 + std::sqrt(delta)) / 2.0)));
}

/// Samples in a triangle subdivided at resolution r.
constexpr std::size_t samples_for_resolution(std::size_t r) { return (r + 1) * (r + 2) / 2; }

struct RowCol {
    std::size_t row = 0;
    std::size_t col = 0;

    friend bool operator==(const RowCol&, const RowCol&) = default;
};

/// O(1) inverse of the row-major triangular enumeration.
inline RowCol sample_index_to_rowcol(std::size_t idx) {
    const double x = (-3.0 + std::sqrt(8.0 * static_cast<double>(idx) + 9.0)) / 2.0;
    auto row = static_cast<std::size_t>(std::max(0.0, std::ceil(x)));
    // sqrt rounding can land one row off for very large indices.
    while (row > 0 && row * (row + 1) / 2 > idx) --row;
    while ((row + 1) * (row + 2) / 2 <= idx) ++row;
    return {row, idx - row * (row + 1) / 2};
}

constexpr std::size_t rowcol_to_sample_index(std::size_t row, std::size_t col) {
    return row * (row + 1) / 2 + col;
}

/// Weights for the triangle's vertices (v0, v1, v2).
struct Barycentric {
    double w1 = 0.0;
    double w2 = 0.0;
    double w3 = 0.0;
};

/// Barycentric weights of grid sample (row, col); (0,0) is v2, (r,0) is v1, (r,r) is v0.
inline Barycentric rowcol_to_barycentric(std::size_t row, std::size_t col, std::size_t r) {
    if (r < 1 || row > r || col > row) {
        throw IndexError("sample (" + std::to_string(row) + ", " + std::to_string(col) +
                         ") outside resolution " + std::to_string(r));
    }
    const double rd = static_cast<double>(r);
    return {static_cast<double>(col) / rd, static_cast<double>(row - col) / rd,
            1.0 - static_cast<double>(row) / rd};
}

inline Vec3 interpolate(const std::array<Vec3, 3>& v, const Barycentric& w) {
    return w.w1 * v[0] + w.w2 * v[1] + w.w3 * v[2];
}

struct TriangleSampling {
    int resolution = 1;
    std::size_t sample_count = 3;
    std::size_t sample_offset = 0;
};

/// Per-triangle sample blocks for one object, laid out contiguously in triangle order.
struct SampledMesh {
    std::string object_id;
    std::vector<TriangleSampling> triangles;
    std::size_t total_samples = 0;
    double sampling_density_k = 0.0;
    /// Object-local position of every sample, parallel to the value layout.
    std::vector<Vec3> local_positions;
};

inline SampledMesh build_sampled_mesh(const std::string& object_id, const Mesh& mesh, double k) {
    if (!(k > 0.0)) throw ConfigError("k", "sampling density must be positive");
    SampledMesh out;
    out.object_id = object_id;
    out.sampling_density_k = k;
    out.triangles.reserve(mesh.triangles.size());
    std::size_t offset = 0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto v = mesh.corners(t);
        const int r = adaptive_resolution(triangle_area(v[0], v[1], v[2]), k);
        const std::size_t count = samples_for_resolution(static_cast<std::size_t>(r));
        out.triangles.push_back({r, count, offset});
        offset += count;
    }
    out.total_samples = offset;
    out.local_positions.resize(offset);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto v = mesh.corners(t);
        const auto& ts = out.triangles[t];
        const auto r = static_cast<std::size_t>(ts.resolution);
        std::size_t idx = ts.sample_offset;
        for (std::size_t row = 0; row <= r; ++row) {
            for (std::size_t col = 0; col <= row; ++col) {
                out.local_positions[idx++] = interpolate(v, rowcol_to_barycentric(row, col, r));
            }
        }
    }
    return out;
}

inline std::vector<SampledMesh> build_sampled_meshes(const Scene& scene, double k) {
    std::vector<SampledMesh> out;
    out.reserve(scene.objects.size());
    for (const auto& obj : scene.objects) out.push_back(build_sampled_mesh(obj.object_id, obj.mesh, k));
    return out;
}

inline Barycentric sample_barycentric(const SampledMesh& sampled, std::size_t triangle_index,
                                      std::size_t sample_index) {
    if (triangle_index >= sampled.triangles.size()) {
        throw IndexError("triangle index " + std::to_string(triangle_index) + " out of range");
    }
    const auto& ts = sampled.triangles[triangle_index];
    if (sample_index >= ts.sample_count) {
        throw IndexError("sample index " + std::to_string(sample_index) + " out of range");
    }
    const auto rc = sample_index_to_rowcol(sample_index);
    return rowcol_to_barycentric(rc.row, rc.col, static_cast<std::size_t>(ts.resolution));
}

inline Vec3 sample_local_position(const SceneObject& object, const SampledMesh& sampled,
                                  std::size_t triangle_index, std::size_t sample_index) {
    const auto w = sample_barycentric(sampled, triangle_index, sample_index);
    if (triangle_index >= object.mesh.triangles.size()) {
        throw IndexError("mesh has no triangle " + std::to_string(triangle_index));
    }
    return interpolate(object.mesh.corners(triangle_index), w);
}

inline Vec3 sample_world_position(const SceneObject& object, const SampledMesh& sampled,
                                  std::size_t triangle_index, std::size_t sample_index) {
    return object.transform.apply(sample_local_position(object, sampled, triangle_index, sample_index));
}

}  // namespace gazemap
