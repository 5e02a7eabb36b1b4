#pragma once

#include "gazemap/density.hpp"
#include "gazemap/digest.hpp"
#include "gazemap/error.hpp"
#include "gazemap/geometry.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace gazemap {

inline constexpr std::string_view kExportHeader =
    "object_id,triangle_index,sample_index,w1,w2,w3,local_x,local_y,local_z,world_x,world_y,world_z,value";

/// Streams one CSV record per sample, ordered by (object_id, triangle_index, sample_index).
/// World positions use each object's base transform. Returns the record count.
inline std::size_t write_export(std::ostream& out, const DensityMap& map, const Scene& scene,
                                const std::vector<SampledMesh>& meshes,
                                const std::optional<std::vector<std::string>>& include = std::nullopt) {
    if (map.values.size() != meshes.size() || meshes.size() != scene.objects.size()) {
        throw LayoutMismatchError("map, sampled meshes and scene disagree on object count");
    }
    std::vector<std::size_t> order(scene.objects.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scene.objects[a].object_id < scene.objects[b].object_id;
    });

    out << kExportHeader << '\n';
    std::size_t count = 0;
    fmt::memory_buffer buf;
    for (const auto o : order) {
        const auto& obj = scene.objects[o];
        if (include && std::find(include->begin(), include->end(), obj.object_id) == include->end()) continue;
        const auto& sm = meshes[o];
        if (map.values[o].size() != sm.total_samples) {
            throw LayoutMismatchError("map layout of '" + obj.object_id + "' does not match its sampling");
        }
        for (std::size_t t = 0; t < sm.triangles.size(); ++t) {
            const auto& ts = sm.triangles[t];
            for (std::size_t s = 0; s < ts.sample_count; ++s) {
                const auto w = sample_barycentric(sm, t, s);
                const Vec3& local = sm.local_positions[ts.sample_offset + s];
                const Vec3 world = obj.transform.apply(local);
                buf.clear();
                fmt::format_to(std::back_inserter(buf),
                               "{},{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n",
                               obj.object_id, t, s, w.w1, w.w2, w.w3, local.x(), local.y(), local.z(), world.x(),
                               world.y(), world.z(), map.values[o][ts.sample_offset + s]);
                out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
                ++count;
            }
        }
    }
    return count;
}

inline std::size_t write_export(const std::filesystem::path& path, const DensityMap& map, const Scene& scene,
                                const std::vector<SampledMesh>& meshes,
                                const std::optional<std::vector<std::string>>& include = std::nullopt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    const auto n = write_export(out, map, scene, meshes, include);
    out.flush();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
    return n;
}

/// Identifies the sample layout: scene files (or ids and geometry sizes in memory), plus k.
inline std::string layout_hash(const Scene& scene, const std::vector<SampledMesh>& meshes, double k) {
    Sha256 h;
    h.update(scene.content_digest);
    h.update(fmt::format("|k={:.17g}", k));
    for (std::size_t o = 0; o < meshes.size(); ++o) {
        h.update(fmt::format("|{}:{}:{}", meshes[o].object_id, meshes[o].triangles.size(), meshes[o].total_samples));
    }
    return h.hex();
}

inline constexpr std::string_view kMapMagic = "gazemap-map 1";

struct StoredMap {
    DensityMap map;
    std::string layout_hash;
    std::vector<std::string> object_ids;
    double k = 0.0;
};

/// Magic line, one JSON header line, then every value as little-endian float64 in layout order.
inline void save_map(const std::filesystem::path& path, const DensityMap& map, const std::vector<SampledMesh>& meshes,
                     const std::string& hash, double k) {
    static_assert(std::endian::native == std::endian::little, "map files are little-endian");
    nlohmann::json header;
    header["layout_hash"] = hash;
    header["k"] = k;
    header["global_max"] = map.global_max;
    header["normalized"] = map.normalized;
    auto objects = nlohmann::json::array();
    for (std::size_t o = 0; o < meshes.size(); ++o) {
        objects.push_back({{"object_id", meshes[o].object_id}, {"samples", map.values[o].size()}});
    }
    header["objects"] = objects;

    // Write next to the target and rename so a failed run leaves no partial map.
    auto tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write '" + path.string() + "'");
        out << kMapMagic << '\n' << header.dump() << '\n';
        for (const auto& v : map.values) {
            out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
        }
        if (!out) throw IoError("write to '" + path.string() + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot move map into place at '" + path.string() + "': " + ec.message());
    }
}

inline StoredMap load_map(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::string magic, header_line;
    std::getline(in, magic);
    if (magic != kMapMagic) throw ParseError(path.string(), 1, "not a gazemap map file");
    std::getline(in, header_line);
    StoredMap out;
    try {
        const auto header = nlohmann::json::parse(header_line);
        out.layout_hash = header.at("layout_hash").get<std::string>();
        out.k = header.at("k").get<double>();
        out.map.global_max = header.at("global_max").get<double>();
        out.map.normalized = header.at("normalized").get<bool>();
        for (const auto& obj : header.at("objects")) {
            out.object_ids.push_back(obj.at("object_id").get<std::string>());
            std::vector<double> values(obj.at("samples").get<std::size_t>());
            out.map.values.push_back(std::move(values));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), 2, e.what());
    }
    for (auto& v : out.map.values) {
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
        if (!in) throw ParseError(path.string(), 0, "map file is truncated");
    }
    return out;
}

/// Throws LayoutMismatchError when a stored map was produced for a different scene or k.
inline void check_layout(const StoredMap& stored, const Scene& scene, const std::vector<SampledMesh>& meshes) {
    const auto expected = layout_hash(scene, meshes, stored.k);
    if (stored.layout_hash != expected) {
        throw LayoutMismatchError("map was generated for a different scene layout (stale map or edited scene)");
    }
}

}  // namespace gazemap
