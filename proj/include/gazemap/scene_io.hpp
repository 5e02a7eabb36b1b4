#pragma once

#include "gazemap/digest.hpp"
#include "gazemap/error.hpp"
#include "gazemap/geometry.hpp"

#include <nlohmann/json.hpp>

#include <fmt/format.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace gazemap {

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace detail {

inline double parse_double(std::string_view tok, const std::string& source, std::size_t line) {
    double v = 0.0;
    const auto* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
        throw ParseError(source, line, "invalid number '" + std::string(tok) + "'");
    }
    return v;
}

}  // namespace detail

/// Reads `v` and `f` records of a Wavefront OBJ; polygons are fan-triangulated and
/// every other record (normals, UVs, groups, materials) is ignored.
inline Mesh parse_obj(std::string_view text, const std::string& source = "obj") {
    Mesh mesh;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::uint32_t> face;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            std::string x, y, z;
            if (!(ls >> x >> y >> z)) throw ParseError(source, lineno, "vertex needs three coordinates");
            mesh.vertices.emplace_back(detail::parse_double(x, source, lineno),
                                       detail::parse_double(y, source, lineno),
                                       detail::parse_double(z, source, lineno));
        } else if (tag == "f") {
            face.clear();
            std::string tok;
            while (ls >> tok) {
                const auto head = tok.substr(0, tok.find('/'));
                long idx = 0;
                auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), idx);
                if (ec != std::errc{} || ptr != head.data() + head.size() || idx == 0) {
                    throw ParseError(source, lineno, "invalid face index '" + tok + "'");
                }
                const long n = static_cast<long>(mesh.vertices.size());
                const long resolved = idx > 0 ? idx - 1 : n + idx;
                if (resolved < 0 || resolved >= n) throw ParseError(source, lineno, "face index out of range");
                face.push_back(static_cast<std::uint32_t>(resolved));
            }
            if (face.size() < 3) throw ParseError(source, lineno, "face needs at least three vertices");
            for (std::size_t i = 1; i + 1 < face.size(); ++i) {
                mesh.triangles.push_back({face[0], face[i], face[i + 1]});
            }
        }
    }
    return mesh;
}

inline std::string format_obj(const Mesh& mesh) {
    std::string out;
    for (const auto& v : mesh.vertices) out += fmt::format("v {:.17g} {:.17g} {:.17g}\n", v.x(), v.y(), v.z());
    for (const auto& t : mesh.triangles) out += fmt::format("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1);
    return out;
}

inline Mesh load_obj(const std::filesystem::path& path) { return parse_obj(read_file(path), path.string()); }

/// Loads a JSON scene manifest:
///   {"objects": [{"object_id": "...", "mesh": "file.obj",
///                 "translation": [x,y,z], "rotation": [x,y,z,w], "scale": [x,y,z]}]}
/// Mesh paths are relative to the manifest. Transform fields are optional.
inline Scene load_scene(const std::filesystem::path& manifest_path) {
    const std::string text = read_file(manifest_path);
    const std::string source = manifest_path.string();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(source, 0, e.what());
    }
    if (!doc.is_object() || !doc.contains("objects") || !doc["objects"].is_array()) {
        throw ParseError(source, 0, "manifest needs an 'objects' array");
    }

    Sha256 digest;
    digest.update(text);
    Scene scene;
    const auto base = manifest_path.parent_path();
    auto vec3 = [&](const nlohmann::json& j, const char* key, Vec3 fallback) {
        if (!j.contains(key)) return fallback;
        const auto& a = j[key];
        if (!a.is_array() || a.size() != 3) throw ParseError(source, 0, std::string(key) + " needs 3 numbers");
        return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
    };
    try {
        for (const auto& entry : doc["objects"]) {
            SceneObject obj;
            obj.object_id = entry.at("object_id").get<std::string>();
            const auto mesh_path = base / entry.at("mesh").get<std::string>();
            const std::string mesh_text = read_file(mesh_path);
            digest.update(mesh_text);
            obj.mesh = parse_obj(mesh_text, mesh_path.string());
            obj.transform.translation = vec3(entry, "translation", Vec3::Zero());
            obj.transform.scale = vec3(entry, "scale", Vec3::Ones());
            if (entry.contains("rotation")) {
                const auto& q = entry["rotation"];
                if (!q.is_array() || q.size() != 4) throw ParseError(source, 0, "rotation needs 4 numbers (x,y,z,w)");
                obj.transform.rotation =
                    quat_xyzw(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
            }
            scene.objects.push_back(std::move(obj));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(source, 0, e.what());
    }
    scene.validate();
    scene.content_digest = digest.hex();
    return scene;
}

}  // namespace gazemap
