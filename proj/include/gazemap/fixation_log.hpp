#pragma once

#include "gazemap/error.hpp"
#include "gazemap/gaze.hpp"
#include "gazemap/scene_io.hpp"

#include <fmt/format.h>

#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace gazemap {

/// Half-open interval [t0, t1) of fixation start times, in seconds.
struct TimeWindow {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();

    bool contains(double t) const { return t >= t0 && t < t1; }
};

/// Header documenting the column layout; written by tools that produce logs.
inline constexpr std::string_view kFixationLogHeader =
    "# start_time_s duration_s cam_x cam_y cam_z cam_qx cam_qy cam_qz cam_qw "
    "l r t b n f gaze_x gaze_y gaze_z [object_id tx ty tz qx qy qz qw sx sy sz]...";

inline constexpr std::size_t kFixationBaseFields = 18;
inline constexpr std::size_t kOverrideFields = 11;

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',' || c == ' ' || c == '\t' || c == '\r') {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline Fixation parse_fixation_fields(const std::vector<std::string>& f, const std::string& source,
                                      std::size_t line) {
    if (f.size() < kFixationBaseFields || (f.size() - kFixationBaseFields) % kOverrideFields != 0) {
        throw ParseError(source, line,
                         "expected 18 fields plus groups of 11 override fields, got " + std::to_string(f.size()));
    }
    auto num = [&](std::size_t i) { return parse_double(f[i], source, line); };
    Fixation fx;
    fx.start_time = num(0);
    fx.duration = num(1);
    fx.camera.position = Vec3(num(2), num(3), num(4));
    fx.camera.rotation = quat_xyzw(num(5), num(6), num(7), num(8));
    fx.frustum.left = num(9);
    fx.frustum.right = num(10);
    fx.frustum.top = num(11);
    fx.frustum.bottom = num(12);
    fx.frustum.near = num(13);
    fx.frustum.far = num(14);
    fx.gaze_dir = Vec3(num(15), num(16), num(17));

    if (!(fx.duration > 0.0)) throw ParseError(source, line, "duration must be positive");
    if (!fx.frustum.valid()) throw ParseError(source, line, "frustum needs l < r, b < t, 0 < n < f");
    if (std::abs(fx.camera.rotation.norm() - 1.0) > 1e-6) {
        throw ParseError(source, line, "camera rotation is not a unit quaternion");
    }
    const double len = fx.gaze_dir.norm();
    if (!(len > 0.0)) throw ParseError(source, line, "gaze direction is zero");
    fx.gaze_dir /= len;
    if (!(fx.gaze_dir.z() < 0.0)) throw ParseError(source, line, "gaze direction must point down -z");

    for (std::size_t i = kFixationBaseFields; i < f.size(); i += kOverrideFields) {
        ObjectOverride ov;
        ov.object_id = f[i];
        ov.transform.translation = Vec3(num(i + 1), num(i + 2), num(i + 3));
        ov.transform.rotation = quat_xyzw(num(i + 4), num(i + 5), num(i + 6), num(i + 7));
        ov.transform.scale = Vec3(num(i + 8), num(i + 9), num(i + 10));
        if (std::abs(ov.transform.rotation.norm() - 1.0) > 1e-6) {
            throw ParseError(source, line, "override rotation of '" + ov.object_id + "' is not a unit quaternion");
        }
        fx.overrides.push_back(std::move(ov));
    }
    return fx;
}

}  // namespace detail

/// Parses a fixation log held in memory; lines starting with '#' and blank lines are skipped.
inline std::vector<Fixation> parse_fixation_text(std::string_view text, const TimeWindow& window = {},
                                                 const std::string& source = "fixations") {
    std::vector<Fixation> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        auto fx = detail::parse_fixation_fields(detail::split_fields(line), source, lineno);
        if (window.contains(fx.start_time)) out.push_back(std::move(fx));
    }
    return out;
}

/// One log line for `fx`, round-trippable through parse_fixation_text.
inline std::string format_fixation(const Fixation& fx) {
    const auto& c = fx.camera;
    const auto& f = fx.frustum;
    std::string out = fmt::format("{:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} "
                                  "{:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g}",
                                  fx.start_time, fx.duration, c.position.x(), c.position.y(), c.position.z(),
                                  c.rotation.x(), c.rotation.y(), c.rotation.z(), c.rotation.w(), f.left, f.right,
                                  f.top, f.bottom, f.near, f.far, fx.gaze_dir.x(), fx.gaze_dir.y(), fx.gaze_dir.z());
    for (const auto& ov : fx.overrides) {
        const auto& t = ov.transform;
        out += fmt::format(" {} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g}",
                           ov.object_id, t.translation.x(), t.translation.y(), t.translation.z(), t.rotation.x(),
                           t.rotation.y(), t.rotation.z(), t.rotation.w(), t.scale.x(), t.scale.y(), t.scale.z());
    }
    return out;
}

inline std::vector<Fixation> parse_fixation_log(const std::filesystem::path& path, const TimeWindow& window = {}) {
    return parse_fixation_text(read_file(path), window, path.string());
}

}  // namespace gazemap
