#pragma once

#include "gazemap/density.hpp"
#include "gazemap/error.hpp"
#include "gazemap/scene_io.hpp"

#include <charconv>
#include <filesystem>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

namespace gazemap {

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline double config_number(const std::string& field, const std::string& text) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw ConfigError(field, "not a number: '" + text + "'");
    }
    return v;
}

inline long config_integer(const std::string& field, const std::string& text) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigError(field, "not an integer: '" + text + "'");
    }
    return v;
}

inline bool config_bool(const std::string& field, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError(field, "not a boolean: '" + text + "'");
}

}  // namespace detail

/// Parses "t0:t1"; either side may be empty for an open bound.
inline TimeWindow parse_time_window(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ConfigError("time_window", "expected t0:t1, got '" + text + "'");
    TimeWindow w;
    const auto a = detail::trim(text.substr(0, colon));
    const auto b = detail::trim(text.substr(colon + 1));
    if (!a.empty()) w.t0 = detail::config_number("time_window", a);
    if (!b.empty()) w.t1 = detail::config_number("time_window", b);
    if (!(w.t0 <= w.t1)) throw ConfigError("time_window", "t0 must not exceed t1");
    return w;
}

/// Splits "a,b,c"; an empty string is an empty list.
inline std::vector<std::string> parse_id_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto t = detail::trim(item);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

inline double degrees_to_radians(double deg) { return deg * std::numbers::pi / 180.0; }

/// Applies one `key = value` setting. Unknown keys are errors.
inline void apply_config_setting(GenerationConfig& cfg, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "k") {
        cfg.k = config_number(key, value);
    } else if (key == "theta") {
        cfg.theta = config_number(key, value);
    } else if (key == "theta_deg") {
        cfg.theta = degrees_to_radians(config_number(key, value));
    } else if (key == "zbuffer_resolution") {
        cfg.zbuffer_resolution = static_cast<int>(config_integer(key, value));
    } else if (key == "epsilon_abs") {
        cfg.epsilon_abs = config_number(key, value);
    } else if (key == "epsilon_rel") {
        cfg.epsilon_rel = config_number(key, value);
    } else if (key == "time_window") {
        cfg.time_window = parse_time_window(value);
    } else if (key == "filtering") {
        cfg.filtering_enabled = config_bool(key, value);
    } else if (key == "objects") {
        cfg.object_include_list = parse_id_list(value);
    } else if (key == "workers") {
        const long w = config_integer(key, value);
        if (w < 0) throw ConfigError(key, "must be >= 0");
        cfg.workers = static_cast<unsigned>(w);
    } else {
        throw ConfigError(key, "unknown key");
    }
}

/// Flat `key = value` text; '#' starts a comment. Missing keys keep their defaults.
inline GenerationConfig parse_config(std::string_view text, const std::string& source = "config") {
    GenerationConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const auto body = detail::trim(line.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ParseError(source, lineno, "expected key = value");
        const auto key = detail::trim(body.substr(0, eq));
        const auto value = detail::trim(body.substr(eq + 1));
        if (!seen.insert(key == "theta_deg" ? "theta" : key).second) throw ConfigError(key, "given more than once");
        apply_config_setting(cfg, key, value);
    }
    cfg.validate();
    return cfg;
}

inline GenerationConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_file(path), path.string());
}

}  // namespace gazemap
