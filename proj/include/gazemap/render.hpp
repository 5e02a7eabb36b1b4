#pragma once

#include "gazemap/density.hpp"
#include "gazemap/error.hpp"
#include "gazemap/image.hpp"
#include "gazemap/raster.hpp"
#include "gazemap/scene_io.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <vector>

namespace gazemap {

using Rgb = std::array<double, 3>;

/// Piecewise-linear color scale over [0, 1] with a gamma applied to values first.
struct ColorMap {
    struct Stop {
        double value;
        Rgb color;  ///< components in [0, 1]
    };
    std::vector<Stop> stops;
    double gamma = 1.0;

    /// Blue, green, yellow, red.
    static ColorMap heat(double gamma = 1.0) {
        ColorMap m;
        m.stops = {{0.0, {0.0, 0.0, 1.0}}, {1.0 / 3.0, {0.0, 1.0, 0.0}}, {2.0 / 3.0, {1.0, 1.0, 0.0}},
                   {1.0, {1.0, 0.0, 0.0}}};
        m.gamma = gamma;
        m.validate();
        return m;
    }

    void validate() const {
        if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma", "must be > 0");
        if (stops.size() < 2) throw ConfigError("colormap", "needs at least two stops");
        if (stops.front().value != 0.0 || stops.back().value != 1.0) {
            throw ConfigError("colormap", "stops must start at 0 and end at 1");
        }
        for (std::size_t i = 1; i < stops.size(); ++i) {
            if (!(stops[i].value > stops[i - 1].value)) throw ConfigError("colormap", "stops must strictly increase");
        }
    }

    /// Position on the scale after the gamma transform.
    double scaled(double v) const { return std::pow(std::clamp(v, 0.0, 1.0), gamma); }

    Rgb lookup(double v) const {
        const double s = scaled(v);
        for (std::size_t i = 1; i < stops.size(); ++i) {
            if (s <= stops[i].value) {
                const double t = (s - stops[i - 1].value) / (stops[i].value - stops[i - 1].value);
                Rgb c;
                for (int k = 0; k < 3; ++k) c[k] = stops[i - 1].color[k] + t * (stops[i].color[k] - stops[i - 1].color[k]);
                return c;
            }
        }
        return stops.back().color;
    }
};

/// Reads lines of `stop r g b` with stop in [0, 1] and channels in 0..255; '#' comments.
inline ColorMap parse_colormap(std::string_view text, double gamma = 1.0, const std::string& source = "colormap") {
    ColorMap m;
    m.gamma = gamma;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto body = line.substr(0, line.find('#'));
        std::istringstream ls(body);
        double v, r, g, b;
        if (!(ls >> v)) continue;
        if (!(ls >> r >> g >> b)) throw ParseError(source, lineno, "expected: stop r g b");
        for (double c : {r, g, b}) {
            if (!(c >= 0.0 && c <= 255.0)) throw ParseError(source, lineno, "color channels must lie in 0..255");
        }
        m.stops.push_back({v, {r / 255.0, g / 255.0, b / 255.0}});
    }
    m.validate();
    return m;
}

inline ColorMap load_colormap(const std::filesystem::path& path, double gamma = 1.0) {
    return parse_colormap(read_file(path), gamma, path.string());
}

/// Piecewise-linear field value at barycentric (w1, w2, w3) of a triangle sampled at resolution r.
inline double interpolate_samples(std::span<const double> block, std::size_t r, const Barycentric& w) {
    const double rd = static_cast<double>(r);
    const double row_f = std::clamp((1.0 - w.w3) * rd, 0.0, rd);
    const double col_f = std::clamp(w.w1 * rd, 0.0, row_f);
    auto i = static_cast<std::size_t>(row_f);
    auto j = static_cast<std::size_t>(col_f);
    if (i >= r) i = r - 1;
    if (j > i) j = i;
    const double fr = row_f - static_cast<double>(i);
    const double fc = col_f - static_cast<double>(j);
    auto at = [&](std::size_t row, std::size_t col) { return block[rowcol_to_sample_index(row, col)]; };
    if (fc <= fr) {
        return (1.0 - fr) * at(i, j) + (fr - fc) * at(i + 1, j) + fc * at(i + 1, j + 1);
    }
    return (1.0 - fc) * at(i, j) + (fc - fr) * at(i, j + 1) + fr * at(i + 1, j + 1);
}

namespace detail {

inline Barycentric barycentric_of(const std::array<Vec3, 3>& v, const Vec3& p) {
    const Vec3 e0 = v[1] - v[0], e1 = v[2] - v[0], d = p - v[0];
    const double d00 = e0.dot(e0), d01 = e0.dot(e1), d11 = e1.dot(e1);
    const double d20 = d.dot(e0), d21 = d.dot(e1);
    const double den = d00 * d11 - d01 * d01;
    if (!(std::abs(den) > 0.0)) return {1.0 / 3, 1.0 / 3, 1.0 / 3};
    double b1 = (d11 * d20 - d01 * d21) / den;
    double b2 = (d00 * d21 - d01 * d20) / den;
    double b0 = 1.0 - b1 - b2;
    b0 = std::max(b0, 0.0);
    b1 = std::max(b1, 0.0);
    b2 = std::max(b2, 0.0);
    const double s = b0 + b1 + b2;
    return {b0 / s, b1 / s, b2 / s};
}

}  // namespace detail

inline constexpr std::array<std::uint8_t, 3> kBackground = {0, 0, 0};

struct HeatmapRender {
    Image image;
    /// Interpolated (pre-gamma) value per pixel; NaN where no geometry was hit.
    std::vector<double> values;
};

/// Renders the scene from `camera`, coloring each visible surface point by the
/// piecewise-linear density field.
inline HeatmapRender render_heatmap(const Scene& scene, const std::vector<SampledMesh>& meshes,
                                    const DensityMap& map, const CameraPose& camera, const FrustumParams& frustum,
                                    const ColorMap& colormap, int width, int height, unsigned workers = 1) {
    if (!frustum.valid()) throw InvalidFrustumError("render frustum is degenerate");
    if (width < 1 || height < 1) throw ConfigError("resolution", "must be at least 1x1");
    colormap.validate();
    const Mat4 view = camera.view_matrix();
    const Mat4 proj = perspective_matrix(frustum);

    const auto npix = static_cast<std::size_t>(width) * height;
    std::vector<double> depth(npix, std::numeric_limits<double>::infinity());
    std::vector<std::uint32_t> obj_id(npix, 0), tri_id(npix, 0);
    rasterize(draw_all(scene), view, proj, width, height, resolve_workers(workers), [&](const Fragment& f) {
        const auto i = static_cast<std::size_t>(f.y) * width + f.x;
        if (f.depth() < depth[i]) {
            depth[i] = f.depth();
            obj_id[i] = f.object_index;
            tri_id[i] = f.triangle_index;
        }
    });

    std::vector<Mat4> local_from_eye;
    for (const auto& obj : scene.objects) local_from_eye.push_back((view * obj.transform.matrix()).inverse());

    HeatmapRender out{Image(width, height, 3), std::vector<double>(npix, std::numeric_limits<double>::quiet_NaN())};
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const auto i = static_cast<std::size_t>(y) * width + x;
            auto* px = out.image.at(x, y);
            if (!std::isfinite(depth[i])) {
                for (int c = 0; c < 3; ++c) px[c] = kBackground[c];
                continue;
            }
            const double d = depth[i];
            const double nx = frustum.left + (x + 0.5) / width * (frustum.right - frustum.left);
            const double ny = frustum.top - (y + 0.5) / height * (frustum.top - frustum.bottom);
            const Vec3 eye(nx * d / frustum.near, ny * d / frustum.near, -d);
            const auto o = obj_id[i];
            const auto t = tri_id[i];
            const Vec3 local = transform_point(local_from_eye[o], eye);
            const auto w = detail::barycentric_of(scene.objects[o].mesh.corners(t), local);
            const auto& ts = meshes[o].triangles[t];
            const std::span<const double> block(map.values[o].data() + ts.sample_offset, ts.sample_count);
            const double v = interpolate_samples(block, static_cast<std::size_t>(ts.resolution), w);
            out.values[i] = v;
            const auto rgb = colormap.lookup(v);
            for (int c = 0; c < 3; ++c) px[c] = static_cast<std::uint8_t>(std::lround(std::clamp(rgb[c], 0.0, 1.0) * 255.0));
        }
    }
    return out;
}

/// Grayscale view of a depth buffer: nearest surface white, farthest dark, empty black.
inline Image depth_to_image(const DepthBuffer& buf) {
    Image img(buf.width, buf.height, 1);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double d : buf.depth) {
        if (std::isfinite(d)) {
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
    }
    const double span = hi > lo ? hi - lo : 1.0;
    for (int y = 0; y < buf.height; ++y) {
        for (int x = 0; x < buf.width; ++x) {
            const double d = buf.at(x, y);
            img.at(x, y)[0] =
                std::isfinite(d) ? static_cast<std::uint8_t>(std::lround(255.0 - 223.0 * (d - lo) / span)) : 0;
        }
    }
    return img;
}

}  // namespace gazemap
