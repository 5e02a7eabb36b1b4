#include "support/scenes.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace gazemap;
using namespace gazemap::testing;

namespace {

const FrustumParams kView = symmetric_frustum(0.9, 1.0, 0.1, 50.0);

std::array<std::uint8_t, 3> pixel(const Image& img, int x, int y) {
    const auto* p = img.at(x, y);
    return {p[0], p[1], p[2]};
}

// Index of the pixel with the largest interpolated value (first on ties).
std::size_t argmax_pixel(const HeatmapRender& r) {
    std::size_t best = 0;
    double best_v = -1.0;
    for (std::size_t i = 0; i < r.values.size(); ++i) {
        if (std::isfinite(r.values[i]) && r.values[i] > best_v) {
            best_v = r.values[i];
            best = i;
        }
    }
    return best;
}

}  // namespace

TEST(ColorMap, HeatStops) {
    const auto m = ColorMap::heat();
    EXPECT_EQ(m.lookup(0.0), (Rgb{0, 0, 1}));
    EXPECT_EQ(m.lookup(1.0), (Rgb{1, 0, 0}));
    EXPECT_EQ(m.lookup(2.0), (Rgb{1, 0, 0}));
    const auto mid = m.lookup(0.5);
    EXPECT_NEAR(mid[0], 0.5, 1e-12);
    EXPECT_NEAR(mid[1], 1.0, 1e-12);
    EXPECT_NEAR(mid[2], 0.0, 1e-12);
    EXPECT_NEAR(ColorMap::heat(0.5).scaled(0.25), 0.5, 1e-15);
}

TEST(ColorMap, ParseAndValidate) {
    const auto m = parse_colormap("# gray\n0 0 0 0\n0.5 128 128 128\n1 255 255 255\n", 2.0);
    EXPECT_EQ(m.stops.size(), 3u);
    EXPECT_EQ(m.gamma, 2.0);
    EXPECT_NEAR(m.lookup(1.0)[0], 1.0, 1e-15);
    EXPECT_THROW(parse_colormap("0 0 0 0\n0.5 1 1 1\n"), ConfigError);
    EXPECT_THROW(parse_colormap("0 0 0 0\n0.5 1 1 1\n0.5 2 2 2\n1 3 3 3\n"), ConfigError);
    EXPECT_THROW(parse_colormap("0 0 0 0\n1 300 0 0\n"), ParseError);
    EXPECT_THROW(parse_colormap("0 0 0\n1 0 0 0\n"), ParseError);
    EXPECT_THROW(parse_colormap("0 0 0 0\n1 1 1 1\n", 0.0), ConfigError);
}

TEST(InterpolateSamples, ReproducesLinearFields) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t r : {1u, 2u, 5u, 13u}) {
        const double a = u(rng), b = u(rng), c = u(rng);
        std::vector<double> block(samples_for_resolution(r));
        for (std::size_t i = 0; i < block.size(); ++i) {
            const auto rc = sample_index_to_rowcol(i);
            const auto w = rowcol_to_barycentric(rc.row, rc.col, r);
            block[i] = a * w.w1 + b * w.w2 + c * w.w3;
        }
        for (int k = 0; k < 500; ++k) {
            double w1 = u(rng), w2 = u(rng);
            if (w1 + w2 > 1) {
                w1 = 1 - w1;
                w2 = 1 - w2;
            }
            const Barycentric w{w1, w2, 1 - w1 - w2};
            EXPECT_NEAR(interpolate_samples(block, r, w), a * w.w1 + b * w.w2 + c * w.w3, 1e-12);
        }
        // Grid points return their own sample.
        for (std::size_t i = 0; i < block.size(); ++i) {
            const auto rc = sample_index_to_rowcol(i);
            EXPECT_NEAR(interpolate_samples(block, r, rowcol_to_barycentric(rc.row, rc.col, r)), block[i], 1e-12);
        }
    }
}

TEST(RenderHeatmap, AllZeroMapIsLowestStop) {
    const auto scene = two_quads_scene(2);
    const auto meshes = build_sampled_meshes(scene, 200.0);
    const auto map = DensityMap::zeros(meshes);
    const auto out = render_heatmap(scene, meshes, map, CameraPose{}, symmetric_frustum(1.6), ColorMap::heat(), 64, 64);
    std::size_t geometry = 0, background = 0;
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            const auto c = pixel(out.image, x, y);
            if (std::isfinite(out.values[y * 64 + x])) {
                ++geometry;
                EXPECT_EQ(c, (std::array<std::uint8_t, 3>{0, 0, 255}));
            } else {
                ++background;
                EXPECT_EQ(c, kBackground);
            }
        }
    }
    EXPECT_GT(geometry, 0u);
    EXPECT_GT(background, 0u);
}

TEST(RenderHeatmap, SingleMaximalSampleIsHottestPixel) {
    Scene s;
    s.objects.push_back(make_object("wall", make_quad_z(0, 0, -2, 1, 1, 4)));
    const auto meshes = build_sampled_meshes(s, 400.0);
    auto map = DensityMap::zeros(meshes);
    // The on-axis vertex is duplicated in every triangle touching it; mark every copy.
    for (std::size_t i = 0; i < meshes[0].total_samples; ++i) {
        if (meshes[0].local_positions[i].head<2>().norm() < 1e-12) map.values[0][i] = 1.0;
    }
    map.global_max = 1.0;
    map.normalized = true;
    const int res = 101;  // odd, so the optical axis hits the center of pixel (50, 50)
    const auto out = render_heatmap(s, meshes, map, CameraPose{}, kView, ColorMap::heat(), res, res);
    EXPECT_EQ(argmax_pixel(out), static_cast<std::size_t>(50 * res + 50));
    EXPECT_EQ(pixel(out.image, 50, 50), (std::array<std::uint8_t, 3>{255, 0, 0}));
    for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
            if (x != 50 || y != 50) {
                EXPECT_NE(pixel(out.image, x, y), (std::array<std::uint8_t, 3>{255, 0, 0}));
            }
        }
    }
}

TEST(RenderHeatmap, GammaKeepsArgmaxAndChangesMidRange) {
    const auto scene = stacked_quads_scene();
    const auto meshes = build_sampled_meshes(scene, 1500.0);
    auto map = generate(scene, meshes, random_fixations(CameraPose{}, symmetric_frustum(1.2), 6, 0.2, 15),
                        [] {
                            GenerationConfig c;
                            c.k = 1500;
                            c.theta = 0.06;
                            c.workers = 1;
                            return c;
                        }());
    normalize(map);
    const auto fr = symmetric_frustum(1.2);
    const auto g1 = render_heatmap(scene, meshes, map, CameraPose{}, fr, ColorMap::heat(1.0), 160, 160);
    const auto g5 = render_heatmap(scene, meshes, map, CameraPose{}, fr, ColorMap::heat(0.5), 160, 160);
    const auto g3 = render_heatmap(scene, meshes, map, CameraPose{}, fr, ColorMap::heat(3.0), 160, 160);
    EXPECT_EQ(argmax_pixel(g1), argmax_pixel(g5));
    EXPECT_EQ(argmax_pixel(g1), argmax_pixel(g3));
    std::size_t differing_mid = 0;
    for (std::size_t i = 0; i < g1.values.size(); ++i) {
        const double v = g1.values[i];
        if (std::isfinite(v) && v > 0.2 && v < 0.8) {
            differing_mid += g1.image.pixels[3 * i + 0] != g5.image.pixels[3 * i + 0] ||
                             g1.image.pixels[3 * i + 1] != g5.image.pixels[3 * i + 1] ||
                             g1.image.pixels[3 * i + 2] != g5.image.pixels[3 * i + 2];
        }
    }
    EXPECT_GT(differing_mid, 0u);
}

TEST(RenderHeatmap, PeakPixelCarriesHottestColor) {
    const auto scene = challenging_scene();
    const auto meshes = build_sampled_meshes(scene, 600.0);
    const auto cam = look_at(Vec3(0, 0.3, 0.5), Vec3(0, -0.5, -4));
    const auto fr = symmetric_frustum(1.0, 1.3);
    for (int trial = 0; trial < 4; ++trial) {
        const auto fixations = random_fixations(cam, fr, 1, 0.25, 100 + trial);
        GenerationConfig cfg;
        cfg.k = 600;
        cfg.theta = 0.08;
        cfg.workers = 1;
        auto map = normalized(generate(scene, meshes, fixations, cfg));
        if (map.global_max == 0.0) continue;
        const auto out = render_heatmap(scene, meshes, map, cam, fr, ColorMap::heat(0.7), 200, 160);
        const auto best = argmax_pixel(out);
        // The interpolated field never exceeds its samples, and the peak pixel carries the hottest color.
        EXPECT_LE(out.values[best], 1.0 + 1e-12);
        const auto at_best = pixel(out.image, static_cast<int>(best % 200), static_cast<int>(best / 200));
        for (std::size_t i = 0; i < out.values.size(); ++i) {
            if (!std::isfinite(out.values[i])) continue;
            const auto* p = out.image.pixels.data() + 3 * i;
            // Hotter = further along blue -> green -> yellow -> red.
            auto heat = [](int r, int g, int b) { return b > 0 ? g - b : (r < 255 ? 255 + r : 510 + 255 - g); };
            EXPECT_LE(heat(p[0], p[1], p[2]), heat(at_best[0], at_best[1], at_best[2]));
        }
    }
}

TEST(RenderHeatmap, DeterministicBytes) {
    const auto scene = challenging_scene();
    const auto meshes = build_sampled_meshes(scene, 500.0);
    auto map = DensityMap::zeros(meshes);
    for (auto& v : map.values) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>((i * 7919) % 101) / 100.0;
    }
    map.global_max = 1.0;
    map.normalized = true;
    const auto cam = look_at(Vec3(0, 0.3, 0.5), Vec3(0, -0.5, -4));
    const auto fr = symmetric_frustum(1.0, 1.3);
    const auto a = render_heatmap(scene, meshes, map, cam, fr, ColorMap::heat(), 120, 90, 1);
    const auto b = render_heatmap(scene, meshes, map, cam, fr, ColorMap::heat(), 120, 90, 8);
    EXPECT_EQ(a.image.pixels, b.image.pixels);
    const auto dir = scratch_dir("render");
    write_png(dir / "a.png", a.image);
    write_png(dir / "b.png", b.image);
    const auto bytes = read_file(dir / "a.png");
    EXPECT_EQ(bytes, read_file(dir / "b.png"));
    EXPECT_EQ(bytes.substr(1, 3), "PNG");
    EXPECT_THROW(write_png("/nonexistent-dir/x.png", a.image), IoError);
}

TEST(RenderHeatmap, CameraInsideGeometry) {
    const auto scene = sphere_in_box_scene();
    const auto meshes = build_sampled_meshes(scene, 200.0);
    const auto map = DensityMap::zeros(meshes);
    // Camera inside the sphere: renders its inner faces without error.
    const auto cam = look_at(Vec3(0.2, -0.2, -3), Vec3(0.2, -0.2, -4));
    EXPECT_NO_THROW(render_heatmap(scene, meshes, map, cam, symmetric_frustum(1.0), ColorMap::heat(), 32, 32));
}
