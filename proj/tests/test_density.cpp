#include "support/scenes.hpp"

#include <gtest/gtest.h>

using namespace gazemap;
using namespace gazemap::testing;

namespace {

GenerationConfig small_config(double k = 2000.0) {
    GenerationConfig cfg;
    cfg.k = k;
    cfg.theta = 0.05;
    cfg.zbuffer_resolution = 256;
    cfg.workers = 1;
    return cfg;
}

const FrustumParams kView = symmetric_frustum(1.2, 1.0, 0.1, 50.0);

void expect_equal_maps(const DensityMap& a, const DensityMap& b) {
    ASSERT_EQ(a.values.size(), b.values.size());
    for (std::size_t o = 0; o < a.values.size(); ++o) EXPECT_EQ(a.values[o], b.values[o]) << o;
    EXPECT_EQ(a.global_max, b.global_max);
}

}  // namespace

TEST(GenerationConfig, Validation) {
    GenerationConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.k = -1;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.theta = 2.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.zbuffer_resolution = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.epsilon_abs = -1e-3;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Generate, ZeroFixations) {
    const auto scene = two_quads_scene(2);
    const auto meshes = build_sampled_meshes(scene, 500.0);
    const auto map = generate(scene, meshes, {}, small_config());
    EXPECT_EQ(map.global_max, 0.0);
    EXPECT_EQ(map.total_samples(), meshes[0].total_samples + meshes[1].total_samples);
    EXPECT_EQ(map.scan_max(), 0.0);
}

TEST(Generate, ConeMissingAnObjectLeavesItUnchanged) {
    Scene s;
    s.objects.push_back(make_object("left", make_quad_z(-1.5, 0, -3, 1, 1, 2)));
    s.objects.push_back(make_object("right", make_quad_z(1.5, 0, -3, 1, 1, 2)));
    const auto meshes = build_sampled_meshes(s, 3000.0);
    const auto fx = fixation_at(CameraPose{}, kView, Vec3(-1.5, 0, -3));
    for (bool filtering : {true, false}) {
        auto cfg = small_config();
        cfg.filtering_enabled = filtering;
        const auto map = generate(s, meshes, {fx}, cfg);
        EXPECT_GT(map.global_max, 0.0);
        for (double v : map.values[1]) EXPECT_EQ(v, 0.0);
    }
}

TEST(Generate, OnAxisSampleValue) {
    Scene s;
    // Tiny 2x2 grid whose middle vertex (hence a sample) sits on the optical axis.
    s.objects.push_back(make_object("target", make_quad_z(0, 0, -2, 0.02, 0.02, 2)));
    s.objects.push_back(make_object("behind", make_quad_z(0, 0, -3, 1, 1, 6)));
    const auto meshes = build_sampled_meshes(s, 1.0);
    Fixation fx;
    fx.duration = 1.0;
    fx.frustum = kView;
    fx.gaze_dir = -Vec3::UnitZ();
    auto cfg = small_config(1.0);
    cfg.zbuffer_resolution = 1024;
    const auto map = generate(s, meshes, {fx}, cfg);
    const double expected = 1.0 / (std::tan(0.05) * std::sqrt(2 * std::numbers::pi));
    std::size_t on_axis = 0;
    for (std::size_t t = 0; t < meshes[0].triangles.size(); ++t) {
        const auto& ts = meshes[0].triangles[t];
        for (std::size_t k = 0; k < ts.sample_count; ++k) {
            const Vec3 p = meshes[0].local_positions[ts.sample_offset + k];
            if (p.head<2>().norm() < 1e-15) {
                ++on_axis;
                EXPECT_NEAR(map.values[0][ts.sample_offset + k], expected, 1e-12);
            }
        }
    }
    EXPECT_GT(on_axis, 0u);
    EXPECT_NEAR(map.global_max, expected, 1e-12);
    EXPECT_NEAR(expected, 7.9724, 5e-4);
    const auto world = oracle::WorldTriangles::build(s);
    for (std::size_t i = 0; i < meshes[1].total_samples; ++i) {
        if (!oracle::ray_visible(world, Vec3::Zero(), meshes[1].local_positions[i])) {
            EXPECT_EQ(map.values[1][i], 0.0);
        }
    }
}

TEST(Generate, RepeatedFixationDoublesExactly) {
    const auto scene = stacked_quads_scene();
    const auto meshes = build_sampled_meshes(scene, 3000.0);
    const auto fx = fixation_at(CameraPose{}, kView, Vec3(-0.1, 0.1, -2), 0.4);
    const auto cfg = small_config();
    const auto once = generate(scene, meshes, {fx}, cfg);
    const auto twice = generate(scene, meshes, {fx, fx}, cfg);
    for (std::size_t o = 0; o < once.values.size(); ++o) {
        for (std::size_t i = 0; i < once.values[o].size(); ++i) {
            ASSERT_EQ(twice.values[o][i], 2.0 * once.values[o][i]);
        }
    }
    EXPECT_EQ(twice.global_max, 2.0 * once.global_max);
}

TEST(Generate, MaxMatchesFullScan) {
    const auto scene = challenging_scene();
    const auto meshes = build_sampled_meshes(scene, 1500.0);
    const auto cam = look_at(Vec3(0, 0.3, 0.5), Vec3(0, -0.5, -4));
    const auto fixations = random_fixations(cam, symmetric_frustum(1.0, 1.3), 25, 0.3, 77);
    for (unsigned w : {1u, 2u, 8u}) {
        auto cfg = small_config();
        cfg.workers = w;
        const auto map = generate(scene, meshes, fixations, cfg);
        EXPECT_GT(map.global_max, 0.0);
        EXPECT_EQ(map.global_max, map.scan_max());
    }
}

TEST(Generate, BitIdenticalAcrossWorkerCounts) {
    const auto scene = challenging_scene();
    const auto meshes = build_sampled_meshes(scene, 1500.0);
    const auto cam = look_at(Vec3(0, 0.3, 0.5), Vec3(0, -0.5, -4));
    const auto fixations = random_fixations(cam, symmetric_frustum(1.0, 1.3), 20, 0.3, 5);
    for (bool filtering : {true, false}) {
        auto cfg = small_config();
        cfg.filtering_enabled = filtering;
        cfg.workers = 1;
        const auto base = generate(scene, meshes, fixations, cfg);
        for (unsigned w : {2u, 8u}) {
            cfg.workers = w;
            expect_equal_maps(base, generate(scene, meshes, fixations, cfg));
        }
    }
}

TEST(Generate, AdditiveOverPartitions) {
    const auto scene = sphere_in_box_scene();
    const auto meshes = build_sampled_meshes(scene, 1000.0);
    const auto fixations = random_fixations(CameraPose{}, kView, 12, 0.25, 9);
    const auto cfg = small_config();
    const auto all = generate(scene, meshes, fixations, cfg);
    const std::vector<Fixation> first(fixations.begin(), fixations.begin() + 5);
    const std::vector<Fixation> second(fixations.begin() + 5, fixations.end());
    const auto a = generate(scene, meshes, first, cfg);
    const auto b = generate(scene, meshes, second, cfg);
    for (std::size_t o = 0; o < all.values.size(); ++o) {
        for (std::size_t i = 0; i < all.values[o].size(); ++i) {
            const double sum = a.values[o][i] + b.values[o][i];
            ASSERT_NEAR(all.values[o][i], sum, 1e-9 * std::max(1.0, std::abs(sum)));
        }
    }
}

TEST(Generate, FilteredMatchesUnfiltered) {
    const auto scene = sphere_in_box_scene();
    const auto meshes = build_sampled_meshes(scene, 1500.0);
    const auto fixations = random_fixations(CameraPose{}, kView, 10, 0.3, 31);
    auto cfg = small_config();
    cfg.zbuffer_resolution = 1024;
    const auto filtered = generate(scene, meshes, fixations, cfg);
    cfg.filtering_enabled = false;
    const auto unfiltered = generate(scene, meshes, fixations, cfg);
    std::size_t total = 0, agree = 0, nonzero = 0;
    for (std::size_t o = 0; o < filtered.values.size(); ++o) {
        for (std::size_t i = 0; i < filtered.values[o].size(); ++i) {
            const double x = filtered.values[o][i], y = unfiltered.values[o][i];
            ++total;
            nonzero += x > 0;
            agree += std::abs(x - y) <= 1e-6 * std::max(std::abs(x), std::abs(y));
        }
    }
    EXPECT_GT(nonzero, 100u);
    EXPECT_GE(static_cast<double>(agree) / total, 0.999);
}

TEST(Generate, FallsBackWhenConeLeavesNearPlane) {
    Scene s;
    s.objects.push_back(make_object("side", make_grid(Vec3(2, -1, 1), Vec3(0, 0, -4), Vec3(0, 2, 0), 4, 4)));
    const auto meshes = build_sampled_meshes(s, 500.0);
    Fixation fx;
    fx.duration = 0.5;
    fx.frustum = symmetric_frustum(3.0, 1.0, 0.1, 50.0);  // very wide view
    const double tilt = std::numbers::pi / 2 - 0.12;
    fx.gaze_dir = Vec3(std::sin(tilt), 0, -std::cos(tilt));
    auto cfg = small_config();
    PhaseTimings timings;
    const auto filtered = generate(s, meshes, {fx}, cfg, {nullptr, &timings});
    EXPECT_EQ(timings.fallback_fixations, 1u);
    EXPECT_EQ(timings.filtered_fixations, 0u);
    cfg.filtering_enabled = false;
    expect_equal_maps(filtered, generate(s, meshes, {fx}, cfg));
}

TEST(Generate, OverridesApplyPerFixation) {
    Scene s;
    s.objects.push_back(make_object("mover", make_quad_z(0, 0, -3, 0.5, 0.5, 2)));
    const auto meshes = build_sampled_meshes(s, 2000.0);
    Fixation fx;
    fx.duration = 0.3;
    fx.frustum = kView;
    fx.gaze_dir = -Vec3::UnitZ();
    Fixation moved = fx;
    ObjectOverride ov;
    ov.object_id = "mover";
    ov.transform.translation = Vec3(5, 0, 0);  // out of the cone
    moved.overrides.push_back(ov);
    const auto cfg = small_config();
    const auto base = generate(s, meshes, {fx}, cfg);
    const auto away = generate(s, meshes, {moved}, cfg);
    EXPECT_GT(base.global_max, 0.0);
    EXPECT_EQ(away.global_max, 0.0);
    // The override does not leak into later fixations.
    const auto both = generate(s, meshes, {moved, fx}, cfg);
    expect_equal_maps(base, both);

    moved.overrides[0].object_id = "ghost";
    EXPECT_THROW(generate(s, meshes, {moved}, cfg), Error);
}

TEST(Generate, IncludeListStillOccludes) {
    const auto scene = two_quads_scene(2);
    const auto meshes = build_sampled_meshes(scene, 2000.0);
    const auto fx = fixation_at(CameraPose{}, kView, Vec3(0, 0, -2));
    auto cfg = small_config();
    cfg.object_include_list = std::vector<std::string>{"back"};
    const auto map = generate(scene, meshes, {fx}, cfg);
    for (double v : map.values[0]) EXPECT_EQ(v, 0.0);
    // Back quad is hidden where the cone lands.
    for (double v : map.values[1]) EXPECT_EQ(v, 0.0);
    cfg.object_include_list = std::vector<std::string>{};
    EXPECT_EQ(generate(scene, meshes, {fx}, cfg).global_max, 0.0);
}

TEST(Generate, TimeWindowAndProgress) {
    const auto scene = two_quads_scene(2);
    const auto meshes = build_sampled_meshes(scene, 1000.0);
    auto fixations = random_fixations(CameraPose{}, kView, 8, 0.2, 2);  // start times 0, 0.25, ...
    auto cfg = small_config();
    cfg.time_window = {0.5, 1.0};
    std::vector<std::size_t> seen;
    const auto windowed =
        generate(scene, meshes, fixations, cfg, {[&](std::size_t done, std::size_t total) {
                     EXPECT_EQ(total, fixations.size());
                     seen.push_back(done);
                 }});
    EXPECT_EQ(seen.size(), fixations.size());
    EXPECT_EQ(seen.back(), fixations.size());
    cfg.time_window = {};
    const std::vector<Fixation> subset = {fixations[2], fixations[3]};
    expect_equal_maps(windowed, generate(scene, meshes, subset, cfg));
}

TEST(Normalize, Examples) {
    DensityMap m;
    m.values = {{2.0, 4.0}, {8.0}};
    m.global_max = 8.0;
    normalize(m);
    EXPECT_EQ(m.values, (std::vector<std::vector<double>>{{0.25, 0.5}, {1.0}}));
    EXPECT_TRUE(m.normalized);
    const auto again = normalized(m);
    EXPECT_EQ(again.values, m.values);

    DensityMap z;
    z.values = {{0.0, 0.0}};
    normalize(z);
    EXPECT_EQ(z.values[0], (std::vector<double>{0.0, 0.0}));
    EXPECT_TRUE(z.normalized);
}

TEST(Normalize, GeneratedMapReachesOne) {
    const auto scene = stacked_quads_scene();
    const auto meshes = build_sampled_meshes(scene, 2000.0);
    const auto fixations = random_fixations(CameraPose{}, kView, 6, 0.2, 4);
    auto map = generate(scene, meshes, fixations, small_config());
    normalize(map);
    EXPECT_EQ(map.scan_max(), 1.0);
    for (const auto& v : map.values) {
        for (double x : v) {
            EXPECT_GE(x, 0.0);
            EXPECT_LE(x, 1.0);
        }
    }
    const auto copy = map.values;
    normalize(map);
    EXPECT_EQ(map.values, copy);
}
