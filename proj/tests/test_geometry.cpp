#include "support/scenes.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace gazemap;
using namespace gazemap::testing;

namespace {

// Row-major enumeration of the triangular grid, independent of the closed form.
std::vector<RowCol> enumerate_grid(std::size_t r) {
    std::vector<RowCol> out;
    for (std::size_t row = 0; row <= r; ++row) {
        for (std::size_t col = 0; col <= row; ++col) out.push_back({row, col});
    }
    return out;
}

}  // namespace

TEST(TriangleArea, Examples) {
    EXPECT_DOUBLE_EQ(triangle_area({0, 0, 0}, {1, 0, 0}, {0, 1, 0}), 0.5);
    EXPECT_EQ(triangle_area({0, 0, 0}, {2, 0, 0}, {1, 0, 0}), 0.0);
    const Vec3 a(0, 0, 0), b(1, 0, 0), c(0.5, 0.866025, 0);
    const double cross = 0.5 * (b - a).cross(c - a).norm();
    EXPECT_NEAR(triangle_area(a, b, c), cross, 1e-12);
    EXPECT_NEAR(triangle_area(a, b, c), 0.433013, 1e-6);
}

TEST(TriangleArea, NeverNegativeOnDegenerates) {
    EXPECT_EQ(triangle_area({1, 1, 1}, {1, 1, 1}, {1, 1, 1}), 0.0);
    EXPECT_GE(triangle_area({0, 0, 0}, {1e-9, 0, 0}, {2e-9, 1e-30, 0}), 0.0);
}

TEST(TriangleArea, AgreesWithCrossProduct) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 10000; ++i) {
        const Vec3 a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng)), c(u(rng), u(rng), u(rng));
        const double cross = 0.5 * (b - a).cross(c - a).norm();
        EXPECT_NEAR(triangle_area(a, b, c), cross, 1e-9 * cross) << i;
    }
}

TEST(AdaptiveResolution, Examples) {
    EXPECT_EQ(adaptive_resolution(0.5, 6), 1);
    EXPECT_EQ(adaptive_resolution(0.0, 40000), 1);
    EXPECT_EQ(adaptive_resolution(0.01, 10000), 13);
    EXPECT_GE(samples_for_resolution(13) / 0.01, 10000.0);
    EXPECT_LT(samples_for_resolution(12) / 0.01, 10000.0);
}

TEST(AdaptiveResolution, RejectsNonPositiveK) {
    EXPECT_THROW(adaptive_resolution(1.0, 0.0), ConfigError);
    EXPECT_THROW(adaptive_resolution(1.0, -3.0), ConfigError);
}

TEST(AdaptiveResolution, DegenerateTriangleGetsMinimum) { EXPECT_EQ(adaptive_resolution(1e-13, 1e9), 1); }

TEST(AdaptiveResolution, DensityBoundProperty) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> area(1e-4, 2.0);
    for (double k : {100.0, 10000.0, 40000.0, 80000.0}) {
        for (int i = 0; i < 2000; ++i) {
            const double a = area(rng);
            if (1.0 + 8.0 * k * a < 25.0) continue;
            const auto r = adaptive_resolution(a, k);
            const double density = samples_for_resolution(static_cast<std::size_t>(r)) / a;
            EXPECT_GE(density, k);
            EXPECT_LE(density, 2.0 * k);
        }
    }
}

TEST(SampleIndex, Examples) {
    EXPECT_EQ(sample_index_to_rowcol(0), (RowCol{0, 0}));
    EXPECT_EQ(sample_index_to_rowcol(3), (RowCol{2, 0}));
    EXPECT_EQ(sample_index_to_rowcol(5), (RowCol{2, 2}));
}

TEST(SampleIndex, RoundTripAgainstEnumeration) {
    for (std::size_t r = 1; r <= 100; ++r) {
        const auto grid = enumerate_grid(r);
        ASSERT_EQ(grid.size(), samples_for_resolution(r));
        for (std::size_t idx = 0; idx < grid.size(); ++idx) {
            const auto rc = sample_index_to_rowcol(idx);
            ASSERT_EQ(rc, grid[idx]) << "r=" << r << " idx=" << idx;
            ASSERT_EQ(rowcol_to_sample_index(rc.row, rc.col), idx);
        }
    }
}

TEST(SampleIndex, LargeIndicesStayConsistent) {
    for (std::size_t row : {100000ul, 3000000ul, 90000000ul}) {
        const std::size_t first = row * (row + 1) / 2;
        EXPECT_EQ(sample_index_to_rowcol(first), (RowCol{row, 0}));
        EXPECT_EQ(sample_index_to_rowcol(first + row), (RowCol{row, row}));
        EXPECT_EQ(sample_index_to_rowcol(first - 1), (RowCol{row - 1, row - 1}));
    }
}

TEST(Barycentric, CornerExamples) {
    auto eq = [](Barycentric w, double a, double b, double c) {
        EXPECT_DOUBLE_EQ(w.w1, a);
        EXPECT_DOUBLE_EQ(w.w2, b);
        EXPECT_DOUBLE_EQ(w.w3, c);
    };
    eq(rowcol_to_barycentric(0, 0, 2), 0, 0, 1);
    eq(rowcol_to_barycentric(2, 2, 2), 1, 0, 0);
    eq(rowcol_to_barycentric(2, 0, 2), 0, 1, 0);
}

TEST(Barycentric, OutOfRangeThrows) {
    EXPECT_THROW(rowcol_to_barycentric(3, 0, 2), IndexError);
    EXPECT_THROW(rowcol_to_barycentric(1, 2, 2), IndexError);
    EXPECT_THROW(rowcol_to_barycentric(0, 0, 0), IndexError);
}

TEST(Barycentric, WeightsAreValidEverywhere) {
    for (std::size_t r = 1; r <= 100; ++r) {
        for (const auto& rc : enumerate_grid(r)) {
            const auto w = rowcol_to_barycentric(rc.row, rc.col, r);
            ASSERT_NEAR(w.w1 + w.w2 + w.w3, 1.0, 1e-12);
            for (double x : {w.w1, w.w2, w.w3}) {
                ASSERT_GE(x, 0.0);
                ASSERT_LE(x, 1.0);
            }
        }
    }
}

TEST(BuildSampledMesh, SingleSmallTriangleHasThreeSamples) {
    Mesh m;
    m.vertices = {{0, 0, 0}, {0.01, 0, 0}, {0, 0.01, 0}};
    m.triangles = {{0, 1, 2}};
    const auto sm = build_sampled_mesh("t", m, 100.0);
    EXPECT_EQ(sm.total_samples, 3u);
    EXPECT_EQ(sm.triangles[0].resolution, 1);
}

TEST(BuildSampledMesh, IdenticalTrianglesGetEqualResolution) {
    Mesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 5, 5}, {6, 5, 5}, {5, 6, 5}};
    m.triangles = {{0, 1, 2}, {3, 4, 5}};
    const auto sm = build_sampled_mesh("t", m, 500.0);
    EXPECT_EQ(sm.triangles[0].resolution, sm.triangles[1].resolution);
    EXPECT_GT(sm.triangles[0].resolution, 1);
}

TEST(BuildSampledMesh, CubeAtTinyDensity) {
    const auto cube = make_box(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
    ASSERT_EQ(cube.triangles.size(), 12u);
    const auto sm = build_sampled_mesh("cube", cube, 1e-3);
    EXPECT_EQ(sm.total_samples, 36u);
}

TEST(BuildSampledMesh, EmptyMesh) {
    const auto sm = build_sampled_mesh("empty", Mesh{}, 40000.0);
    EXPECT_EQ(sm.total_samples, 0u);
    EXPECT_TRUE(sm.triangles.empty());
}

TEST(BuildSampledMesh, OffsetsArePrefixSums) {
    const auto mesh = make_uv_sphere(0.5, 16, 8);
    const auto sm = build_sampled_mesh("s", mesh, 20000.0);
    std::size_t expect = 0;
    for (const auto& t : sm.triangles) {
        EXPECT_EQ(t.sample_offset, expect);
        EXPECT_EQ(t.sample_count, samples_for_resolution(static_cast<std::size_t>(t.resolution)));
        EXPECT_GE(t.sample_count, 3u);
        expect += t.sample_count;
    }
    EXPECT_EQ(sm.total_samples, expect);
    EXPECT_EQ(sm.local_positions.size(), expect);
}

TEST(SampleWorldPosition, CornerMatchesVertex) {
    Mesh m;
    m.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 2, 0}};
    m.triangles = {{0, 1, 2}};
    const auto obj = make_object("t", m);
    const auto sm = build_sampled_mesh("t", m, 1.0);  // r = 1
    EXPECT_TRUE(sample_world_position(obj, sm, 0, 0).isApprox(m.vertices[2]));
    EXPECT_TRUE(sample_world_position(obj, sm, 0, 1).isApprox(m.vertices[1]));
    EXPECT_TRUE(sample_world_position(obj, sm, 0, 2).isApprox(m.vertices[0]));
}

TEST(SampleWorldPosition, TranslationIsAffine) {
    Mesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    m.triangles = {{0, 1, 2}};
    Transform tr;
    tr.translation = Vec3(3, -1, 2);
    const auto obj = make_object("t", m, tr);
    const auto sm = build_sampled_mesh("t", m, 1.0);
    for (std::size_t s = 0; s < 3; ++s) {
        const Vec3 local = sample_local_position(obj, sm, 0, s);
        EXPECT_TRUE(sample_world_position(obj, sm, 0, s).isApprox(local + tr.translation));
    }
}

TEST(SampleWorldPosition, EdgeMidpointAtResolutionTwo) {
    Mesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    m.triangles = {{0, 1, 2}};
    const auto obj = make_object("t", m);
    // Area 0.5 with k = 12: delta = 49, r = 2.
    const auto sm = build_sampled_mesh("t", m, 12.0);
    ASSERT_EQ(sm.triangles[0].resolution, 2);
    const auto w = sample_barycentric(sm, 0, 1);  // (row 1, col 0)
    EXPECT_DOUBLE_EQ(w.w1, 0.0);
    EXPECT_DOUBLE_EQ(w.w2, 0.5);
    EXPECT_DOUBLE_EQ(w.w3, 0.5);
    EXPECT_TRUE(sample_world_position(obj, sm, 0, 1).isApprox(0.5 * (m.vertices[1] + m.vertices[2])));
}

TEST(SampleWorldPosition, InvalidIndexThrows) {
    const auto m = make_quad_z(0, 0, 0, 1, 1);
    const auto obj = make_object("q", m);
    const auto sm = build_sampled_mesh("q", m, 1.0);
    EXPECT_THROW(sample_world_position(obj, sm, 2, 0), IndexError);
    EXPECT_THROW(sample_world_position(obj, sm, 0, 3), IndexError);
}

TEST(Scene, ValidateCatchesBadInput) {
    Scene s;
    s.objects.push_back(make_object("a", make_quad_z(0, 0, 0, 1, 1)));
    s.objects.push_back(make_object("a", make_quad_z(0, 0, 0, 1, 1)));
    EXPECT_THROW(s.validate(), ParseError);
    s.objects[1].object_id = "b";
    EXPECT_NO_THROW(s.validate());
    s.objects[1].mesh.triangles.push_back({0, 1, 99});
    EXPECT_THROW(s.validate(), ParseError);
    s.objects[1].mesh.triangles.pop_back();
    s.objects[1].transform.rotation = Quat(1.1, 0, 0, 0);
    EXPECT_THROW(s.validate(), ParseError);
}
