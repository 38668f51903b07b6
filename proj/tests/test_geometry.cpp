#include "transconv/geometry.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "transconv/lp.hpp"
#include "transconv/rng.hpp"

using namespace transconv;

TEST(SimplexVolume, UnitRightTriangle) {
    Matrix v(2, 3);
    v.col(0) << 0, 0;
    v.col(1) << 1, 0;
    v.col(2) << 0, 1;
    EXPECT_DOUBLE_EQ(simplex_volume(v), 0.5);
}

TEST(SimplexVolume, UnitSegment) {
    Matrix v(1, 2);
    v << 0, 1;
    EXPECT_DOUBLE_EQ(simplex_volume(v), 1.0);
}

TEST(SimplexVolume, MatchesRejectionSampling) {
    Rng rng(5);
    Matrix v = rng.normal_matrix(2, 3);
    const double vol = simplex_volume(v);
    auto hs = simplex_halfspaces(v);
    Aabb box = Aabb::of_points(v);
    const int samples = 200000;
    int hits = 0;
    for (int s = 0; s < samples; ++s) {
        Vector x(2);
        for (int j = 0; j < 2; ++j) x[j] = rng.uniform(box.lo[j], box.hi[j]);
        if (point_in_halfspaces(hs, x, 0.0)) ++hits;
    }
    const double box_vol = (box.hi - box.lo).prod();
    const double mc = box_vol * hits / samples;
    EXPECT_NEAR(mc, vol, 0.01 * vol);
}

TEST(BarycentricSubdivide, TriangleGivesSixEqualParts) {
    Matrix v(2, 3);
    v.col(0) << 0, 0;
    v.col(1) << 1, 0;
    v.col(2) << 0, 1;
    auto children = barycentric_subdivide(v);
    ASSERT_EQ(children.size(), 6u);
    double total = 0.0;
    for (const auto& c : children) {
        EXPECT_NEAR(simplex_volume(c), 0.5 / 6.0, 1e-14);
        total += simplex_volume(c);
    }
    EXPECT_NEAR(total, 0.5, 1e-13);
}

TEST(EdgewiseSubdivide, CountsAndVolume) {
    Rng rng(13);
    for (int d : {1, 2, 3}) {
        Matrix v = rng.normal_matrix(d, d + 1);
        const double vol = simplex_volume(v);
        for (int m : {2, 4}) {
            auto children = edgewise_subdivide(v, m);
            EXPECT_EQ(children.size(), static_cast<std::size_t>(std::pow(m, d)));
            double total = 0.0;
            for (const auto& c : children) total += simplex_volume(c);
            EXPECT_NEAR(total, vol, 1e-12 * std::max(1.0, vol));
        }
    }
}

TEST(MidpointRule, NodesInsideAndWeightsSum) {
    Rng rng(17);
    Matrix v = rng.normal_matrix(2, 3);
    auto hs = simplex_halfspaces(v);
    auto rule = midpoint_rule(v, 2);
    EXPECT_EQ(rule.nodes.size(), 16u);
    for (const auto& x : rule.nodes) EXPECT_TRUE(point_in_halfspaces(hs, x, 1e-12));
    EXPECT_NEAR(rule.weight * rule.nodes.size(), simplex_volume(v), 1e-12);
}

TEST(Halfspaces, ClassifyPoints) {
    Matrix v(2, 3);
    v.col(0) << 0, 0;
    v.col(1) << 1, 0;
    v.col(2) << 0, 1;
    auto hs = simplex_halfspaces(v);
    EXPECT_TRUE(point_in_halfspaces(hs, Eigen::Vector2d(0.2, 0.2), 1e-12));
    EXPECT_FALSE(point_in_halfspaces(hs, Eigen::Vector2d(0.8, 0.8), 1e-12));
    EXPECT_FALSE(point_in_halfspaces(hs, Eigen::Vector2d(-0.1, 0.2), 1e-12));
}

TEST(ClipPolygon, SquareByHalfplane) {
    Polygon square{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
    EXPECT_DOUBLE_EQ(polygon_area(square), 4.0);
    auto clipped = clip_polygon(square, Eigen::Vector2d(1, 0), 0.0);  // x <= 0
    EXPECT_NEAR(polygon_area(clipped), 2.0, 1e-14);
    auto empty = clip_polygon(clipped, Eigen::Vector2d(1, 0), -2.0);
    EXPECT_DOUBLE_EQ(polygon_area(empty), 0.0);
}

TEST(ClipInterval, Basic) {
    std::vector<std::pair<double, double>> rows{{1.0, 0.5}, {-1.0, 0.25}};  // t <= 0.5, t >= -0.25
    auto iv = clip_interval(rows, 10.0);
    EXPECT_NEAR(iv.lo, -0.25, 1e-14);
    EXPECT_NEAR(iv.hi, 0.5, 1e-14);
    rows.push_back({1.0, -1.0});
    EXPECT_TRUE(clip_interval(rows, 10.0).empty());
}

TEST(LinearFeasible, SmallSystems) {
    Matrix a(1, 2);
    a << 1, 1;
    Vector b(1);
    b << 1;
    EXPECT_TRUE(linear_feasible(a, b));

    b << -1;
    EXPECT_FALSE(linear_feasible(a, b));

    Matrix a2(2, 2);
    a2 << 1, -1, 1, 1;
    Vector b2(2);
    b2 << 0, 2;
    EXPECT_TRUE(linear_feasible(a2, b2));

    Matrix a3(2, 1);
    a3 << 1, 1;
    Vector b3(2);
    b3 << 1, 2;
    EXPECT_FALSE(linear_feasible(a3, b3));
}

TEST(SumMeets, SegmentsOnLine) {
    // [0,1] + [0,1] meets [1.5, 3] but not [2.5, 3]
    Matrix p(1, 2), q(1, 2), r(1, 2);
    p << 0, 1;
    q << 0, 1;
    r << 1.5, 3.0;
    EXPECT_TRUE(sum_meets(p, q, r));
    r << 2.5, 3.0;
    EXPECT_FALSE(sum_meets(p, q, r));
}

TEST(PolytopesIntersect, Triangles) {
    Matrix p(2, 3), q(2, 3);
    p.col(0) << 0, 0;
    p.col(1) << 1, 0;
    p.col(2) << 0, 1;
    q = p;
    q.row(0).array() += 0.5;
    EXPECT_TRUE(polytopes_intersect(p, q));
    q.row(0).array() += 2.0;
    EXPECT_FALSE(polytopes_intersect(p, q));
}

TEST(SampleSimplex, StaysInside) {
    Rng rng(29);
    Matrix v = rng.normal_matrix(3, 4);
    auto hs = simplex_halfspaces(v);
    for (int s = 0; s < 500; ++s) {
        Vector x = sample_simplex(rng, v);
        EXPECT_TRUE(point_in_halfspaces(hs, x, 1e-10));
    }
}

TEST(McHalfspaceVolume, UnitBoxCorner) {
    // {t in [-1,1]^3 : t_i <= 0} has volume 1
    std::vector<std::pair<Vector, double>> rows;
    for (int i = 0; i < 3; ++i) {
        Vector g = Vector::Zero(3);
        g[i] = 1.0;
        rows.push_back({g, 0.0});
    }
    Rng rng(31);
    auto v = mc_halfspace_volume(rows, 3, 1.0, rng, 100000);
    EXPECT_NEAR(v.value, 1.0, 4.0 * v.stderr_ + 1e-9);
}
