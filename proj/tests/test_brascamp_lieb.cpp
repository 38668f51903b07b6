#include "transconv/brascamp_lieb.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "transconv/generators.hpp"
#include "transconv/rng.hpp"

using namespace transconv;

namespace {

// coordinate projections in R^3: each drops one coordinate
Matrix drop_coordinate(int axis) {
    Matrix a(2, 3);
    int r = 0;
    for (int i = 0; i < 3; ++i)
        if (i != axis) a.row(r++) = Matrix::Identity(3, 3).row(i);
    return a;
}

GridDensity unit_square_indicator() {
    GridDensity g;
    g.origin = Vector::Zero(2);
    g.spacing = Vector::Ones(2);
    g.shape = {1, 1};
    g.values = {1.0};
    g.validate();
    return g;
}

}  // namespace

TEST(RhoWeights, IsometricThirdMap) {
    DimensionSignature sig(3, 2, 2, 2);
    Matrix a3(2, 3);
    a3 << 1, 0, 0, 0, 1, 0;
    auto phi3 = linear_map_on_complex(a3, box_complex(Vector::Constant(3, -1.0), Vector::Ones(3)));
    auto rho = rho_weights(phi3, sig);
    for (double v : rho.rho1) EXPECT_NEAR(v, 1.0, 1e-13);
    for (double v : rho.rho2) EXPECT_NEAR(v, 1.0, 1e-13);
}

TEST(RhoWeights, SingularValuePairCase) {
    // sigma = (1, 2): |A3| = 2, rho1 = 2^{-1/2} * 2 = sqrt(2) = rho2
    DimensionSignature sig(3, 2, 2, 2);
    Matrix a3(2, 3);
    a3 << 1, 0, 0, 0, 2, 0;
    auto phi3 = linear_map_on_complex(a3, box_complex(Vector::Constant(3, -1.0), Vector::Ones(3)));
    auto rho = rho_weights(phi3, sig);
    EXPECT_NEAR(rho.rho1[0], std::sqrt(2.0), 1e-13);
    EXPECT_NEAR(rho.rho2[0], std::sqrt(2.0), 1e-13);
}

TEST(RhoWeights, ProductIdentity) {
    // rho1 * rho2 = |A3|^{-1} * (top n-n1 product) * (top n-n2 product)
    Rng rng(42);
    DimensionSignature sig(4, 3, 3, 2);
    Matrix a3 = rng.normal_matrix(2, 4);
    auto phi3 =
        linear_map_on_complex(a3, box_complex(Vector::Constant(4, -1.0), Vector::Ones(4)));
    auto rho = rho_weights(phi3, sig);
    const Vector s = singular_values(a3);
    const double vol = s.prod();
    double p1 = 1.0, p2 = 1.0;
    for (int j = 2 - (4 - 3); j < 2; ++j) p1 *= s[j];
    for (int j = 2 - (4 - 3); j < 2; ++j) p2 *= s[j];
    EXPECT_NEAR(rho.rho1[0] * rho.rho2[0], p1 * p2 / vol, 1e-12 * std::max(1.0, p1 * p2 / vol));
}

TEST(ExponentIdentity, HoldsForAllAdmissibleSignatures) {
    for (int n = 2; n <= 8; ++n) {
        for (const auto& sig : testutil::admissible_signatures(n)) {
            EXPECT_EQ((sig.n - sig.n1) + (sig.n - sig.n2), sig.n3);
        }
    }
}

TEST(TransversalityWeightsBl, OrthogonalNullSpacesGiveOne) {
    DimensionSignature sig(3, 2, 2, 2);
    auto cells = box_complex(Vector::Constant(3, -1.0), Vector::Ones(3));
    auto phi1 = linear_map_on_complex(drop_coordinate(0), cells);
    auto phi2 = linear_map_on_complex(drop_coordinate(1), cells);
    auto phi3 = linear_map_on_complex(drop_coordinate(2), cells);
    auto w = transversality_weights(phi1, phi2, phi3, sig);
    EXPECT_NEAR(w.gamma0, 1.0, 1e-9);
    EXPECT_NEAR(w.rho, 1.0, 1e-12);
    EXPECT_TRUE(w.certified);
}

TEST(TransversalityWeightsBl, SupDominatesUnrotatedDeterminant) {
    Rng rng(43);
    DimensionSignature sig(3, 2, 2, 2);
    for (int trial = 0; trial < 5; ++trial) {
        auto maps = bl_linear_maps(rng, sig, 0.2);
        auto cells = box_complex(Vector::Constant(3, -1.0), Vector::Ones(3));
        auto phi1 = linear_map_on_complex(maps[0], cells);
        auto phi2 = linear_map_on_complex(maps[1], cells);
        auto phi3 = linear_map_on_complex(maps[2], cells);
        auto w = transversality_weights(phi1, phi2, phi3, sig);
        const double unrotated = frame_triple_det(null_frame(maps[0]).columns(),
                                                  null_frame(maps[1]).columns(),
                                                  null_frame(maps[2]).columns());
        EXPECT_GE(w.gamma0 + 1e-10, unrotated);
        EXPECT_LE(w.gamma0, 1.0 + 1e-12);
    }
}

TEST(TransversalityWeightsBl, DisjointImagesRestrictToDiagonalPairs) {
    // complex of two far-apart simplices mapping to disjoint image polytopes
    DimensionSignature sig(3, 2, 2, 2);
    Matrix cell_a(3, 4), cell_b(3, 4);
    cell_a << 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1;
    cell_b = cell_a;
    cell_b.row(0).array() += 50.0;

    Matrix a1 = drop_coordinate(0), a2 = drop_coordinate(1), a3 = drop_coordinate(2);
    std::vector<Matrix> cells{cell_a, cell_b};
    std::vector<Matrix> m1(2, a1), m2(2, a2), m3(2, a3);
    std::vector<Vector> off(2, Vector::Zero(2));
    PiecewiseLinearMap phi1(2, cells, m1, off), phi2(2, cells, m2, off), phi3(2, cells, m3, off);
    auto w = transversality_weights(phi1, phi2, phi3, sig);
    EXPECT_EQ(w.admissible_pairs, 2u);  // (a,a) and (b,b) only
}

TEST(TransversalityWeightsBl, InvariantUnderCommonRotation) {
    Rng rng(45);
    DimensionSignature sig(3, 2, 2, 2);
    auto maps = bl_linear_maps(rng, sig, 0.2);
    auto cells = box_complex(Vector::Constant(3, -1.0), Vector::Ones(3));
    auto base = transversality_weights(linear_map_on_complex(maps[0], cells),
                                       linear_map_on_complex(maps[1], cells),
                                       linear_map_on_complex(maps[2], cells), sig);
    Matrix q = testutil::random_rotation(rng, 3);
    // pre-composition with Q: cells pull back by Q^T, matrices become A Q
    std::vector<Matrix> qcells;
    for (const auto& c : cells) qcells.push_back(q.transpose() * c);
    auto rot = transversality_weights(linear_map_on_complex(maps[0] * q, qcells),
                                      linear_map_on_complex(maps[1] * q, qcells),
                                      linear_map_on_complex(maps[2] * q, qcells), sig);
    EXPECT_NEAR(rot.gamma0, base.gamma0, 1e-8);
    EXPECT_NEAR(rot.rho, base.rho, 1e-10);
}

TEST(TransversalityWeightsBl, NonSpanningThrows) {
    DimensionSignature sig(3, 2, 2, 2);
    auto cells = box_complex(Vector::Constant(3, -1.0), Vector::Ones(3));
    auto phi1 = linear_map_on_complex(drop_coordinate(0), cells);
    auto phi3 = linear_map_on_complex(drop_coordinate(2), cells);
    EXPECT_THROW(transversality_weights(phi1, phi1, phi3, sig), NonSpanning);
}

TEST(TransversalityWeightsBl, AscentPathForHigherRotationDim) {
    // signature (2,3,3) in R^4 gives n3 = 3: the sup uses projected ascent
    Rng rng(47);
    DimensionSignature sig(4, 2, 3, 3);
    auto maps = bl_linear_maps(rng, sig, 0.15);
    auto cells = box_complex(Vector::Constant(4, -1.0), Vector::Ones(4));
    auto w = transversality_weights(linear_map_on_complex(maps[0], cells),
                                    linear_map_on_complex(maps[1], cells),
                                    linear_map_on_complex(maps[2], cells), sig);
    EXPECT_FALSE(w.certified);
    const double unrotated = frame_triple_det(null_frame(maps[0]).columns(),
                                              null_frame(maps[1]).columns(),
                                              null_frame(maps[2]).columns());
    EXPECT_GE(w.gamma0 + 1e-9, unrotated);
    EXPECT_LE(w.gamma0, 1.0 + 1e-12);
}

TEST(BlIntegral, ZeroDensityGivesZero) {
    auto cells = box_complex(Vector::Zero(3), Vector::Ones(3));
    auto phi1 = linear_map_on_complex(drop_coordinate(0), cells);
    auto phi2 = linear_map_on_complex(drop_coordinate(1), cells);
    auto phi3 = linear_map_on_complex(drop_coordinate(2), cells);
    auto zero = [](const Vector&) { return 0.0; };
    auto one = [](const Vector&) { return 1.0; };
    auto integral = bl_integral(zero, one, one, phi1, phi2, phi3, 2);
    EXPECT_DOUBLE_EQ(integral.value, 0.0);
}

TEST(BlIntegral, CoordinateProjectionsUnitSquares) {
    auto cells = box_complex(Vector::Zero(3), Vector::Ones(3));
    auto phi1 = linear_map_on_complex(drop_coordinate(0), cells);
    auto phi2 = linear_map_on_complex(drop_coordinate(1), cells);
    auto phi3 = linear_map_on_complex(drop_coordinate(2), cells);
    auto ind = unit_square_indicator();
    auto integral =
        bl_integral(ind.as_function(), ind.as_function(), ind.as_function(), phi1, phi2, phi3, 2);
    EXPECT_NEAR(integral.value, 1.0, 1e-12);
    EXPECT_TRUE(integral.converged);
}

TEST(BlIntegral, ParallelepipedIndicatorsIntegrateToGamma) {
    // the weighted integral of the dual-basis parallelepiped indicators is
    // gamma; cross-checked here by quadrature and by rejection sampling
    Rng rng(49);
    DimensionSignature sig(3, 2, 2, 2);
    auto maps = bl_linear_maps(rng, sig, 0.5);
    auto eq = check_linear_bl_equality(maps[0], maps[1], maps[2]);

    auto frames = linear_triple_frames(maps[0], maps[1], maps[2]);
    Matrix v(3, 3);
    v << frames.v[0].columns(), frames.v[1].columns(), frames.v[2].columns();

    std::array<Eigen::PartialPivLU<Matrix>, 3> lu{
        Eigen::PartialPivLU<Matrix>(eq.image_edges[0]),
        Eigen::PartialPivLU<Matrix>(eq.image_edges[1]),
        Eigen::PartialPivLU<Matrix>(eq.image_edges[2])};
    auto indicator = [&](int i) {
        return [&, i](const Vector& w) {
            const Vector y = lu[i].solve(w);
            for (int a = 0; a < y.size(); ++a)
                if (y[a] < -1e-12 || y[a] > 1.0 + 1e-12) return 0.0;
            return 1.0;
        };
    };

    // quadrature over a box holding the unit dual cube
    Aabb xbox = Aabb::of_points(v * (Matrix(3, 8) << 0, 1, 0, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1, 0, 1,
                                     1, 0, 0, 0, 1, 0, 1, 1, 1)
                                        .finished());
    xbox.lo.array() -= 1e-9;
    xbox.hi.array() += 1e-9;
    auto cells = box_complex(xbox.lo, xbox.hi);
    auto phi1 = linear_map_on_complex(maps[0], cells);
    auto phi2 = linear_map_on_complex(maps[1], cells);
    auto phi3 = linear_map_on_complex(maps[2], cells);
    auto integral =
        bl_integral(indicator(0), indicator(1), indicator(2), phi1, phi2, phi3, 4);
    const double weight = std::sqrt(gramian(maps[0]) * gramian(maps[1]) * gramian(maps[2]));
    EXPECT_NEAR(integral.value / weight, eq.gamma, 0.05 * eq.gamma);

    // rejection-sampling oracle at 4 sigma
    const double box_vol = (xbox.hi - xbox.lo).prod();
    const int samples = 400000;
    int hits = 0;
    for (int s = 0; s < samples; ++s) {
        Vector x(3);
        for (int a = 0; a < 3; ++a) x[a] = rng.uniform(xbox.lo[a], xbox.hi[a]);
        if (indicator(0)(maps[0] * x) > 0.0 && indicator(1)(maps[1] * x) > 0.0 &&
            indicator(2)(maps[2] * x) > 0.0)
            ++hits;
    }
    const double p = static_cast<double>(hits) / samples;
    const double mc = box_vol * p;
    const double sigma = box_vol * std::sqrt(p * (1 - p) / samples);
    EXPECT_NEAR(mc, eq.gamma, 4.0 * sigma + 1e-6);
}

TEST(LinearBlEquality, CoordinateProjectionsUnitCubes) {
    auto eq = check_linear_bl_equality(drop_coordinate(0), drop_coordinate(1), drop_coordinate(2));
    EXPECT_NEAR(eq.gamma, 1.0, 1e-14);
    EXPECT_NEAR(eq.lhs, 1.0, 1e-13);
    EXPECT_NEAR(eq.rhs, 1.0, 1e-13);
    EXPECT_LT(eq.rel_gap, 1e-12);
}

TEST(LinearBlEquality, RandomTriplesReachEquality) {
    Rng rng(51);
    for (int n : {3, 4}) {
        for (const auto& sig : testutil::admissible_signatures(n)) {
            for (int trial = 0; trial < 5; ++trial) {
                auto maps = bl_linear_maps(rng, sig, 0.1);
                auto eq = check_linear_bl_equality(maps[0], maps[1], maps[2]);
                EXPECT_LT(eq.rel_gap, 1e-8)
                    << "n=" << n << " sig=(" << sig.n1 << "," << sig.n2 << "," << sig.n3 << ")";
            }
        }
    }
}

TEST(LinearBlCheck, RandomDensitiesStrictInequality) {
    Rng rng(53);
    DimensionSignature sig(3, 2, 2, 2);
    auto maps = bl_linear_maps(rng, sig, 0.3);
    Aabb box;
    box.lo = Vector::Constant(2, -1.0);
    box.hi = Vector::Ones(2);
    auto f1 = random_grid_density(rng, box, 3);
    auto f2 = random_grid_density(rng, box, 3);
    auto f3 = random_grid_density(rng, box, 3);
    auto check = check_linear_bl(maps[0], maps[1], maps[2], f1, f2, f3, 4);
    EXPECT_TRUE(check.pass);
    EXPECT_LT(check.lhs, check.rhs);  // strict for generic densities
    EXPECT_TRUE(check.integral.converged);
}

TEST(NonlinearBlCheck, GloballyLinearCase) {
    Rng rng(55);
    DimensionSignature sig(3, 2, 2, 2);
    auto maps = bl_linear_maps(rng, sig, 0.3);
    BlScenario s;
    s.sig = sig;
    s.cells = box_complex(Vector::Constant(3, -1.0), Vector::Ones(3));
    s.a1 = maps[0];
    s.a2 = maps[1];
    s.a3_left = s.a3_right = maps[2];
    s.bend = Vector::Zero(2);
    auto phi1 = s.phi(1), phi2 = s.phi(2), phi3 = s.phi(3);
    Aabb box;
    box.lo = Vector::Constant(2, -2.0);
    box.hi = Vector::Constant(2, 2.0);
    auto f = random_grid_density(rng, box, 4);
    auto check = check_nonlinear_bl(phi1, phi2, phi3, f, f, f, sig, 2);
    EXPECT_TRUE(check.pass);
    // both constants are reported on linear cases
    EXPECT_GT(check.bound_constant, 0.0);
    auto frames = linear_triple_frames(maps[0], maps[1], maps[2]);
    EXPECT_GE(check.weights.gamma0 + 1e-10, frames.gamma);
}

TEST(NonlinearBlCheck, TwoCellBentThirdMap) {
    Rng rng(57);
    DimensionSignature sig(3, 2, 2, 2);
    auto s = bl_pl_scenario(rng, sig);
    auto check = check_nonlinear_bl(s.phi(1), s.phi(2), s.phi(3), s.f1, s.f2, s.f3, sig, 2);
    EXPECT_TRUE(check.pass);
    EXPECT_TRUE(check.weights.certified);
    EXPECT_GT(check.weights.admissible_pairs, 0u);
}

TEST(NonlinearBlCheck, ZeroDensitiesPass) {
    Rng rng(59);
    DimensionSignature sig(3, 2, 2, 2);
    auto s = bl_pl_scenario(rng, sig);
    GridDensity zero = s.f1;
    std::fill(zero.values.begin(), zero.values.end(), 0.0);
    auto check = check_nonlinear_bl(s.phi(1), s.phi(2), s.phi(3), zero, s.f2, s.f3, sig, 2);
    EXPECT_DOUBLE_EQ(check.lhs, 0.0);
    EXPECT_TRUE(check.pass);
}
