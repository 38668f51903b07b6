#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "transconv/brascamp_lieb.hpp"
#include "transconv/convolution.hpp"
#include "transconv/linalg.hpp"
#include "transconv/rng.hpp"
#include "transconv/surface.hpp"

namespace transconv {

/// A complete convolution scenario: three surfaces with densities.
struct ConvTriple {
    PolyhedralSurface s1, s2, s3;
    SurfaceDensity f1, f2, f3;
    double gamma = 0.0;  // |det V| of the generating frames where applicable
};

/// Placement of the third surface relative to the first two.
enum class Placement {
    kSum,        // inside supp(f1 * f2): used for convolution-norm runs
    kReflected,  // minus the sum patch: used for trilinear pairing runs
};

namespace gen {

inline Frame random_frame(Rng& rng, int n, int k) {
    return orthonormalized_frame(rng.normal_matrix(n, k));
}

inline Matrix random_rotation(Rng& rng, int n) {
    Matrix a = rng.normal_matrix(n, n);
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ();
    Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < n; ++i)
        if (r(i, i) < 0) q.col(i) *= -1.0;
    if (q.determinant() < 0) q.col(0) *= -1.0;
    return q;
}

inline std::vector<double> random_density_values(Rng& rng, std::size_t count, double lo = 0.2,
                                                 double hi = 1.5) {
    std::vector<double> v(count);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

/// Normal frame triple with |det V| >= min_gamma, by rejection.
inline std::array<Frame, 3> transversal_normals(Rng& rng, const DimensionSignature& sig,
                                                double min_gamma, int max_draws = 100000) {
    for (int draw = 0; draw < max_draws; ++draw) {
        Frame v1 = random_frame(rng, sig.n, sig.codim(1));
        Frame v2 = random_frame(rng, sig.n, sig.codim(2));
        Frame v3 = random_frame(rng, sig.n, sig.codim(3));
        if (frame_triple_det(v1.columns(), v2.columns(), v3.columns()) >= min_gamma)
            return {v1, v2, v3};
    }
    throw ScenarioError("transversal_normals: rejection sampling exhausted");
}

}  // namespace gen

/// Linear scenario whose patches are aligned with the dual basis of the
/// sampled normal frames. With unit densities the convolution ratio equals
/// gamma^{-1/2} exactly, which makes these scenarios the sharpness fixtures:
/// the first surface spans (W2, W3)-directions over [0,1]-windows, the second
/// spans (W1, -W3), and the third surface is the exact image patch (or its
/// reflection, for pairing runs).
inline ConvTriple aligned_linear_scenario(Rng& rng, const DimensionSignature& sig,
                                          Placement placement = Placement::kSum,
                                          double min_gamma = 0.1, double patch_size = 1.0) {
    auto [v1, v2, v3] = gen::transversal_normals(rng, sig, min_gamma);
    DualBasisTriple dual = dual_basis(v1, v2, v3, sig);

    const int n = sig.n;
    Vector c1 = 0.2 * rng.normal_vector(n);
    Vector c2 = 0.2 * rng.normal_vector(n);

    Matrix e1(n, sig.n1);
    e1 << dual.w[1], dual.w[2];
    Matrix e2(n, sig.n2);
    e2 << dual.w[0], -dual.w[2];
    Matrix e3(n, sig.n3);
    e3 << dual.w[0], dual.w[1];

    ConvTriple t;
    t.gamma = dual.gamma;
    t.s1 = box_surface(1, c1, patch_size * e1);
    t.s2 = box_surface(2, c2, patch_size * e2);
    if (placement == Placement::kSum) {
        t.s3 = box_surface(3, c1 + c2, patch_size * e3);
    } else {
        t.s3 = box_surface(3, -(c1 + c2), -patch_size * e3);
    }
    t.f1 = SurfaceDensity::constant(1.0, t.s1.size());
    t.f2 = SurfaceDensity::constant(1.0, t.s2.size());
    t.f3 = SurfaceDensity::constant(1.0, t.s3.size());
    return t;
}

/// Same construction driven by explicit normal frames (used by the sweep
/// family, where the transversality knob is a tilt angle).
inline ConvTriple aligned_linear_from_normals(const Frame& v1, const Frame& v2, const Frame& v3,
                                              const DimensionSignature& sig,
                                              Placement placement = Placement::kSum) {
    DualBasisTriple dual = dual_basis(v1, v2, v3, sig);
    const int n = sig.n;
    Matrix e1(n, sig.n1);
    e1 << dual.w[1], dual.w[2];
    Matrix e2(n, sig.n2);
    e2 << dual.w[0], -dual.w[2];
    Matrix e3(n, sig.n3);
    e3 << dual.w[0], dual.w[1];

    ConvTriple t;
    t.gamma = dual.gamma;
    t.s1 = box_surface(1, Vector::Zero(n), e1);
    t.s2 = box_surface(2, Vector::Zero(n), e2);
    t.s3 = placement == Placement::kSum ? box_surface(3, Vector::Zero(n), e3)
                                        : box_surface(3, Vector::Zero(n), -e3);
    t.f1 = SurfaceDensity::constant(1.0, t.s1.size());
    t.f2 = SurfaceDensity::constant(1.0, t.s2.size());
    t.f3 = SurfaceDensity::constant(1.0, t.s3.size());
    return t;
}

/// Generic linear scenario: random normal frames, tangent-box patches, third
/// surface centered on the sum of the first two centroids, random positive
/// densities. Used for the inequality sweeps where no alignment is wanted.
inline ConvTriple generic_linear_scenario(Rng& rng, const DimensionSignature& sig,
                                          double min_gamma = 0.1) {
    auto [v1, v2, v3] = gen::transversal_normals(rng, sig, min_gamma);
    const int n = sig.n;

    auto patch = [&](int idx, const Frame& normal, const Vector& base, double size) {
        Frame tangent = orthonormal_completion(normal);
        return box_surface(idx, base - 0.5 * size * tangent.columns().rowwise().sum(),
                           size * tangent.columns());
    };
    Vector c1 = 0.2 * rng.normal_vector(n);
    Vector c2 = 0.2 * rng.normal_vector(n);
    ConvTriple t;
    t.gamma = frame_triple_det(v1.columns(), v2.columns(), v3.columns());
    t.s1 = patch(1, v1, c1, 1.0);
    t.s2 = patch(2, v2, c2, 1.0);
    t.s3 = patch(3, v3, c1 + c2, 1.2);
    t.f1 = SurfaceDensity(gen::random_density_values(rng, t.s1.size()));
    t.f2 = SurfaceDensity(gen::random_density_values(rng, t.s2.size()));
    t.f3 = SurfaceDensity(gen::random_density_values(rng, t.s3.size()));
    return t;
}

/// Two-facet roof over the second coordinate: a nonlinear (piecewise-linear)
/// first surface bending across a ridge, flat second and third surfaces, the
/// whole configuration randomly rotated. R^3 with signature (2,2,2).
inline ConvTriple roof_scenario(Rng& rng, double min_gamma = 0.1, int max_draws = 1000) {
    for (int draw = 0; draw < max_draws; ++draw) {
        const double slope = rng.uniform(0.2, 0.8);
        // two triangular wings meeting along the ridge {x=0, y=0.5}:
        // the graph of x = slope * |y - 0.5| over (y,z) triangles
        Matrix tm(3, 3), tp(3, 3);
        tm.col(0) << 0.5 * slope, 0.0, 0.0;
        tm.col(1) << 0.0, 0.5, 0.0;
        tm.col(2) << 0.0, 0.5, 1.0;
        tp.col(0) << 0.5 * slope, 1.0, 0.0;
        tp.col(1) << 0.0, 0.5, 0.0;
        tp.col(2) << 0.0, 0.5, 1.0;
        PolyhedralSurface s1(1, 3, 2, {make_facet(tm), make_facet(tp)});

        // mildly tilted flat patches for the other two surfaces
        auto tilted_patch = [&](int idx, int axis, const Vector& base, double size) {
            Vector normal = Vector::Unit(3, axis) + 0.3 * rng.normal_vector(3);
            normal.normalize();
            Frame nf((Matrix(3, 1) << normal).finished());
            Frame tangent = orthonormal_completion(nf);
            return box_surface(idx, base - 0.5 * size * tangent.columns().rowwise().sum(),
                               size * tangent.columns());
        };
        Vector c1(3), c2(3);
        c1 << 0.25 * slope, 0.5, 0.5;  // roof centroid-ish
        c2 = 0.2 * rng.normal_vector(3);
        PolyhedralSurface s2 = tilted_patch(2, 1, c2, 1.0);
        PolyhedralSurface s3 = tilted_patch(3, 2, c1 + c2, 1.6);

        Matrix q = gen::random_rotation(rng, 3);
        ConvTriple t;
        t.s1 = rotated(s1, q);
        t.s2 = rotated(s2, q);
        t.s3 = rotated(s3, q);
        try {
            t.gamma = transversality_gamma0(t.s1, t.s2, t.s3);
        } catch (const NonTransversal&) {
            continue;
        }
        if (t.gamma < min_gamma) continue;
        t.f1 = SurfaceDensity(gen::random_density_values(rng, t.s1.size()));
        t.f2 = SurfaceDensity(gen::random_density_values(rng, t.s2.size()));
        t.f3 = SurfaceDensity(gen::random_density_values(rng, t.s3.size()));
        return t;
    }
    throw ScenarioError("roof_scenario: rejection sampling exhausted");
}

/// Parameters of one quadratic height function h(u) = 0.5 k |u - c|^2 + g.u + b.
struct QuadraticHeight {
    double curvature = 0.3;
    Vector center;
    Vector grad;
    double offset = 0.0;

    Vector operator()(const Vector& u) const {
        Vector h(1);
        const Vector d = u - center;
        h << 0.5 * curvature * d.squaredNorm() + grad.dot(u) + offset;
        return h;
    }
};

/// Meshed curved-graph scenario in R^3: the surfaces are graphs over the
/// three coordinate planes (so their normals stay near the three axes), each
/// meshed at 2^level cells per axis. The third surface sits on the middle
/// sheet of the sum of the first two, which keeps the interaction nonempty.
inline ConvTriple graph_scenario(Rng& rng, int level, double max_curvature = 0.5,
                                 double min_gamma = 0.1) {
    auto random_height = [&](double lo_curv) {
        QuadraticHeight q;
        q.curvature = rng.uniform(lo_curv, max_curvature);
        q.center = Vector::Constant(2, 0.5) + 0.2 * rng.normal_vector(2);
        q.grad = 0.15 * rng.normal_vector(2);
        q.offset = 0.1 * rng.normal();
        return q;
    };
    const QuadraticHeight h1 = random_height(0.1);
    const QuadraticHeight h2 = random_height(0.1);

    // axis permutations embedding graph coordinates (u, h) into R^3
    Matrix p1(3, 3), p2(3, 3), p3(3, 3);
    p1 << 0, 0, 1, 1, 0, 0, 0, 1, 0;  // (u1,u2,h) -> (h,u1,u2): graph over (y,z)
    p2 << 1, 0, 0, 0, 0, 1, 0, 1, 0;  // (u1,u2,h) -> (u1,h,u2): graph over (x,z)
    p3 = Matrix::Identity(3, 3);      // graph over (x,y)

    const int cells = 1 << level;
    Vector lo = Vector::Zero(2), hi = Vector::Ones(2);
    auto mesh1 = rotated(mesh_graph(1, 3, 2, [&](const Vector& u) { return h1(u); }, lo, hi, cells), p1);
    auto mesh2 = rotated(mesh_graph(2, 3, 2, [&](const Vector& u) { return h2(u); }, lo, hi, cells), p2);

    // middle sheet: z = h1(w/2) + h2(w/2) over a safely reachable window
    auto h3 = [&](const Vector& w) {
        Vector half = 0.5 * w;
        Vector v(1);
        v << h1(half)[0] + h2(half)[0];
        return v;
    };
    Vector lo3 = Vector::Constant(2, 0.55), hi3 = Vector::Constant(2, 0.95);
    auto mesh3 = rotated(mesh_graph(3, 3, 2, h3, lo3, hi3, cells), p3);

    ConvTriple t;
    t.s1 = std::move(mesh1);
    t.s2 = std::move(mesh2);
    t.s3 = std::move(mesh3);
    t.gamma = transversality_gamma0(t.s1, t.s2, t.s3);
    if (t.gamma < min_gamma) throw ScenarioError("graph_scenario: transversality below threshold");
    t.f1 = SurfaceDensity(gen::random_density_values(rng, t.s1.size(), 0.4, 1.2));
    t.f2 = SurfaceDensity(gen::random_density_values(rng, t.s2.size(), 0.4, 1.2));
    t.f3 = SurfaceDensity(gen::random_density_values(rng, t.s3.size(), 0.4, 1.2));
    return t;
}

/// Linear family with an explicit transversality knob: normals e1, e2 and a
/// third normal tilted from e3 toward (e1+e2)/sqrt(2), so |det(N)| equals the
/// cosine of the tilt. Patches are dual-basis aligned, hence extremal.
inline ConvTriple tilted_linear_family(double gamma, Placement placement = Placement::kSum) {
    if (gamma <= 0.0 || gamma > 1.0)
        throw ScenarioError("tilted_linear_family: gamma must lie in (0, 1]");
    const double s = std::sqrt(1.0 - gamma * gamma);
    Matrix n3(3, 1);
    n3 << s / std::sqrt(2.0), s / std::sqrt(2.0), gamma;
    Matrix n1(3, 1), n2(3, 1);
    n1 << 1, 0, 0;
    n2 << 0, 1, 0;
    return aligned_linear_from_normals(Frame(n1), Frame(n2), Frame(n3),
                                       DimensionSignature(3, 2, 2, 2), placement);
}

/// The coordinate-hyperplane base configuration: unit squares on the three
/// coordinate planes with indicator densities; the convolution restricted to
/// the third plane is identically one on the unit square, so the ratio is
/// exactly one.
inline ConvTriple coordinate_fixture(Placement placement = Placement::kSum) {
    Matrix e1(3, 2), e2(3, 2), e3(3, 2);
    e1.col(0) = Vector::Unit(3, 1);
    e1.col(1) = Vector::Unit(3, 2);
    e2.col(0) = Vector::Unit(3, 0);
    e2.col(1) = -Vector::Unit(3, 2);
    e3.col(0) = Vector::Unit(3, 0);
    e3.col(1) = Vector::Unit(3, 1);

    ConvTriple t;
    t.gamma = 1.0;
    t.s1 = box_surface(1, Vector::Zero(3), e1);
    t.s2 = box_surface(2, Vector::Zero(3), e2);
    t.s3 = placement == Placement::kSum ? box_surface(3, Vector::Zero(3), e3)
                                        : box_surface(3, Vector::Zero(3), -e3);
    t.f1 = SurfaceDensity::constant(1.0, t.s1.size());
    t.f2 = SurfaceDensity::constant(1.0, t.s2.size());
    t.f3 = SurfaceDensity::constant(1.0, t.s3.size());
    return t;
}

// ---------------------------------------------------------------------------
// Brascamp-Lieb scenarios
// ---------------------------------------------------------------------------

/// Random full-rank linear triple whose null frames span with margin.
inline std::array<Matrix, 3> bl_linear_maps(Rng& rng, const DimensionSignature& sig,
                                            double min_gamma = 0.1, int max_draws = 100000) {
    for (int draw = 0; draw < max_draws; ++draw) {
        Matrix a1 = rng.normal_matrix(sig.n1, sig.n);
        Matrix a2 = rng.normal_matrix(sig.n2, sig.n);
        Matrix a3 = rng.normal_matrix(sig.n3, sig.n);
        try {
            auto frames = linear_triple_frames(a1, a2, a3, min_gamma);
            (void)frames;
            return {a1, a2, a3};
        } catch (const SingularFrame&) {
        } catch (const RankDeficient&) {
        }
    }
    throw ScenarioError("bl_linear_maps: rejection sampling exhausted");
}

inline GridDensity random_grid_density(Rng& rng, const Aabb& box, int cells_per_axis,
                                       double lo = 0.2, double hi = 1.5) {
    GridDensity g;
    const int d = static_cast<int>(box.lo.size());
    g.origin = box.lo;
    g.spacing = (box.hi - box.lo) / cells_per_axis;
    g.shape.assign(d, cells_per_axis);
    g.values.resize(g.flat_size());
    for (auto& v : g.values) v = rng.uniform(lo, hi);
    g.validate();
    return g;
}

/// A piecewise-linear map triple on a shared two-box complex: the first two
/// maps are globally linear, the third bends across the splitting hyperplane
/// (its matrix gains d * e1^T on the positive side, which keeps the map
/// continuous), plus grid densities over the image boxes.
struct BlScenario {
    DimensionSignature sig;
    std::vector<Matrix> cells;
    Matrix a1, a2, a3_left, a3_right;
    Vector bend;
    GridDensity f1, f2, f3;

    PiecewiseLinearMap phi(int which) const {
        const Matrix& a = which == 1 ? a1 : (which == 2 ? a2 : a3_left);
        std::vector<Matrix> mats;
        std::vector<Vector> offs;
        for (const auto& cell : cells) {
            if (which == 3 && simplex_barycenter(cell)[0] > 0.0)
                mats.push_back(a3_right);
            else
                mats.push_back(a);
            offs.push_back(Vector::Zero(a.rows()));
        }
        return PiecewiseLinearMap(static_cast<int>(a.rows()), cells, std::move(mats),
                                  std::move(offs));
    }
};

inline BlScenario bl_pl_scenario(Rng& rng, const DimensionSignature& sig, double bend_size = 0.4,
                                 double min_gamma = 0.15, int grid_cells = 5,
                                 int max_draws = 2000) {
    for (int draw = 0; draw < max_draws; ++draw) {
        auto maps = bl_linear_maps(rng, sig, min_gamma);
        BlScenario s;
        s.sig = sig;
        Vector lo = Vector::Constant(sig.n, -1.0);
        Vector hi = Vector::Constant(sig.n, 1.0);
        s.cells = split_box_complex(lo, hi, 0.0);
        s.a1 = maps[0];
        s.a2 = maps[1];
        s.a3_left = maps[2];
        s.bend = bend_size * rng.normal_vector(sig.n3);
        s.a3_right = s.a3_left;
        s.a3_right.col(0) += s.bend;

        // the bent half must stay full rank and keep the null spaces spanning
        try {
            auto phi1 = s.phi(1);
            auto phi2 = s.phi(2);
            auto phi3 = s.phi(3);
            const Matrix n1 = null_frame(s.a1).columns();
            const Matrix n2 = null_frame(s.a2).columns();
            for (std::size_t c = 0; c < phi3.cell_count(); ++c) {
                if (frame_triple_det(n1, n2, null_frame(phi3.matrix(c)).columns()) < min_gamma)
                    throw SingularFrame("resample");
            }
            // densities over the image boxes
            auto image_box = [&](const PiecewiseLinearMap& phi) {
                Matrix first = phi.image_vertices(0);
                Aabb box = Aabb::of_points(first);
                for (std::size_t c = 1; c < phi.cell_count(); ++c) {
                    Aabb b = Aabb::of_points(phi.image_vertices(c));
                    box.lo = box.lo.cwiseMin(b.lo);
                    box.hi = box.hi.cwiseMax(b.hi);
                }
                return box;
            };
            s.f1 = random_grid_density(rng, image_box(phi1), grid_cells);
            s.f2 = random_grid_density(rng, image_box(phi2), grid_cells);
            s.f3 = random_grid_density(rng, image_box(phi3), grid_cells);
            return s;
        } catch (const Error&) {
            continue;
        }
    }
    throw ScenarioError("bl_pl_scenario: rejection sampling exhausted");
}

/// Refine the first two surfaces (with densities) of a scenario in place;
/// used before discretized-extremizer runs.
inline ConvTriple refined_scenario(const ConvTriple& t, int level) {
    ConvTriple out;
    out.gamma = t.gamma;
    out.s1 = refine(t.s1, level);
    out.s2 = refine(t.s2, level);
    out.s3 = t.s3;
    out.f1 = refine_density(t.f1, t.s1, level);
    out.f2 = refine_density(t.f2, t.s2, level);
    out.f3 = t.f3;
    return out;
}

}  // namespace transconv
