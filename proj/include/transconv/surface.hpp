#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "transconv/config.hpp"
#include "transconv/errors.hpp"
#include "transconv/geometry.hpp"
#include "transconv/linalg.hpp"
#include "transconv/lp.hpp"
#include "transconv/parallel.hpp"

namespace transconv {

/// One flat simplicial piece of a polyhedral surface: an affine d-simplex in
/// R^n carried by a base point, a tangent frame and the complementary normal
/// frame. The domain simplex lives in tangent coordinates, so refining or
/// clipping never leaves the facet's affine span.
class Facet {
public:
    Facet(Vector base, Frame tangent, Frame normal, Matrix domain,
          const Tolerances& tol = default_tolerances())
        : base_(std::move(base)),
          tangent_(std::move(tangent)),
          normal_(std::move(normal)),
          domain_(std::move(domain)) {
        const int n = static_cast<int>(base_.size());
        const int d = tangent_.rank();
        if (tangent_.ambient_dim() != n || normal_.ambient_dim() != n ||
            normal_.rank() != n - d)
            throw ScenarioError("Facet: frame shapes inconsistent with ambient dimension");
        const double ortho =
            (tangent_.columns().transpose() * normal_.columns()).cwiseAbs().maxCoeff();
        if (ortho > tol.frame_orthonormality * 10)
            throw ScenarioError("Facet: tangent and normal frames not mutually orthogonal");
        if (domain_.rows() != d || domain_.cols() != d + 1)
            throw ScenarioError("Facet: domain must be a d-simplex in tangent coordinates");
        volume_ = simplex_volume(domain_);
        if (volume_ <= tol.facet_degeneracy)
            throw DegenerateFacet("Facet: domain simplex volume " + std::to_string(volume_));
        halfspaces_ = simplex_halfspaces(domain_);
        aabb_ = Aabb::of_points(ambient_vertices());
    }

    const Vector& base() const { return base_; }
    const Frame& tangent() const { return tangent_; }
    const Frame& normal() const { return normal_; }
    const Matrix& domain() const { return domain_; }
    int ambient_dim() const { return static_cast<int>(base_.size()); }
    int dim() const { return tangent_.rank(); }
    double volume() const { return volume_; }
    const std::vector<Halfspace>& domain_halfspaces() const { return halfspaces_; }
    const Aabb& aabb() const { return aabb_; }

    Vector ambient_point(const Vector& u) const { return base_ + tangent_.columns() * u; }
    Vector tangent_coords(const Vector& x) const {
        return tangent_.columns().transpose() * (x - base_);
    }
    Matrix ambient_vertices() const {
        Matrix v(ambient_dim(), domain_.cols());
        for (int j = 0; j < domain_.cols(); ++j) v.col(j) = ambient_point(domain_.col(j));
        return v;
    }

    /// Whether an ambient point lies on the facet (span membership plus
    /// domain membership), within the given slack.
    bool contains(const Vector& x, double tol) const {
        const Vector rel = x - base_;
        if ((normal_.columns().transpose() * rel).cwiseAbs().maxCoeff() > tol) return false;
        return point_in_halfspaces(halfspaces_, tangent_.columns().transpose() * rel, tol);
    }

private:
    Vector base_;
    Frame tangent_;
    Frame normal_;
    Matrix domain_;
    double volume_ = 0.0;
    std::vector<Halfspace> halfspaces_;
    Aabb aabb_;
};

/// d-volume of the facet's domain simplex.
inline double facet_volume(const Facet& f) { return f.volume(); }

/// Builds a facet from d+1 ambient vertices (one per column): the tangent
/// frame comes from a thin QR of the edge matrix, the normal frame from the
/// orthogonal complement.
inline Facet make_facet(const Matrix& ambient_vertices,
                        const Tolerances& tol = default_tolerances()) {
    const int n = static_cast<int>(ambient_vertices.rows());
    const int d = static_cast<int>(ambient_vertices.cols()) - 1;
    Matrix edges(n, d);
    for (int j = 0; j < d; ++j) edges.col(j) = ambient_vertices.col(j + 1) - ambient_vertices.col(0);
    Frame tangent = orthonormalized_frame(edges);
    Frame normal = orthonormal_completion(tangent);
    Matrix domain(d, d + 1);
    for (int j = 0; j <= d; ++j)
        domain.col(j) = tangent.columns().transpose() * (ambient_vertices.col(j) - ambient_vertices.col(0));
    return Facet(ambient_vertices.col(0), std::move(tangent), std::move(normal), std::move(domain),
                 tol);
}

/// A finite union of flat simplicial facets of one dimension in R^n.
struct PolyhedralSurface {
    int sig_index = 1;  // which of the three surfaces this is (1, 2 or 3)
    int n = 0;
    int dim = 0;
    std::vector<Facet> facets;

    PolyhedralSurface() = default;
    PolyhedralSurface(int sig_index_, int n_, int dim_, std::vector<Facet> facets_)
        : sig_index(sig_index_), n(n_), dim(dim_), facets(std::move(facets_)) {
        for (const auto& f : facets) {
            if (f.ambient_dim() != n || f.dim() != dim)
                throw ScenarioError("PolyhedralSurface: facet dimensions disagree");
        }
    }

    std::size_t size() const { return facets.size(); }

    double total_measure() const {
        double s = 0.0;
        for (const auto& f : facets) s += f.volume();
        return s;
    }

    Aabb aabb() const {
        Aabb box = facets.at(0).aabb();
        for (const auto& f : facets) {
            box.lo = box.lo.cwiseMin(f.aabb().lo);
            box.hi = box.hi.cwiseMax(f.aabb().hi);
        }
        return box;
    }

    /// Pairwise interior-overlap validation. Quadratic in the facet count;
    /// intended for the desk-scale surfaces that enter by file.
    void check_disjoint_interiors(double delta = 1e-7) const {
        for (std::size_t a = 0; a < facets.size(); ++a) {
            for (std::size_t b = a + 1; b < facets.size(); ++b) {
                if (!facets[a].aabb().intersects(facets[b].aabb(), 0.0)) continue;
                if (polytopes_overlap_interior(facets[a].ambient_vertices(),
                                               facets[b].ambient_vertices(), delta))
                    throw ScenarioError("PolyhedralSurface: facets " + std::to_string(a) + " and " +
                                        std::to_string(b) + " have overlapping interiors");
            }
        }
    }
};

/// Piecewise-constant nonnegative density, one value per facet.
struct SurfaceDensity {
    std::vector<double> values;

    SurfaceDensity() = default;
    explicit SurfaceDensity(std::vector<double> v) : values(std::move(v)) {
        for (double x : values)
            if (!(x >= 0.0) || !std::isfinite(x))
                throw ScenarioError("SurfaceDensity: values must be finite and nonnegative");
    }
    static SurfaceDensity constant(double v, std::size_t count) {
        return SurfaceDensity(std::vector<double>(count, v));
    }
};

/// L2 norm of a density against the surface measure: sqrt(sum v^2 * volume).
inline double l2_norm(const SurfaceDensity& f, const PolyhedralSurface& s) {
    if (f.values.size() != s.facets.size())
        throw ScenarioError("l2_norm: density and surface facet counts differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i)
        acc += f.values[i] * f.values[i] * s.facets[i].volume();
    return std::sqrt(acc);
}

/// Uniform transversality constant: the minimum over all facet triples of
/// |det(N1,N2,N3)| built from the facets' normal frames. Normals are constant
/// per facet, so the infimum over points is attained on facets.
inline double transversality_gamma0(const PolyhedralSurface& s1, const PolyhedralSurface& s2,
                                    const PolyhedralSurface& s3,
                                    double det_floor = default_tolerances().det_floor,
                                    int threads = 1) {
    const std::size_t c1 = s1.size(), c2 = s2.size(), c3 = s3.size();
    const std::size_t total = c1 * c2 * c3;
    double best = std::numeric_limits<double>::infinity();

    if (s1.n == 3 && s1.dim == 2 && s2.dim == 2 && s3.dim == 2) {
        // codimension-1 fast path: det(n1,n2,n3) = (n1 x n2) . n3
        std::vector<Eigen::Vector3d> nv1(c1), nv2(c2), nv3(c3);
        for (std::size_t i = 0; i < c1; ++i) nv1[i] = s1.facets[i].normal().columns().col(0);
        for (std::size_t i = 0; i < c2; ++i) nv2[i] = s2.facets[i].normal().columns().col(0);
        for (std::size_t i = 0; i < c3; ++i) nv3[i] = s3.facets[i].normal().columns().col(0);
        best = parallel_min(c1 * c2, threads, best, [&](std::size_t k) {
            const Eigen::Vector3d cross = nv1[k / c2].cross(nv2[k % c2]);
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t i3 = 0; i3 < c3; ++i3) m = std::min(m, std::abs(cross.dot(nv3[i3])));
            return m;
        });
    } else {
        best = parallel_min(total, threads, best, [&](std::size_t k) {
            const std::size_t i1 = k / (c2 * c3);
            const std::size_t i2 = (k / c3) % c2;
            const std::size_t i3 = k % c3;
            return frame_triple_det(s1.facets[i1].normal().columns(),
                                    s2.facets[i2].normal().columns(),
                                    s3.facets[i3].normal().columns());
        });
    }
    if (best < det_floor)
        throw NonTransversal("transversality_gamma0: minimum determinant " + std::to_string(best) +
                             " below floor");
    return best;
}

/// Refined transversality constant: the minimum is restricted to facet
/// combinations that actually interact through the sum constraint. For each
/// third-surface facet F3 the feasible pairs {x in Fa, y in Fb, x+y in F3}
/// are found by linear programming; the quadruple structure collapses to the
/// product of the per-F3 projections, and the determinant is evaluated on
/// both constituent triples. An interaction-free configuration is reported
/// through the empty_interaction flag with an infinite value rather than an
/// error.
struct RefinedGamma {
    double value = std::numeric_limits<double>::infinity();
    bool empty_interaction = true;
};

inline RefinedGamma refined_gamma0(const PolyhedralSurface& s1, const PolyhedralSurface& s2,
                                   const PolyhedralSurface& s3,
                                   double det_floor = default_tolerances().det_floor,
                                   double lp_tol = default_tolerances().lp_feasibility,
                                   int threads = 1) {
    const std::size_t c1 = s1.size(), c2 = s2.size(), c3 = s3.size();
    std::vector<Aabb> sum_boxes;
    sum_boxes.reserve(c1 * c2);
    for (std::size_t a = 0; a < c1; ++a)
        for (std::size_t b = 0; b < c2; ++b)
            sum_boxes.push_back(s1.facets[a].aabb().sum(s2.facets[b].aabb()));

    std::vector<double> per_f3(c3, std::numeric_limits<double>::infinity());
    std::vector<char> any_feasible(c3, 0);

    parallel_chunks(c3, threads, c3, [&](std::size_t, std::size_t begin, std::size_t end) {
        std::vector<char> in_a(c1), in_b(c2);
        for (std::size_t c = begin; c < end; ++c) {
            const Facet& f3 = s3.facets[c];
            std::fill(in_a.begin(), in_a.end(), 0);
            std::fill(in_b.begin(), in_b.end(), 0);
            bool feasible = false;
            for (std::size_t a = 0; a < c1; ++a) {
                for (std::size_t b = 0; b < c2; ++b) {
                    if (in_a[a] && in_b[b]) continue;
                    if (!sum_boxes[a * c2 + b].intersects(f3.aabb(), lp_tol)) continue;
                    if (sum_meets(s1.facets[a].ambient_vertices(), s2.facets[b].ambient_vertices(),
                                  f3.ambient_vertices(), lp_tol)) {
                        in_a[a] = 1;
                        in_b[b] = 1;
                        feasible = true;
                    }
                }
            }
            if (!feasible) continue;
            any_feasible[c] = 1;
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < c1; ++a) {
                if (!in_a[a]) continue;
                for (std::size_t b = 0; b < c2; ++b) {
                    if (!in_b[b]) continue;
                    m = std::min(m, frame_triple_det(s1.facets[a].normal().columns(),
                                                     s2.facets[b].normal().columns(),
                                                     f3.normal().columns()));
                }
            }
            per_f3[c] = m;
        }
    });

    RefinedGamma out;
    for (std::size_t c = 0; c < c3; ++c) {
        if (any_feasible[c]) {
            out.empty_interaction = false;
            out.value = std::min(out.value, per_f3[c]);
        }
    }
    if (!out.empty_interaction && out.value < det_floor)
        throw NonTransversal("refined_gamma0: minimum determinant " + std::to_string(out.value) +
                             " below floor");
    return out;
}

/// Barycentric refinement: every facet is subdivided `level` times. The
/// union of facets and the total measure are preserved exactly; frames are
/// inherited, only domain simplices change.
inline PolyhedralSurface refine(const PolyhedralSurface& s, int level) {
    if (level < 1) throw ScenarioError("refine: level must be >= 1");
    PolyhedralSurface out;
    out.sig_index = s.sig_index;
    out.n = s.n;
    out.dim = s.dim;
    for (const auto& f : s.facets) {
        std::vector<Matrix> domains{f.domain()};
        for (int l = 0; l < level; ++l) {
            std::vector<Matrix> next;
            next.reserve(domains.size() * 24);
            for (const auto& d : domains) {
                auto children = barycentric_subdivide(d);
                next.insert(next.end(), children.begin(), children.end());
            }
            domains.swap(next);
        }
        for (auto& d : domains)
            out.facets.emplace_back(f.base(), f.tangent(), f.normal(), std::move(d));
    }
    return out;
}

/// Number of children each facet acquires under `refine(s, level)`.
inline std::size_t refine_children_per_facet(int dim, int level) {
    std::size_t per = 1;
    const std::size_t f = static_cast<std::size_t>(factorial(dim + 1));
    for (int l = 0; l < level; ++l) per *= f;
    return per;
}

/// Density compatible with a refined surface: parent values replicated onto
/// their children, which leaves the L2 norm unchanged.
inline SurfaceDensity refine_density(const SurfaceDensity& f, const PolyhedralSurface& original,
                                     int level) {
    const std::size_t per = refine_children_per_facet(original.dim, level);
    std::vector<double> values;
    values.reserve(f.values.size() * per);
    for (double v : f.values)
        for (std::size_t c = 0; c < per; ++c) values.push_back(v);
    return SurfaceDensity(std::move(values));
}

// ---------------------------------------------------------------------------
// Rigid motions and scaling (used by generators and property tests)
// ---------------------------------------------------------------------------

inline PolyhedralSurface translated(const PolyhedralSurface& s, const Vector& v) {
    PolyhedralSurface out;
    out.sig_index = s.sig_index;
    out.n = s.n;
    out.dim = s.dim;
    for (const auto& f : s.facets)
        out.facets.emplace_back(f.base() + v, f.tangent(), f.normal(), f.domain());
    return out;
}

inline PolyhedralSurface rotated(const PolyhedralSurface& s, const Matrix& q) {
    PolyhedralSurface out;
    out.sig_index = s.sig_index;
    out.n = s.n;
    out.dim = s.dim;
    for (const auto& f : s.facets)
        out.facets.emplace_back(q * f.base(), Frame(q * f.tangent().columns()),
                                Frame(q * f.normal().columns()), f.domain());
    return out;
}

inline PolyhedralSurface scaled(const PolyhedralSurface& s, double lambda) {
    PolyhedralSurface out;
    out.sig_index = s.sig_index;
    out.n = s.n;
    out.dim = s.dim;
    for (const auto& f : s.facets)
        out.facets.emplace_back(lambda * f.base(), f.tangent(), f.normal(),
                                lambda * f.domain());
    return out;
}

/// Surface covering the parallelepiped patch {base + E y : y in [0,1]^d},
/// where the edge vectors are the columns of E; the patch is split into d!
/// simplicial facets by the Kuhn rule.
inline PolyhedralSurface box_surface(int sig_index, const Vector& base, const Matrix& edges) {
    const int n = static_cast<int>(base.size());
    const int d = static_cast<int>(edges.cols());
    PolyhedralSurface out;
    out.sig_index = sig_index;
    out.n = n;
    out.dim = d;
    std::vector<int> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    do {
        Matrix verts(n, d + 1);
        Vector x = base;
        verts.col(0) = x;
        for (int k = 0; k < d; ++k) {
            x += edges.col(perm[k]);
            verts.col(k + 1) = x;
        }
        out.facets.push_back(make_facet(verts));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

// ---------------------------------------------------------------------------
// Graph meshes
// ---------------------------------------------------------------------------

/// Simplicial mesh of the graph of a height function h : R^d -> R^(n-d) over
/// an axis-aligned parameter box. Each grid cell splits into d! simplices by
/// the Kuhn rule, which is deterministic and compatible with grid refinement;
/// facets are the flat simplices through the graph points of the cell corners.
inline PolyhedralSurface mesh_graph(int sig_index, int n, int dim,
                                    const std::function<Vector(const Vector&)>& height,
                                    const Vector& lo, const Vector& hi, int cells_per_axis) {
    if (lo.size() != dim || hi.size() != dim)
        throw ScenarioError("mesh_graph: parameter box dimension mismatch");
    if (cells_per_axis < 1) throw ScenarioError("mesh_graph: need at least one cell");

    auto graph_point = [&](const Vector& u) {
        Vector x(n);
        x.head(dim) = u;
        Vector h = height(u);
        if (h.size() != n - dim) throw ScenarioError("mesh_graph: height output dimension mismatch");
        x.tail(n - dim) = h;
        return x;
    };

    const Vector step = (hi - lo) / cells_per_axis;
    PolyhedralSurface out;
    out.sig_index = sig_index;
    out.n = n;
    out.dim = dim;

    std::vector<int> cell(dim, 0);
    std::vector<int> perm(dim);
    for (;;) {
        Vector corner = lo;
        for (int j = 0; j < dim; ++j) corner[j] += cell[j] * step[j];
        std::iota(perm.begin(), perm.end(), 0);
        do {
            Matrix verts(n, dim + 1);
            Vector u = corner;
            verts.col(0) = graph_point(u);
            for (int k = 0; k < dim; ++k) {
                u[perm[k]] += step[perm[k]];
                verts.col(k + 1) = graph_point(u);
            }
            out.facets.push_back(make_facet(verts));
        } while (std::next_permutation(perm.begin(), perm.end()));

        int k = 0;
        while (k < dim && ++cell[k] == cells_per_axis) cell[k++] = 0;
        if (k == dim) break;
    }
    return out;
}

/// Maximum vertical deviation between a graph mesh (built by mesh_graph) and
/// the analytic height function, measured on a deterministic sample grid of
/// each facet's parameter projection.
inline double graph_mesh_deviation(const PolyhedralSurface& s,
                                   const std::function<Vector(const Vector&)>& height,
                                   int samples_per_facet = 16) {
    const int d = s.dim;
    double worst = 0.0;
    Rng rng(1234);
    for (const auto& f : s.facets) {
        const Matrix verts = f.ambient_vertices();
        Matrix param(d, d + 1);
        Matrix heights(s.n - d, d + 1);
        for (int j = 0; j <= d; ++j) {
            param.col(j) = verts.col(j).head(d);
            heights.col(j) = verts.col(j).tail(s.n - d);
        }
        for (int k = 0; k < samples_per_facet; ++k) {
            Vector w(d + 1);
            double total = 0.0;
            for (int j = 0; j <= d; ++j) {
                w[j] = -std::log(1.0 - rng.uniform());
                total += w[j];
            }
            w /= total;
            const Vector u = param * w;
            const Vector interp = heights * w;
            worst = std::max(worst, (height(u) - interp).norm());
        }
    }
    return worst;
}

}  // namespace transconv
