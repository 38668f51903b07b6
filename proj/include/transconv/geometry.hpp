#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "transconv/config.hpp"
#include "transconv/errors.hpp"
#include "transconv/linalg.hpp"
#include "transconv/rng.hpp"

namespace transconv {

// Simplices are stored as (dim x (dim+1)) matrices, one vertex per column.

inline double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

/// Volume of a d-simplex in R^d: |det of edge matrix| / d!.
inline double simplex_volume(const Matrix& verts) {
    const int d = static_cast<int>(verts.rows());
    if (verts.cols() != d + 1) throw DegenerateFacet("simplex_volume: need d+1 vertices");
    if (d == 0) return 1.0;
    MatN e(d, d);
    for (int j = 0; j < d; ++j) e.col(j) = verts.col(j + 1) - verts.col(0);
    return std::abs(e.determinant()) / factorial(d);
}

inline Vector simplex_barycenter(const Matrix& verts) { return verts.rowwise().mean(); }

/// Barycentric subdivision: one child simplex per chain of faces, i.e. per
/// permutation of the vertices; a d-simplex yields (d+1)! equal-volume children.
inline std::vector<Matrix> barycentric_subdivide(const Matrix& verts) {
    const int d = static_cast<int>(verts.rows());
    std::vector<int> perm(d + 1);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<Matrix> children;
    do {
        Matrix child(d, d + 1);
        Vector acc = Vector::Zero(d);
        for (int k = 0; k <= d; ++k) {
            acc += verts.col(perm[k]);
            child.col(k) = acc / static_cast<double>(k + 1);
        }
        children.push_back(std::move(child));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return children;
}

/// Cells of the edgewise (Freudenthal) subdivision at resolution m: the
/// simplex splits into m^d congruent-volume children. Enumerated through the
/// Kuhn lattice so membership tests are exact integer comparisons.
inline std::vector<Matrix> edgewise_subdivide(const Matrix& verts, int m) {
    const int d = static_cast<int>(verts.rows());
    std::vector<Matrix> children;
    if (d == 0 || m == 1) {
        children.push_back(verts);
        return children;
    }
    // directions of the Kuhn parametrization
    Matrix dirs(d, d);
    for (int k = 0; k < d; ++k) dirs.col(k) = verts.col(k + 1) - verts.col(k);
    const Vector origin = verts.col(0);

    std::vector<int> cube(d, 0);
    std::vector<int> perm(d);
    std::vector<std::vector<int>> cell_y(d + 1, std::vector<int>(d));
    for (;;) {
        std::iota(perm.begin(), perm.end(), 0);
        do {
            // integer vertices of the candidate Kuhn cell
            cell_y[0] = cube;
            for (int k = 0; k < d; ++k) {
                cell_y[k + 1] = cell_y[k];
                cell_y[k + 1][perm[k]] += 1;
            }
            bool inside = true;
            for (const auto& y : cell_y) {
                for (int j = 0; j + 1 < d; ++j) {
                    if (y[j] < y[j + 1]) {
                        inside = false;
                        break;
                    }
                }
                if (!inside) break;
            }
            if (inside) {
                Matrix child(d, d + 1);
                for (int v = 0; v <= d; ++v) {
                    Vector x = origin;
                    for (int k = 0; k < d; ++k)
                        x += (static_cast<double>(cell_y[v][k]) / m) * dirs.col(k);
                    child.col(v) = x;
                }
                children.push_back(std::move(child));
            }
        } while (std::next_permutation(perm.begin(), perm.end()));

        int k = 0;
        while (k < d && ++cube[k] == m) cube[k++] = 0;
        if (k == d) break;
    }
    return children;
}

/// Midpoint quadrature nodes over an edgewise subdivision at resolution 2^level:
/// barycenters of the children, each carrying an equal share of the volume.
struct QuadratureRule {
    std::vector<Vector> nodes;
    double weight = 0.0;  // identical for all nodes
};

inline QuadratureRule midpoint_rule(const Matrix& verts, int level) {
    const int m = 1 << level;
    QuadratureRule rule;
    const double vol = simplex_volume(verts);
    auto children = edgewise_subdivide(verts, m);
    rule.nodes.reserve(children.size());
    for (const auto& c : children) rule.nodes.push_back(simplex_barycenter(c));
    rule.weight = vol / static_cast<double>(children.size());
    return rule;
}

/// Halfspace form of a simplex: x inside iff g_j . x <= h_j for all j.
struct Halfspace {
    Vector normal;
    double offset = 0.0;
};

inline std::vector<Halfspace> simplex_halfspaces(const Matrix& verts) {
    const int d = static_cast<int>(verts.rows());
    std::vector<Halfspace> hs;
    if (d == 0) return hs;
    hs.reserve(d + 1);
    for (int skip = 0; skip <= d; ++skip) {
        Matrix face(d, d);
        int c = 0;
        for (int j = 0; j <= d; ++j)
            if (j != skip) face.col(c++) = verts.col(j);
        Vector normal;
        if (d == 1) {
            normal = Vector::Ones(1);
        } else {
            Matrix edges(d, d - 1);
            for (int j = 0; j < d - 1; ++j) edges.col(j) = face.col(j + 1) - face.col(0);
            Eigen::HouseholderQR<Matrix> qr(edges);
            Matrix q = qr.householderQ() * Matrix::Identity(d, d);
            normal = q.col(d - 1);
        }
        double h = normal.dot(face.col(0));
        if (normal.dot(verts.col(skip)) > h) {
            normal = -normal;
            h = -h;
        }
        hs.push_back({std::move(normal), h});
    }
    return hs;
}

inline bool point_in_halfspaces(const std::vector<Halfspace>& hs, const Vector& x, double tol) {
    for (const auto& h : hs)
        if (h.normal.dot(x) > h.offset + tol) return false;
    return true;
}

/// Uniform sample from a simplex via normalized exponential gaps.
inline Vector sample_simplex(Rng& rng, const Matrix& verts) {
    const int k = static_cast<int>(verts.cols());
    Vector w(k);
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        w[i] = -std::log(1.0 - rng.uniform());
        total += w[i];
    }
    return verts * (w / total);
}

// ---------------------------------------------------------------------------
// 1D / 2D clipping for fiber polytopes
// ---------------------------------------------------------------------------

/// Intersection of {a_j t <= c_j} with [-r, r]; empty when lo > hi.
struct Interval {
    double lo = 0.0, hi = -1.0;
    bool empty() const { return hi <= lo; }
    double length() const { return empty() ? 0.0 : hi - lo; }
};

inline Interval clip_interval(const std::vector<std::pair<double, double>>& rows, double r) {
    Interval iv{-r, r};
    for (const auto& [a, c] : rows) {
        if (std::abs(a) < 1e-15) {
            if (c < -1e-12) return {0.0, -1.0};
            continue;
        }
        const double bound = c / a;
        if (a > 0.0)
            iv.hi = std::min(iv.hi, bound);
        else
            iv.lo = std::max(iv.lo, bound);
        if (iv.empty()) return iv;
    }
    return iv;
}

using Polygon = std::vector<Eigen::Vector2d>;

/// Sutherland-Hodgman clip of a convex polygon by {g . t <= c}.
inline Polygon clip_polygon(const Polygon& poly, const Eigen::Vector2d& g, double c) {
    Polygon out;
    const std::size_t n = poly.size();
    if (n == 0) return out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& cur = poly[i];
        const auto& nxt = poly[(i + 1) % n];
        const double dc = g.dot(cur) - c;
        const double dn = g.dot(nxt) - c;
        if (dc <= 0.0) out.push_back(cur);
        if ((dc < 0.0 && dn > 0.0) || (dc > 0.0 && dn < 0.0)) {
            const double s = dc / (dc - dn);
            out.push_back(cur + s * (nxt - cur));
        }
    }
    return out;
}

inline double polygon_area(const Polygon& poly) {
    const std::size_t n = poly.size();
    if (n < 3) return 0.0;
    double twice = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % n];
        twice += p.x() * q.y() - q.x() * p.y();
    }
    return std::abs(twice) / 2.0;
}

/// Monte-Carlo volume of {t in [-r, r]^d : A t <= c}; returns estimate and
/// standard error. Only used for fiber dimension >= 3.
struct McVolume {
    double value = 0.0;
    double stderr_ = 0.0;
};

inline McVolume mc_halfspace_volume(const std::vector<std::pair<Vector, double>>& rows, int dim,
                                    double r, Rng& rng, int samples) {
    int hits = 0;
    Vector t(dim);
    for (int s = 0; s < samples; ++s) {
        for (int j = 0; j < dim; ++j) t[j] = rng.uniform(-r, r);
        bool in = true;
        for (const auto& [a, c] : rows) {
            if (a.dot(t) > c) {
                in = false;
                break;
            }
        }
        if (in) ++hits;
    }
    const double box = std::pow(2.0 * r, dim);
    const double p = static_cast<double>(hits) / samples;
    McVolume v;
    v.value = box * p;
    v.stderr_ = box * std::sqrt(std::max(0.0, p * (1.0 - p) / samples));
    return v;
}

// ---------------------------------------------------------------------------
// Axis-aligned boxes for interaction pruning
// ---------------------------------------------------------------------------

struct Aabb {
    Vector lo, hi;

    static Aabb of_points(const Matrix& pts) {
        Aabb b;
        b.lo = pts.rowwise().minCoeff();
        b.hi = pts.rowwise().maxCoeff();
        return b;
    }
    Aabb sum(const Aabb& o) const { return {lo + o.lo, hi + o.hi}; }
    Aabb negate() const { return {-hi, -lo}; }
    bool intersects(const Aabb& o, double tol) const {
        for (int i = 0; i < lo.size(); ++i)
            if (lo[i] > o.hi[i] + tol || o.lo[i] > hi[i] + tol) return false;
        return true;
    }
    bool contains(const Vector& x, double tol) const {
        for (int i = 0; i < lo.size(); ++i)
            if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
        return true;
    }
};

}  // namespace transconv
