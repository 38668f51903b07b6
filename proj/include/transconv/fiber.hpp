#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "transconv/config.hpp"
#include "transconv/geometry.hpp"
#include "transconv/linalg.hpp"
#include "transconv/surface.hpp"

namespace transconv {

/// Facet pair whose combined normal frame is numerically degenerate: the
/// affine intersection is non-generic there. Recorded as a diagnostic and
/// skipped, never integrated.
struct ParallelPairDiag {
    int i = -1, j = -1;
    double gamma3 = 0.0;
};

/// One connected component of the fiber through z: an affine piece
/// x = base + frame * t clipped to the polytope where x stays on the first
/// facet and z - x on the second. The clip is stored exactly for fiber
/// dimension 1 (interval) and 2 (convex polygon); higher dimensions carry a
/// halfspace list volumized by Monte Carlo.
struct FiberPiece {
    int source1 = -1, source2 = -1;
    Vector affine_base;
    Matrix affine_frame;
    Interval interval;
    Polygon polygon;
    std::vector<std::pair<Vector, double>> halfspaces;
    double volume = 0.0;
    double mc_stderr = 0.0;
    double weight = 0.0;  // 1 / gamma3 of the source pair
};

struct FiberResult {
    std::vector<FiberPiece> pieces;
    std::vector<ParallelPairDiag> parallel_pairs;
};

namespace detail {

/// Uniform grid over facet bounding boxes; queries return candidate facet
/// indices whose box can intersect the query box.
class FacetGridIndex {
public:
    FacetGridIndex() = default;

    explicit FacetGridIndex(const PolyhedralSurface& s) {
        const std::size_t count = s.size();
        n_ = s.n;
        Aabb global = s.aabb();
        lo_ = global.lo;
        const Vector extent = (global.hi - global.lo).cwiseMax(1e-12);
        const int k = std::max(1, static_cast<int>(std::floor(
                                      std::pow(static_cast<double>(count), 1.0 / n_))));
        cells_per_axis_ = k;
        step_ = extent / k;
        cells_.resize(static_cast<std::size_t>(std::pow(k, n_)));
        for (std::size_t f = 0; f < count; ++f) {
            visit_cells(s.facets[f].aabb(), [&](std::size_t cell) { cells_[cell].push_back(static_cast<int>(f)); });
        }
        hi_ = global.hi;
    }

    template <class Out>
    void query(const Aabb& box, std::vector<std::uint32_t>& stamp, std::uint32_t tag,
               Out&& out) const {
        for (int a = 0; a < n_; ++a)
            if (box.lo[a] > hi_[a] || box.hi[a] < lo_[a]) return;
        visit_cells(box, [&](std::size_t cell) {
            for (int f : cells_[cell]) {
                if (stamp[f] != tag) {
                    stamp[f] = tag;
                    out(f);
                }
            }
        });
    }

private:
    template <class Visit>
    void visit_cells(const Aabb& box, Visit&& visit) const {
        std::vector<int> lo_cell(n_), hi_cell(n_), cur(n_);
        for (int a = 0; a < n_; ++a) {
            lo_cell[a] = clamp_cell((box.lo[a] - lo_[a]) / step_[a]);
            hi_cell[a] = clamp_cell((box.hi[a] - lo_[a]) / step_[a]);
            cur[a] = lo_cell[a];
        }
        for (;;) {
            std::size_t id = 0;
            for (int a = n_ - 1; a >= 0; --a) id = id * cells_per_axis_ + cur[a];
            visit(id);
            int a = 0;
            for (; a < n_; ++a) {
                if (++cur[a] <= hi_cell[a]) break;
                cur[a] = lo_cell[a];
            }
            if (a == n_) break;
        }
    }

    int clamp_cell(double v) const {
        int c = static_cast<int>(std::floor(v));
        if (c < 0) c = 0;
        if (c >= cells_per_axis_) c = cells_per_axis_ - 1;
        return c;
    }

    int n_ = 0;
    int cells_per_axis_ = 1;
    Vector lo_, hi_, step_;
    std::vector<std::vector<int>> cells_;
};

}  // namespace detail

/// Solves the per-pair affine systems behind the fiber representation and
/// clips them to the facet domains. All pair-level quantities are independent
/// of z, so a prepared pair can be reused across every quadrature node of a
/// target facet.
class FiberEngine {
public:
    FiberEngine(const PolyhedralSurface& s1, const PolyhedralSurface& s2,
                const Tolerances& tol = default_tolerances(), std::uint64_t mc_seed = 7777,
                int mc_samples = 20000)
        : s1_(&s1), s2_(&s2), tol_(tol), mc_seed_(mc_seed), mc_samples_(mc_samples) {
        fiber_dim_ = s1.dim + s2.dim - s1.n;
        if (fiber_dim_ < 1)
            throw ScenarioError("FiberEngine: fiber dimension must be positive");
        use_index_ = s1.size() * s2.size() > 4096;
        if (use_index_) index_ = detail::FacetGridIndex(s2);
    }

    int fiber_dim() const { return fiber_dim_; }

    /// Pair data reused across nodes: pseudoinverse of the stacked tangent
    /// system, the orthonormal fiber directions, and the clip rows with their
    /// z-independent parts.
    struct PairData {
        int i = -1, j = -1;
        double gamma3 = 0.0;
        double weight = 0.0;
        Matrix pu, pv;   // blocks of the pseudoinverse, applied to z - b1 - b2
        Matrix x0_map;   // x0 = b1 + x0_map * (z - b1 - b2)
        Matrix frame;    // n x df orthonormal
        struct Row {
            Vector tdir;    // direction in fiber coordinates
            Vector g;       // original domain normal
            double h = 0.0;
            bool first = true;  // constraint from facet 1 (else facet 2)
        };
        std::vector<Row> rows;
        double radius = 0.0;  // domain-size part of the clip bound
    };

    struct Prepared {
        std::vector<PairData> pairs;
        std::vector<ParallelPairDiag> parallel_pairs;
    };

    /// Collects the facet pairs whose Minkowski-sum box can reach the target
    /// box, building the solved pair data for each.
    Prepared prepare(const Aabb& target) const {
        Prepared out;
        std::vector<std::uint32_t> stamp;
        const std::size_t c1 = s1_->size();
        if (use_index_) stamp.assign(s2_->size(), 0);
        std::uint32_t tag = 0;
        for (std::size_t i = 0; i < c1; ++i) {
            const Aabb& b1 = s1_->facets[i].aabb();
            Aabb query{target.lo - b1.hi, target.hi - b1.lo};
            auto consider = [&](int j) {
                if (!s2_->facets[j].aabb().intersects(query, tol_.clip)) return;
                add_pair(static_cast<int>(i), j, out);
            };
            if (use_index_) {
                ++tag;
                index_.query(query, stamp, tag, consider);
            } else {
                for (std::size_t j = 0; j < s2_->size(); ++j) consider(static_cast<int>(j));
            }
        }
        return out;
    }

    Aabb point_box(const Vector& z) const { return Aabb{z, z}; }

    /// Fiber pieces at z restricted to the prepared pair set.
    void pieces_at(const Vector& z, const Prepared& prep, std::vector<FiberPiece>& out) const {
        for (const auto& pd : prep.pairs) {
            FiberPiece piece;
            if (solve_pair(pd, z, piece)) out.push_back(std::move(piece));
        }
    }

    FiberResult fiber(const Vector& z) const {
        Prepared prep = prepare(point_box(z));
        FiberResult result;
        result.parallel_pairs = prep.parallel_pairs;
        pieces_at(z, prep, result.pieces);
        return result;
    }

    /// Weighted fiber integral at a single point, preparing the pair set for
    /// just that point. Used by the quadrature drivers node by node, which
    /// keeps the prepared set small even when the target facet is large.
    double value_at_point(const Vector& z, const SurfaceDensity& f1, const SurfaceDensity& f2,
                          double* mc_err = nullptr, int* piece_count = nullptr,
                          std::vector<ParallelPairDiag>* diags = nullptr) const {
        Prepared prep = prepare(point_box(z));
        if (diags)
            diags->insert(diags->end(), prep.parallel_pairs.begin(), prep.parallel_pairs.end());
        return value_at(z, prep, f1, f2, mc_err, piece_count);
    }

    /// Weighted fiber integral at z for piecewise-constant densities:
    /// sum of weight * f1 * f2 * clip volume. Cheap path that skips piece
    /// materialization; mc_err accumulates Monte-Carlo volume errors.
    double value_at(const Vector& z, const Prepared& prep, const SurfaceDensity& f1,
                    const SurfaceDensity& f2, double* mc_err = nullptr,
                    int* piece_count = nullptr) const {
        double acc = 0.0;
        for (const auto& pd : prep.pairs) {
            const double density = f1.values[pd.i] * f2.values[pd.j];
            if (density == 0.0) continue;
            double stderr_ = 0.0;
            const double vol = clip_volume(pd, z, &stderr_);
            if (vol <= 0.0) continue;
            acc += pd.weight * density * vol;
            if (mc_err) *mc_err += pd.weight * density * stderr_;
            if (piece_count) ++*piece_count;
        }
        return acc;
    }

private:
    void add_pair(int i, int j, Prepared& out) const {
        const Facet& f1 = s1_->facets[i];
        const Facet& f2 = s2_->facets[j];
        const int n = s1_->n;
        const int n1 = f1.dim();
        const int n2 = f2.dim();

        Matrix normals(n, (n - n1) + (n - n2));
        normals << f1.normal().columns(), f2.normal().columns();
        const double gamma3 = gramian(normals.transpose());
        if (gamma3 < tol_.gamma3_floor) {
            out.parallel_pairs.push_back({i, j, gamma3});
            return;
        }

        PairData pd;
        pd.i = i;
        pd.j = j;
        pd.gamma3 = gamma3;
        pd.weight = 1.0 / gamma3;

        Matrix m(n, n1 + n2);
        m << f1.tangent().columns(), f2.tangent().columns();
        Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
        // full-rank by the gamma3 check; kernel has dimension n1 + n2 - n
        const int df = n1 + n2 - n;
        Matrix pinv = svd.solve(Matrix::Identity(n, n));
        pd.pu = pinv.topRows(n1);
        pd.pv = pinv.bottomRows(n2);
        pd.x0_map = f1.tangent().columns() * pd.pu;

        Matrix kernel = svd.matrixV().rightCols(df);
        // image of the kernel in ambient x-space, orthonormalized
        Matrix xdirs = f1.tangent().columns() * kernel.topRows(n1);
        pd.frame = orthonormalized_frame(xdirs).columns();

        const Matrix gu = f1.tangent().columns().transpose() * pd.frame;  // n1 x df
        const Matrix gv = f2.tangent().columns().transpose() * pd.frame;  // n2 x df
        for (const auto& hs : f1.domain_halfspaces()) {
            PairData::Row row;
            row.tdir = gu.transpose() * hs.normal;
            row.g = hs.normal;
            row.h = hs.offset;
            row.first = true;
            pd.rows.push_back(std::move(row));
        }
        for (const auto& hs : f2.domain_halfspaces()) {
            PairData::Row row;
            row.tdir = -(gv.transpose() * hs.normal);
            row.g = hs.normal;
            row.h = hs.offset;
            row.first = false;
            pd.rows.push_back(std::move(row));
        }
        double rad = 0.0;
        for (int c = 0; c < f1.domain().cols(); ++c) rad = std::max(rad, f1.domain().col(c).norm());
        pd.radius = rad + 1.0;
        out.pairs.push_back(std::move(pd));
    }

    /// Clip volume at z; also fills the piece geometry when requested.
    double clip_volume(const PairData& pd, const Vector& z, double* stderr_,
                       FiberPiece* piece = nullptr) const {
        const Facet& f1 = s1_->facets[pd.i];
        const Facet& f2 = s2_->facets[pd.j];
        const Vector rhs = z - f1.base() - f2.base();
        const Vector u0 = pd.pu * rhs;
        const Vector v0 = pd.pv * rhs;
        const double r = pd.radius + u0.norm();

        const int df = static_cast<int>(pd.frame.cols());
        double vol = 0.0;
        if (piece) {
            piece->source1 = pd.i;
            piece->source2 = pd.j;
            piece->affine_base = f1.base() + pd.x0_map * rhs;
            piece->affine_frame = pd.frame;
            piece->weight = pd.weight;
        }
        if (df == 1) {
            std::vector<std::pair<double, double>> rows;
            rows.reserve(pd.rows.size());
            for (const auto& row : pd.rows) {
                const double c = row.h - row.g.dot(row.first ? u0 : v0);
                rows.push_back({row.tdir[0], c});
            }
            Interval iv = clip_interval(rows, r);
            vol = iv.length();
            if (piece) piece->interval = iv;
        } else if (df == 2) {
            Polygon poly{{-r, -r}, {r, -r}, {r, r}, {-r, r}};
            for (const auto& row : pd.rows) {
                const double c = row.h - row.g.dot(row.first ? u0 : v0);
                poly = clip_polygon(poly, Eigen::Vector2d(row.tdir[0], row.tdir[1]), c);
                if (poly.size() < 3) break;
            }
            vol = polygon_area(poly);
            if (piece) piece->polygon = poly;
        } else {
            std::vector<std::pair<Vector, double>> rows;
            rows.reserve(pd.rows.size());
            for (const auto& row : pd.rows) {
                const double c = row.h - row.g.dot(row.first ? u0 : v0);
                rows.push_back({row.tdir, c});
            }
            std::uint64_t seed = mc_seed_ ^ (static_cast<std::uint64_t>(pd.i) << 32) ^
                                 static_cast<std::uint64_t>(pd.j);
            Rng rng(seed);
            auto mc = mc_halfspace_volume(rows, df, r, rng, mc_samples_);
            vol = mc.value;
            if (stderr_) *stderr_ += mc.stderr_;
            if (piece) {
                piece->halfspaces = rows;
                piece->mc_stderr = mc.stderr_;
            }
        }
        if (vol <= tol_.facet_degeneracy) return 0.0;
        if (piece) piece->volume = vol;
        return vol;
    }

    bool solve_pair(const PairData& pd, const Vector& z, FiberPiece& piece) const {
        double stderr_ = 0.0;
        const double vol = clip_volume(pd, z, &stderr_, &piece);
        return vol > 0.0;
    }

    const PolyhedralSurface* s1_;
    const PolyhedralSurface* s2_;
    Tolerances tol_;
    std::uint64_t mc_seed_;
    int mc_samples_;
    int fiber_dim_ = 0;
    bool use_index_ = false;
    detail::FacetGridIndex index_;
};

}  // namespace transconv
