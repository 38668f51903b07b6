#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "transconv/config.hpp"
#include "transconv/errors.hpp"
#include "transconv/geometry.hpp"
#include "transconv/linalg.hpp"

namespace transconv {

/// Piecewise-linear submersion R^n -> R^m: a full-rank affine map per cell of
/// a simplicial complex. Cells are n-simplices with disjoint interiors;
/// adjacent cells must agree on shared faces so the map is continuous.
class PiecewiseLinearMap {
public:
    PiecewiseLinearMap(int target_dim, std::vector<Matrix> cells, std::vector<Matrix> a,
                       std::vector<Vector> b, const Tolerances& tol = default_tolerances())
        : target_dim_(target_dim), cells_(std::move(cells)), a_(std::move(a)), b_(std::move(b)) {
        if (cells_.empty()) throw ScenarioError("PiecewiseLinearMap: empty complex");
        n_ = static_cast<int>(cells_[0].rows());
        if (a_.size() != cells_.size() || b_.size() != cells_.size())
            throw ScenarioError("PiecewiseLinearMap: per-cell data count mismatch");
        for (std::size_t c = 0; c < cells_.size(); ++c) {
            if (cells_[c].rows() != n_ || cells_[c].cols() != n_ + 1)
                throw ScenarioError("PiecewiseLinearMap: cells must be n-simplices");
            if (a_[c].rows() != target_dim_ || a_[c].cols() != n_ || b_[c].size() != target_dim_)
                throw ScenarioError("PiecewiseLinearMap: affine map shape mismatch");
            const Vector s = singular_values(a_[c]);
            if (s[0] <= tol.rank_rel * std::max(1.0, s[s.size() - 1]))
                throw RankDeficient("PiecewiseLinearMap: cell " + std::to_string(c) +
                                    " matrix not full rank");
        }
        check_continuity(tol.continuity);
    }

    int ambient_dim() const { return n_; }
    int target_dim() const { return target_dim_; }
    std::size_t cell_count() const { return cells_.size(); }
    const std::vector<Matrix>& cells() const { return cells_; }
    const Matrix& cell(std::size_t c) const { return cells_[c]; }
    const Matrix& matrix(std::size_t c) const { return a_[c]; }
    const Vector& offset(std::size_t c) const { return b_[c]; }

    Vector apply(std::size_t c, const Vector& x) const { return a_[c] * x + b_[c]; }

    /// Vertices of the image polytope of one cell.
    Matrix image_vertices(std::size_t c) const {
        Matrix out(target_dim_, n_ + 1);
        for (int j = 0; j <= n_; ++j) out.col(j) = apply(c, cells_[c].col(j));
        return out;
    }

    /// Two maps share a complex when their cells coincide geometrically.
    bool same_complex(const PiecewiseLinearMap& other, double tol = 1e-12) const {
        if (other.cells_.size() != cells_.size() || other.n_ != n_) return false;
        for (std::size_t c = 0; c < cells_.size(); ++c)
            if ((cells_[c] - other.cells_[c]).cwiseAbs().maxCoeff() > tol) return false;
        return true;
    }

private:
    /// Cells sharing n vertices form a face; affine maps must agree there.
    void check_continuity(double tol) const {
        const double geom_tol = 1e-9;
        for (std::size_t c1 = 0; c1 < cells_.size(); ++c1) {
            for (std::size_t c2 = c1 + 1; c2 < cells_.size(); ++c2) {
                int shared = 0;
                for (int j1 = 0; j1 <= n_; ++j1) {
                    for (int j2 = 0; j2 <= n_; ++j2) {
                        if ((cells_[c1].col(j1) - cells_[c2].col(j2)).cwiseAbs().maxCoeff() <
                            geom_tol) {
                            ++shared;
                            const Vector v = cells_[c1].col(j1);
                            if ((apply(c1, v) - apply(c2, v)).cwiseAbs().maxCoeff() > tol)
                                throw ScenarioError(
                                    "PiecewiseLinearMap: cells " + std::to_string(c1) + " and " +
                                    std::to_string(c2) + " disagree on a shared vertex");
                            break;
                        }
                    }
                }
                (void)shared;
            }
        }
    }

    int target_dim_ = 0;
    int n_ = 0;
    std::vector<Matrix> cells_;
    std::vector<Matrix> a_;
    std::vector<Vector> b_;
};

inline void require_shared_complex(const PiecewiseLinearMap& p1, const PiecewiseLinearMap& p2,
                                   const PiecewiseLinearMap& p3) {
    if (!p1.same_complex(p2) || !p1.same_complex(p3))
        throw ScenarioError("maps must share one simplicial complex");
}

/// Piecewise-constant density on an axis-aligned grid in R^d. Values are
/// stored row-major with the first axis slowest.
struct GridDensity {
    Vector origin;
    Vector spacing;
    std::vector<int> shape;
    std::vector<double> values;

    int dim() const { return static_cast<int>(shape.size()); }

    std::size_t flat_size() const {
        std::size_t s = 1;
        for (int k : shape) s *= static_cast<std::size_t>(k);
        return s;
    }

    void validate() const {
        if (origin.size() != dim() || spacing.size() != dim())
            throw ScenarioError("GridDensity: origin/spacing dimension mismatch");
        for (int k : shape)
            if (k < 1) throw ScenarioError("GridDensity: empty axis");
        for (int a = 0; a < dim(); ++a)
            if (!(spacing[a] > 0.0)) throw ScenarioError("GridDensity: nonpositive spacing");
        if (values.size() != flat_size())
            throw ScenarioError("GridDensity: value count does not match shape");
        for (double v : values)
            if (!(v >= 0.0) || !std::isfinite(v))
                throw ScenarioError("GridDensity: values must be finite and nonnegative");
    }

    double cell_volume() const { return spacing.prod(); }

    double value_at(const Vector& x) const {
        std::size_t idx = 0;
        for (int a = 0; a < dim(); ++a) {
            const double t = (x[a] - origin[a]) / spacing[a];
            if (t < 0.0) return 0.0;
            const int i = static_cast<int>(t);
            if (i >= shape[a]) return 0.0;
            idx = idx * static_cast<std::size_t>(shape[a]) + static_cast<std::size_t>(i);
        }
        return values[idx];
    }

    double l2() const {
        double acc = 0.0;
        for (double v : values) acc += v * v;
        return std::sqrt(acc * cell_volume());
    }

    Aabb support_box() const {
        Aabb box;
        box.lo = origin;
        box.hi = origin;
        for (int a = 0; a < dim(); ++a) box.hi[a] += spacing[a] * shape[a];
        return box;
    }

    std::function<double(const Vector&)> as_function() const {
        GridDensity copy = *this;
        return [copy](const Vector& x) { return copy.value_at(x); };
    }
};

/// Kuhn triangulation of an axis-aligned box into n! simplices.
inline std::vector<Matrix> box_complex(const Vector& lo, const Vector& hi) {
    const int n = static_cast<int>(lo.size());
    std::vector<Matrix> cells;
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    do {
        Matrix verts(n, n + 1);
        Vector x = lo;
        verts.col(0) = x;
        for (int k = 0; k < n; ++k) {
            x[perm[k]] = hi[perm[k]];
            verts.col(k + 1) = x;
        }
        cells.push_back(verts);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return cells;
}

/// Complex of two boxes split along the first axis at the given coordinate,
/// each Kuhn-triangulated; the shared face is matched so piecewise maps can
/// bend across it continuously.
inline std::vector<Matrix> split_box_complex(const Vector& lo, const Vector& hi, double split) {
    Vector mid_hi = hi, mid_lo = lo;
    mid_hi[0] = split;
    mid_lo[0] = split;
    auto left = box_complex(lo, mid_hi);
    auto right = box_complex(mid_lo, hi);
    left.insert(left.end(), right.begin(), right.end());
    return left;
}

}  // namespace transconv
