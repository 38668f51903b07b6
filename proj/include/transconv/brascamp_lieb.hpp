#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "transconv/linalg.hpp"
#include "transconv/lp.hpp"
#include "transconv/parallel.hpp"
#include "transconv/plmap.hpp"
#include "transconv/rng.hpp"

namespace transconv {

/// Per-cell singular-value weights of the third map. With sigma ascending,
///   rho1 = |A3|^{-(n-n2)/n3} * product of the top (n-n1) sigmas,
///   rho2 = |A3|^{-(n-n1)/n3} * product of the top (n-n2) sigmas.
/// The exponent bookkeeping rests on (n-n1) + (n-n2) = n3. Both weights are
/// evaluated from the cell's own third-map derivative; the product rho1*rho2
/// equals |A3|^{-1} times the two top-block products, an identity tested
/// symbolically elsewhere.
struct RhoWeights {
    std::vector<double> rho1, rho2;
};

inline RhoWeights rho_weights(const PiecewiseLinearMap& phi3, const DimensionSignature& sig) {
    if (phi3.target_dim() != sig.n3)
        throw ScenarioError("rho_weights: signature does not match the third map");
    RhoWeights out;
    const int n3 = sig.n3;
    const int top1 = sig.n - sig.n1;  // factors in rho1
    const int top2 = sig.n - sig.n2;  // factors in rho2
    for (std::size_t c = 0; c < phi3.cell_count(); ++c) {
        const Vector s = singular_values(phi3.matrix(c));
        const double vol = s.prod();
        double p1 = 1.0, p2 = 1.0;
        for (int j = n3 - top1; j < n3; ++j) p1 *= s[j];
        for (int j = n3 - top2; j < n3; ++j) p2 *= s[j];
        out.rho1.push_back(std::pow(vol, -static_cast<double>(top2) / n3) * p1);
        out.rho2.push_back(std::pow(vol, -static_cast<double>(top1) / n3) * p2);
    }
    return out;
}

struct Gamma0Options {
    int grid_points = 4096;   // angle grid for the n3 <= 2 exact search
    int polish_iters = 80;    // golden-section refinement steps
    int restarts = 64;        // random restarts for n3 >= 3
    int ascent_iters = 200;
    double det_floor = default_tolerances().det_floor;
    double lp_tol = default_tolerances().lp_feasibility;
    int threads = 1;
};

namespace detail {

/// sup over O in O(n) with O N3x = N3y (columnwise) of |det(O N1x, N2y, N3y)|.
/// Any such O factors as [N3y, My R][N3x, Mx]^T with R in O(n3); only the
/// completion-space component of N1x moves under R, so the objective is a
/// low-degree trigonometric polynomial of the rotation angle when n3 = 2.
struct RotationSup {
    double value = 0.0;
    bool certified = true;
};

class AlignedRotationProblem {
public:
    AlignedRotationProblem(const Matrix& n1x, const Matrix& n2y, const Matrix& n3x,
                           const Matrix& n3y)
        : n_(static_cast<int>(n1x.rows())) {
        const Frame fx(n3x), fy(n3y);
        mx_ = orthonormal_completion(fx).columns();
        my_ = orthonormal_completion(fy).columns();
        n3_dim_ = static_cast<int>(mx_.cols());
        p0_ = n3y * (n3x.transpose() * n1x);
        c_bot_ = mx_.transpose() * n1x;
        rest_.resize(n_, n2y.cols() + n3y.cols());
        rest_ << n2y, n3y;
        scratch_.resize(n_, n_);
    }

    int rotation_dim() const { return n3_dim_; }

    double eval(const Matrix& r) const {
        scratch_.leftCols(p0_.cols()) = p0_ + my_ * (r * c_bot_);
        scratch_.rightCols(rest_.cols()) = rest_;
        return std::abs(scratch_.determinant());
    }

    double eval_angle(double theta, bool reflect) const {
        Matrix r(2, 2);
        const double c = std::cos(theta), s = std::sin(theta);
        if (reflect)
            r << c, s, s, -c;
        else
            r << c, -s, s, c;
        return eval(r);
    }

    /// Euclidean gradient of det with respect to R (sign-adjusted outside).
    Matrix det_gradient(const Matrix& r) const {
        scratch_.leftCols(p0_.cols()) = p0_ + my_ * (r * c_bot_);
        scratch_.rightCols(rest_.cols()) = rest_;
        Eigen::PartialPivLU<MatN> lu(scratch_);
        const double det = lu.determinant();
        Matrix w(n3_dim_, n_);
        w.setZero();
        w.leftCols(c_bot_.cols()) = c_bot_;
        // adjugate contraction: d det = tr(adj(M) U dR W)
        const Matrix adj = det * lu.inverse();
        Matrix g = (w * adj * my_).transpose();
        return det < 0.0 ? Matrix(-g) : g;
    }

private:
    int n_;
    int n3_dim_ = 0;
    Matrix mx_, my_, p0_, c_bot_, rest_;
    mutable MatN scratch_;
};

inline double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                                 int iters) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        }
    }
    return std::max(f1, f2);
}

inline Matrix qr_retract(const Matrix& m) {
    Eigen::HouseholderQR<Matrix> qr(m);
    Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
    Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < q.cols(); ++i)
        if (r(i, i) < 0) q.col(i) *= -1.0;
    return q;
}

inline RotationSup rotation_aligned_sup(const Matrix& n1x, const Matrix& n2y, const Matrix& n3x,
                                        const Matrix& n3y, const Gamma0Options& opts, Rng& rng) {
    AlignedRotationProblem prob(n1x, n2y, n3x, n3y);
    RotationSup out;
    const int d = prob.rotation_dim();

    if (d == 1) {
        Matrix r(1, 1);
        r << 1.0;
        out.value = prob.eval(r);
        r << -1.0;
        out.value = std::max(out.value, prob.eval(r));
        return out;
    }

    if (d == 2) {
        const double step = 2.0 * M_PI / opts.grid_points;
        for (bool reflect : {false, true}) {
            double best = -1.0, best_theta = 0.0;
            for (int k = 0; k < opts.grid_points; ++k) {
                const double theta = k * step;
                const double v = prob.eval_angle(theta, reflect);
                if (v > best) {
                    best = v;
                    best_theta = theta;
                }
            }
            const double polished = golden_section_max(
                [&](double t) { return prob.eval_angle(t, reflect); }, best_theta - step,
                best_theta + step, opts.polish_iters);
            out.value = std::max(out.value, std::max(best, polished));
        }
        return out;
    }

    // n3 >= 3: projected-ascent restarts; the best value is a certified lower
    // bound for the sup, which only makes the claimed constant larger.
    out.certified = false;
    for (int restart = 0; restart < opts.restarts; ++restart) {
        Matrix r = qr_retract(rng.normal_matrix(d, d));
        if (restart % 2 == 1) r.col(0) *= -1.0;  // cover the reflection component
        double value = prob.eval(r);
        double step_size = 0.3;
        for (int it = 0; it < opts.ascent_iters && step_size > 1e-12; ++it) {
            const Matrix g = prob.det_gradient(r);
            // tangent projection on the orthogonal group
            const Matrix sym = 0.5 * (r.transpose() * g + g.transpose() * r);
            const Matrix tangent = g - r * sym;
            if (tangent.cwiseAbs().maxCoeff() < 1e-14) break;
            bool improved = false;
            while (step_size > 1e-12) {
                Matrix cand = qr_retract(r + step_size * tangent);
                const double v = prob.eval(cand);
                if (v > value + 1e-15) {
                    r = std::move(cand);
                    value = v;
                    improved = true;
                    step_size *= 1.5;
                    break;
                }
                step_size *= 0.5;
            }
            if (!improved) break;
        }
        out.value = std::max(out.value, value);
    }
    return out;
}

inline std::string matrix_key(std::initializer_list<const Matrix*> mats) {
    std::string key;
    for (const Matrix* m : mats) {
        const auto* data = reinterpret_cast<const char*>(m->data());
        key.append(data, data + sizeof(double) * m->size());
        key.push_back('|');
    }
    return key;
}

}  // namespace detail

/// Transversality data of a piecewise-linear triple: per-cell weights of the
/// third map, their sup over admissible cell pairs, and the rotation-aligned
/// transversality infimum. Admissible pairs are those whose third-map image
/// polytopes intersect, decided by linear feasibility.
struct TransversalityWeights {
    std::vector<double> rho1, rho2;
    double rho = 0.0;
    double gamma0 = 0.0;
    bool certified = true;  // false when the inner sup used random-restart ascent
    std::size_t admissible_pairs = 0;
};

inline TransversalityWeights transversality_weights(const PiecewiseLinearMap& phi1,
                                                    const PiecewiseLinearMap& phi2,
                                                    const PiecewiseLinearMap& phi3,
                                                    const DimensionSignature& sig,
                                                    const Gamma0Options& opts = {},
                                                    std::uint64_t seed = 2024) {
    require_shared_complex(phi1, phi2, phi3);
    if (phi1.target_dim() != sig.n1 || phi2.target_dim() != sig.n2 ||
        phi3.target_dim() != sig.n3)
        throw ScenarioError("transversality_weights: map target dimensions disagree with signature");

    const std::size_t cells = phi3.cell_count();
    TransversalityWeights out;
    auto rho = rho_weights(phi3, sig);
    out.rho1 = std::move(rho.rho1);
    out.rho2 = std::move(rho.rho2);

    // per-cell null frames; the spanning requirement is det > floor
    std::vector<Matrix> n1(cells), n2(cells), n3(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        n1[c] = null_frame(phi1.matrix(c)).columns();
        n2[c] = null_frame(phi2.matrix(c)).columns();
        n3[c] = null_frame(phi3.matrix(c)).columns();
        if (frame_triple_det(n1[c], n2[c], n3[c]) < opts.det_floor)
            throw NonSpanning("transversality_weights: null spaces fail to span at cell " +
                              std::to_string(c));
    }
    std::vector<Matrix> images(cells);
    for (std::size_t c = 0; c < cells; ++c) images[c] = phi3.image_vertices(c);

    Rng rng(seed);
    std::map<std::string, detail::RotationSup> cache;
    double gamma0 = std::numeric_limits<double>::infinity();
    double rho_sup = 0.0;
    for (std::size_t cx = 0; cx < cells; ++cx) {
        for (std::size_t cy = 0; cy < cells; ++cy) {
            if (cx != cy && !polytopes_intersect(images[cx], images[cy], opts.lp_tol)) continue;
            ++out.admissible_pairs;
            rho_sup = std::max(rho_sup, out.rho1[cx] * out.rho2[cy]);
            const std::string key = detail::matrix_key({&n1[cx], &n2[cy], &n3[cx], &n3[cy]});
            auto it = cache.find(key);
            if (it == cache.end()) {
                auto sup = detail::rotation_aligned_sup(n1[cx], n2[cy], n3[cx], n3[cy], opts, rng);
                it = cache.emplace(key, sup).first;
            }
            gamma0 = std::min(gamma0, it->second.value);
            out.certified = out.certified && it->second.certified;
        }
    }
    out.rho = rho_sup;
    out.gamma0 = gamma0;
    if (!(gamma0 >= opts.det_floor))
        throw NonTransversal("transversality_weights: gamma0 " + std::to_string(gamma0) +
                             " below floor");
    return out;
}

/// Weighted product integral over the shared complex by midpoint quadrature
/// at levels L and L+1: per cell the weight sqrt(|A1||A2||A3|) is constant.
struct BlIntegral {
    double value = 0.0;
    double value_coarse = 0.0;
    double rel_change = 0.0;
    bool converged = true;
    int level = 0;
};

inline BlIntegral bl_integral(const std::function<double(const Vector&)>& f1,
                              const std::function<double(const Vector&)>& f2,
                              const std::function<double(const Vector&)>& f3,
                              const PiecewiseLinearMap& phi1, const PiecewiseLinearMap& phi2,
                              const PiecewiseLinearMap& phi3, int level,
                              const Tolerances& tol = default_tolerances(), int threads = 1) {
    require_shared_complex(phi1, phi2, phi3);
    const std::size_t cells = phi1.cell_count();

    std::vector<double> weight(cells);
    for (std::size_t c = 0; c < cells; ++c)
        weight[c] = std::sqrt(gramian(phi1.matrix(c)) * gramian(phi2.matrix(c)) *
                              gramian(phi3.matrix(c)));

    auto level_value = [&](int lev) {
        return parallel_sum(cells, threads, [&](std::size_t c) {
            auto rule = midpoint_rule(phi1.cell(c), lev);
            double acc = 0.0;
            for (const auto& x : rule.nodes) {
                const double v =
                    f1(phi1.apply(c, x)) * f2(phi2.apply(c, x)) * f3(phi3.apply(c, x));
                if (v != 0.0) acc += rule.weight * v;
            }
            return weight[c] * acc;
        });
    };

    BlIntegral out;
    out.level = level;
    out.value_coarse = level_value(level);
    out.value = level_value(level + 1);
    const double scale = std::max({std::abs(out.value), std::abs(out.value_coarse), 1e-30});
    out.rel_change = std::abs(out.value - out.value_coarse) / scale;
    out.converged = out.rel_change <= tol.quadrature_convergence;
    return out;
}

// ---------------------------------------------------------------------------
// Linear verification: inequality, and the dual-basis equality construction
// ---------------------------------------------------------------------------

/// Null frames and gamma of a linear triple.
struct LinearTripleFrames {
    std::array<Frame, 3> v;
    double gamma = 0.0;
};

inline LinearTripleFrames linear_triple_frames(const Matrix& a1, const Matrix& a2,
                                               const Matrix& a3,
                                               double det_floor = default_tolerances().det_floor) {
    LinearTripleFrames out{{null_frame(a1), null_frame(a2), null_frame(a3)}, 0.0};
    out.gamma =
        frame_triple_det(out.v[0].columns(), out.v[1].columns(), out.v[2].columns());
    if (out.gamma < det_floor)
        throw SingularFrame("linear triple: |det V| below floor");
    return out;
}

/// Exact equality data of the dual-basis parallelepiped construction: the
/// image volumes vol(P_i) = |det(A_i [V_{i+1} V_{i-1}])| are computed as
/// independent determinants, so |lhs - rhs| probes the volume identity rather
/// than a tautology. lhs = prod |A_i|^{1/2} * gamma is the exact value of the
/// weighted integral for these indicators; rhs = gamma^{-1/2} prod vol(P_i)^{1/2}.
struct LinearBlEquality {
    double gamma = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    double rel_gap = 0.0;
    std::array<double, 3> image_volume{};
    std::array<Matrix, 3> image_edges;  // columns span P_i from the origin
};

inline LinearBlEquality check_linear_bl_equality(const Matrix& a1, const Matrix& a2,
                                                 const Matrix& a3) {
    auto frames = linear_triple_frames(a1, a2, a3);
    const std::array<const Matrix*, 3> maps{&a1, &a2, &a3};
    LinearBlEquality out;
    out.gamma = frames.gamma;

    double lhs = frames.gamma;
    double rhs = std::pow(frames.gamma, -0.5);
    for (int i = 0; i < 3; ++i) {
        const Matrix& v_next = frames.v[(i + 1) % 3].columns();
        const Matrix& v_prev = frames.v[(i + 2) % 3].columns();
        Matrix paired(v_next.rows(), v_next.cols() + v_prev.cols());
        paired << v_next, v_prev;
        Matrix b = (*maps[i]) * paired;  // n_i x n_i
        out.image_edges[i] = b;
        out.image_volume[i] = std::abs(b.determinant());
        lhs *= std::sqrt(gramian(*maps[i]));
        rhs *= std::sqrt(out.image_volume[i]);
    }
    out.lhs = lhs;
    out.rhs = rhs;
    out.rel_gap = std::abs(lhs - rhs) / rhs;
    return out;
}

/// Inequality check for a linear triple with grid densities: the weighted
/// integral is evaluated by quadrature over a box complex covering the
/// support preimage, and compared against gamma^{-1/2} times the norms.
struct LinearBlCheck {
    double gamma = 0.0;
    BlIntegral integral;
    std::array<double, 3> norms{};
    double lhs = 0.0;
    double rhs = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// Integration region for a linear triple: intersect the support-box
/// preimages in the dual-frame coordinates, then bound in x-space.
inline std::vector<Matrix> linear_support_complex(const std::array<const Matrix*, 3>& maps,
                                                  const std::array<Aabb, 3>& support,
                                                  const LinearTripleFrames& frames,
                                                  double inflate = 1e-9) {
    const int n = static_cast<int>(maps[0]->cols());
    Matrix v(n, n);
    v << frames.v[0].columns(), frames.v[1].columns(), frames.v[2].columns();

    const int c1 = static_cast<int>(frames.v[0].rank());
    const int c2 = static_cast<int>(frames.v[1].rank());
    const std::array<int, 3> offsets{0, c1, c1 + c2};
    const std::array<int, 3> sizes{c1, c2, n - c1 - c2};

    Vector lo = Vector::Constant(n, -std::numeric_limits<double>::infinity());
    Vector hi = Vector::Constant(n, std::numeric_limits<double>::infinity());
    for (int i = 0; i < 3; ++i) {
        const int bn = (i + 1) % 3;
        const int bp = (i + 2) % 3;
        Matrix paired(n, sizes[bn] + sizes[bp]);
        paired << frames.v[bn].columns(), frames.v[bp].columns();
        Matrix b = (*maps[i]) * paired;
        Eigen::PartialPivLU<Matrix> lu(b);
        const int ni = static_cast<int>(b.rows());
        // preimages of the support-box corners bound the two blocks
        Vector blk_lo = Vector::Constant(sizes[bn] + sizes[bp],
                                         std::numeric_limits<double>::infinity());
        Vector blk_hi = -blk_lo;
        const std::uint32_t corners = 1u << ni;
        Vector corner(ni);
        for (std::uint32_t mask = 0; mask < corners; ++mask) {
            for (int a = 0; a < ni; ++a)
                corner[a] = (mask >> a) & 1u ? support[i].hi[a] : support[i].lo[a];
            const Vector y = lu.solve(corner);
            blk_lo = blk_lo.cwiseMin(y);
            blk_hi = blk_hi.cwiseMax(y);
        }
        for (int a = 0; a < sizes[bn]; ++a) {
            lo[offsets[bn] + a] = std::max(lo[offsets[bn] + a], blk_lo[a]);
            hi[offsets[bn] + a] = std::min(hi[offsets[bn] + a], blk_hi[a]);
        }
        for (int a = 0; a < sizes[bp]; ++a) {
            lo[offsets[bp] + a] = std::max(lo[offsets[bp] + a], blk_lo[sizes[bn] + a]);
            hi[offsets[bp] + a] = std::min(hi[offsets[bp] + a], blk_hi[sizes[bn] + a]);
        }
    }
    for (int a = 0; a < n; ++a) {
        if (!(lo[a] < hi[a])) {  // empty or unbounded: degenerate support
            lo[a] = std::min(lo[a], 0.0) - inflate;
            hi[a] = std::max(hi[a], 0.0) + inflate;
        }
    }
    // map the dual-coordinate box to an ambient box
    Vector xlo = Vector::Constant(n, std::numeric_limits<double>::infinity());
    Vector xhi = -xlo;
    const std::uint32_t corners = 1u << n;
    Vector c(n);
    for (std::uint32_t mask = 0; mask < corners; ++mask) {
        for (int a = 0; a < n; ++a) c[a] = (mask >> a) & 1u ? hi[a] : lo[a];
        const Vector x = v * c;
        xlo = xlo.cwiseMin(x);
        xhi = xhi.cwiseMax(x);
    }
    xlo.array() -= inflate;
    xhi.array() += inflate;
    return box_complex(xlo, xhi);
}

inline PiecewiseLinearMap linear_map_on_complex(const Matrix& a, std::vector<Matrix> cells) {
    std::vector<Matrix> mats(cells.size(), a);
    std::vector<Vector> offs(cells.size(), Vector::Zero(a.rows()));
    return PiecewiseLinearMap(static_cast<int>(a.rows()), std::move(cells), std::move(mats),
                              std::move(offs));
}

inline LinearBlCheck check_linear_bl(const Matrix& a1, const Matrix& a2, const Matrix& a3,
                                     const GridDensity& f1, const GridDensity& f2,
                                     const GridDensity& f3, int level,
                                     double tolerance = default_tolerances().verify,
                                     const Tolerances& tol = default_tolerances(),
                                     int threads = 1) {
    auto frames = linear_triple_frames(a1, a2, a3, tol.det_floor);
    LinearBlCheck out;
    out.gamma = frames.gamma;
    out.tolerance = tolerance;
    out.norms = {f1.l2(), f2.l2(), f3.l2()};

    auto cells = linear_support_complex({&a1, &a2, &a3},
                                        {f1.support_box(), f2.support_box(), f3.support_box()},
                                        frames);
    auto phi1 = linear_map_on_complex(a1, cells);
    auto phi2 = linear_map_on_complex(a2, cells);
    auto phi3 = linear_map_on_complex(a3, cells);
    out.integral = bl_integral(f1.as_function(), f2.as_function(), f3.as_function(), phi1, phi2,
                               phi3, level, tol, threads);
    out.lhs = out.integral.value;
    out.rhs = std::pow(frames.gamma, -0.5) * out.norms[0] * out.norms[1] * out.norms[2];
    out.pass = out.lhs <= out.rhs * (1.0 + tolerance);
    return out;
}

// ---------------------------------------------------------------------------
// Nonlinear verification
// ---------------------------------------------------------------------------

struct NonlinearBlCheck {
    TransversalityWeights weights;
    BlIntegral integral;
    std::array<double, 3> norms{};
    double lhs = 0.0;
    double rhs = 0.0;
    double bound_constant = 0.0;  // sqrt(rho / gamma0)
    double tolerance = 0.0;
    bool pass = false;
};

inline NonlinearBlCheck check_nonlinear_bl(const PiecewiseLinearMap& phi1,
                                           const PiecewiseLinearMap& phi2,
                                           const PiecewiseLinearMap& phi3,
                                           const GridDensity& f1, const GridDensity& f2,
                                           const GridDensity& f3, const DimensionSignature& sig,
                                           int level,
                                           double tolerance = default_tolerances().verify,
                                           const Gamma0Options& opts = {},
                                           const Tolerances& tol = default_tolerances()) {
    NonlinearBlCheck out;
    out.tolerance = tolerance;
    out.weights = transversality_weights(phi1, phi2, phi3, sig, opts);
    out.norms = {f1.l2(), f2.l2(), f3.l2()};
    out.integral = bl_integral(f1.as_function(), f2.as_function(), f3.as_function(), phi1, phi2,
                               phi3, level, tol, opts.threads);
    out.lhs = out.integral.value;
    out.bound_constant = std::sqrt(out.weights.rho / out.weights.gamma0);
    out.rhs = out.bound_constant * out.norms[0] * out.norms[1] * out.norms[2];
    out.pass = out.lhs <= out.rhs * (1.0 + tolerance);
    return out;
}

}  // namespace transconv
