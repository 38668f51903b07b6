#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "transconv/convolution.hpp"
#include "transconv/fiber.hpp"
#include "transconv/parallel.hpp"
#include "transconv/surface.hpp"

namespace transconv {

/// Discretization of the trilinear pairing: for every quadrature node on the
/// third surface a sparse block M_k with entries weight * fiber-volume over
/// facet pairs, so that  ||f1*f2||^2 = sum_k qw_k (f1^T M_k f2)^2  holds in
/// exactly the arithmetic conv_l2_norm uses at the same subdivision level.
struct DiscretizedOperator {
    struct Entry {
        int i = 0, j = 0;
        double value = 0.0;  // weight * fiber volume at the node
    };
    struct NodeBlock {
        double qw = 0.0;
        std::vector<Entry> entries;
    };
    std::vector<NodeBlock> nodes;
    std::vector<double> mass1, mass2;  // facet volumes (L2 masses)
    int level = 0;

    std::size_t count1() const { return mass1.size(); }
    std::size_t count2() const { return mass2.size(); }

    bool all_zero() const {
        for (const auto& n : nodes)
            if (!n.entries.empty()) return false;
        return true;
    }

    /// Quadrature norm of f1 * f2 via the tensor contraction.
    double contraction_norm(const std::vector<double>& f1, const std::vector<double>& f2) const {
        double acc = 0.0;
        for (const auto& node : nodes) {
            double v = 0.0;
            for (const auto& e : node.entries) v += e.value * f1[e.i] * f2[e.j];
            acc += node.qw * v * v;
        }
        return std::sqrt(std::max(0.0, acc));
    }
};

inline DiscretizedOperator discretize(const PolyhedralSurface& s1, const PolyhedralSurface& s2,
                                      const PolyhedralSurface& s3, int level,
                                      const Tolerances& tol = default_tolerances(),
                                      int threads = 1) {
    FiberEngine engine(s1, s2, tol);
    DiscretizedOperator op;
    op.level = level;
    op.mass1.reserve(s1.size());
    for (const auto& f : s1.facets) op.mass1.push_back(f.volume());
    op.mass2.reserve(s2.size());
    for (const auto& f : s2.facets) op.mass2.push_back(f.volume());

    std::vector<std::vector<DiscretizedOperator::NodeBlock>> per_facet(s3.size());
    parallel_chunks(s3.size(), threads, std::min<std::size_t>(s3.size(), 64),
                    [&](std::size_t, std::size_t begin, std::size_t end) {
                        std::vector<FiberPiece> pieces;
                        for (std::size_t fi = begin; fi < end; ++fi) {
                            const Facet& f = s3.facets[fi];
                            auto rule = midpoint_rule(f.domain(), level);
                            auto& blocks = per_facet[fi];
                            blocks.reserve(rule.nodes.size());
                            for (const auto& u : rule.nodes) {
                                DiscretizedOperator::NodeBlock block;
                                block.qw = rule.weight;
                                const Vector z = f.ambient_point(u);
                                auto prep = engine.prepare(engine.point_box(z));
                                pieces.clear();
                                engine.pieces_at(z, prep, pieces);
                                block.entries.reserve(pieces.size());
                                for (const auto& p : pieces)
                                    block.entries.push_back(
                                        {p.source1, p.source2, p.weight * p.volume});
                                blocks.push_back(std::move(block));
                            }
                        }
                    });
    for (auto& blocks : per_facet)
        for (auto& b : blocks) op.nodes.push_back(std::move(b));
    return op;
}

/// Outcome of the alternating maximization of the discretized ratio.
struct ExtremizerCertificate {
    std::vector<double> f1, f2;  // unit L2 norm against the facet masses
    double achieved_ratio = 0.0;
    double gamma0 = 0.0;
    double bound_three_halves = 0.0;
    double bound_half = 0.0;
    int iterations = 0;
    bool converged = false;
    bool monotone = true;
    bool within_bound = true;  // achieved_ratio <= bound_three_halves * (1 + 1e-6)
};

namespace detail {

/// Maximizes x^T G x subject to x^T diag(mass) x = 1 by warm-started power
/// iterations on the whitened matrix. G is entrywise nonnegative, so the
/// maximizer can be taken nonnegative. Returns the attained quadratic value.
inline double mass_constrained_argmax(const Matrix& g, const std::vector<double>& mass,
                                      std::vector<double>& x) {
    const int n = static_cast<int>(mass.size());
    Vector w(n);
    for (int i = 0; i < n; ++i) w[i] = x[i] * std::sqrt(mass[i]);
    const double nrm = w.norm();
    if (nrm > 0.0) w /= nrm;

    // whitened matrix applied implicitly: B = D^{-1/2} G D^{-1/2}
    Vector d_inv_sqrt(n);
    for (int i = 0; i < n; ++i) d_inv_sqrt[i] = 1.0 / std::sqrt(mass[i]);
    auto apply = [&](const Vector& v) {
        Vector t = d_inv_sqrt.cwiseProduct(v);
        Vector gt = g.selfadjointView<Eigen::Lower>() * t;
        return Vector(d_inv_sqrt.cwiseProduct(gt));
    };

    double quotient = w.dot(apply(w));
    for (int it = 0; it < 200; ++it) {
        Vector next = apply(w);
        const double nn = next.norm();
        if (nn <= 0.0) break;
        next /= nn;
        const double q = next.dot(apply(next));
        w = next;
        if (q - quotient <= 1e-13 * std::max(1.0, q)) {
            quotient = q;
            break;
        }
        quotient = q;
    }
    // nonnegative representative
    double pos = 0.0, neg = 0.0;
    for (int i = 0; i < n; ++i) {
        if (w[i] > 0) pos += w[i];
        if (w[i] < 0) neg -= w[i];
    }
    if (neg > pos) w = -w;
    for (int i = 0; i < n; ++i) x[i] = std::max(0.0, w[i]) * d_inv_sqrt[i];
    // renormalize in the mass inner product
    double norm2 = 0.0;
    for (int i = 0; i < n; ++i) norm2 += x[i] * x[i] * mass[i];
    const double s = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
    for (int i = 0; i < n; ++i) x[i] *= s;
    return quotient;
}

}  // namespace detail

/// Alternating eigen-steps on the nonnegative quadratic form: with f2 fixed,
/// the optimal f1 is the top mass-weighted eigenvector of
/// G = sum_k qw (M_k f2)(M_k f2)^T, and symmetrically. The ratio sequence is
/// nondecreasing; stagnation without reaching the tolerance is reported via
/// converged = false.
inline ExtremizerCertificate power_iterate(const DiscretizedOperator& op, double gamma0,
                                           std::uint64_t seed = 1, int max_iter = 10000,
                                           double tol = 1e-8) {
    ExtremizerCertificate cert;
    cert.gamma0 = gamma0;
    cert.bound_three_halves = std::pow(gamma0, -1.5);
    cert.bound_half = std::pow(gamma0, -0.5);
    const std::size_t n1 = op.count1(), n2 = op.count2();
    cert.f1.assign(n1, 0.0);
    cert.f2.assign(n2, 0.0);
    if (op.all_zero()) return cert;  // stagnates immediately at ratio 0

    Rng rng(seed);
    auto init = [&](std::vector<double>& f, const std::vector<double>& mass) {
        double norm2 = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            f[i] = 0.5 + rng.uniform();  // strictly positive start
            norm2 += f[i] * f[i] * mass[i];
        }
        const double s = 1.0 / std::sqrt(norm2);
        for (auto& v : f) v *= s;
    };
    init(cert.f1, op.mass1);
    init(cert.f2, op.mass2);

    Matrix g1(n1, n1), g2(n2, n2);
    double ratio = op.contraction_norm(cert.f1, cert.f2);
    Vector gk(std::max(n1, n2));
    std::vector<char> seen(std::max(n1, n2), 0);
    std::vector<int> support;

    // accumulate qw * g g^T (lower triangle) over the node's support
    auto accumulate = [&](Matrix& g, const DiscretizedOperator::NodeBlock& node, bool first,
                          const std::vector<double>& fixed) {
        support.clear();
        for (const auto& e : node.entries) {
            const int row = first ? e.i : e.j;
            const double contrib = e.value * fixed[first ? e.j : e.i];
            if (!seen[row]) {
                seen[row] = 1;
                support.push_back(row);
                gk[row] = 0.0;
            }
            gk[row] += contrib;
        }
        for (int a : support)
            for (int b : support)
                if (b <= a) g(a, b) += node.qw * gk[a] * gk[b];
        for (int r : support) seen[r] = 0;
    };

    for (int it = 0; it < max_iter; ++it) {
        g1.setZero();
        for (const auto& node : op.nodes) accumulate(g1, node, true, cert.f2);
        detail::mass_constrained_argmax(g1, op.mass1, cert.f1);

        g2.setZero();
        for (const auto& node : op.nodes) accumulate(g2, node, false, cert.f1);
        detail::mass_constrained_argmax(g2, op.mass2, cert.f2);

        const double next = op.contraction_norm(cert.f1, cert.f2);
        cert.iterations = it + 1;
        if (next + 1e-12 * std::max(1.0, ratio) < ratio) cert.monotone = false;
        const double change = std::abs(next - ratio) / std::max(next, 1e-30);
        ratio = std::max(ratio, next);
        if (change < tol) {
            cert.converged = true;
            break;
        }
    }
    cert.achieved_ratio = ratio;
    cert.within_bound = ratio <= cert.bound_three_halves * (1.0 + 1e-6);
    return cert;
}

/// One row of the open-question sweep.
struct SweepRow {
    double gamma0 = 0.0;
    double ratio = 0.0;
    double bound_half = 0.0;
    double bound_three_halves = 0.0;
    bool converged = false;
    int iterations = 0;
    int level = 0;
    std::string status = "ok";
};

struct SweepOptions {
    int refine_level = 3;  // density resolution on the first two surfaces
    int node_level = 3;    // quadrature nodes on the third surface
    int max_iter = 10000;
    double tol = 1e-8;
    std::uint64_t seed = 1;
    int threads = 1;
    Tolerances tolerances = default_tolerances();
};

/// Extremal-ratio sweep across a scenario family parametrized by the
/// transversality knob. Per-row failures are recorded in the status column
/// and the sweep continues.
inline std::vector<SweepRow> constant_sweep(
    const std::function<ConvTriple(double)>& family, const std::vector<double>& gamma_grid,
    const SweepOptions& opts = {}) {
    std::vector<SweepRow> rows;
    for (double knob : gamma_grid) {
        SweepRow row;
        row.level = opts.refine_level;
        try {
            ConvTriple t = family(knob);
            const double gamma0 =
                transversality_gamma0(t.s1, t.s2, t.s3, opts.tolerances.det_floor, opts.threads);
            PolyhedralSurface s1 = opts.refine_level > 0 ? refine(t.s1, opts.refine_level) : t.s1;
            PolyhedralSurface s2 = opts.refine_level > 0 ? refine(t.s2, opts.refine_level) : t.s2;
            auto op = discretize(s1, s2, t.s3, opts.node_level, opts.tolerances, opts.threads);
            auto cert =
                power_iterate(op, gamma0, opts.seed, opts.max_iter, opts.tol);
            row.gamma0 = gamma0;
            row.ratio = cert.achieved_ratio;
            row.bound_half = cert.bound_half;
            row.bound_three_halves = cert.bound_three_halves;
            row.converged = cert.converged;
            row.iterations = cert.iterations;
            if (!cert.within_bound) row.status = "BoundExceeded";
        } catch (const NonTransversal&) {
            row.status = "NonTransversal";
        } catch (const Error& e) {
            row.status = std::string("error: ") + e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace transconv
