#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "transconv/config.hpp"
#include "transconv/linalg.hpp"

namespace transconv {

/// Phase-1 simplex: decides whether {x >= 0 : A x = b} is nonempty by
/// minimizing the sum of artificial variables. Bland's rule, dense tableau;
/// the systems arising here have at most a dozen rows. A tiny solver is used
/// on purpose: the environment provides no LP library and the feasibility
/// queries are structurally trivial.
inline bool linear_feasible(const Matrix& a, const Vector& b,
                            double tol = default_tolerances().lp_feasibility) {
    const int m = static_cast<int>(a.rows());
    const int n = static_cast<int>(a.cols());
    if (m == 0) return true;

    const double scale = std::max(1.0, std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()));
    const double eps = tol * scale;

    // Tableau [A | I | b] with rows flipped so b >= 0; last row holds reduced
    // costs and the negated objective.
    Matrix t(m + 1, n + m + 1);
    t.setZero();
    for (int i = 0; i < m; ++i) {
        const double s = b[i] < 0.0 ? -1.0 : 1.0;
        t.block(i, 0, 1, n) = s * a.row(i);
        t(i, n + i) = 1.0;
        t(i, n + m) = s * b[i];
    }
    for (int j = 0; j < n; ++j) t(m, j) = -t.block(0, j, m, 1).sum();
    t(m, n + m) = -t.block(0, n + m, m, 1).sum();

    std::vector<int> basis(m);
    for (int i = 0; i < m; ++i) basis[i] = n + i;

    const int max_iters = 400 * (n + m);
    for (int iter = 0; iter < max_iters; ++iter) {
        int enter = -1;
        for (int j = 0; j < n + m; ++j) {
            if (t(m, j) < -eps) {
                enter = j;
                break;  // Bland: smallest eligible index
            }
        }
        if (enter < 0) break;

        int leave = -1;
        double best_ratio = 0.0;
        for (int i = 0; i < m; ++i) {
            if (t(i, enter) > eps) {
                const double ratio = t(i, n + m) / t(i, enter);
                if (leave < 0 || ratio < best_ratio - 1e-15 ||
                    (std::abs(ratio - best_ratio) <= 1e-15 && basis[i] < basis[leave])) {
                    leave = i;
                    best_ratio = ratio;
                }
            }
        }
        if (leave < 0) break;  // unbounded cannot happen in phase 1; bail out

        t.row(leave) /= t(leave, enter);
        for (int i = 0; i <= m; ++i) {
            if (i == leave) continue;
            const double f = t(i, enter);
            if (f != 0.0) t.row(i) -= f * t.row(leave);
        }
        basis[leave] = enter;
    }
    return -t(m, n + m) <= eps;
}

/// Nonemptiness of {x in conv(P), y in conv(Q) : x + y in conv(R)} where the
/// arguments are (dim x count) vertex matrices of compact polytopes.
/// Variables are the three barycentric weight vectors.
inline bool sum_meets(const Matrix& p, const Matrix& q, const Matrix& r,
                      double tol = default_tolerances().lp_feasibility) {
    const int n = static_cast<int>(p.rows());
    const int np = static_cast<int>(p.cols());
    const int nq = static_cast<int>(q.cols());
    const int nr = static_cast<int>(r.cols());
    Matrix a = Matrix::Zero(n + 3, np + nq + nr);
    Vector b = Vector::Zero(n + 3);
    a.block(0, 0, n, np) = p;
    a.block(0, np, n, nq) = q;
    a.block(0, np + nq, n, nr) = -r;
    a.block(n, 0, 1, np).setOnes();
    a.block(n + 1, np, 1, nq).setOnes();
    a.block(n + 2, np + nq, 1, nr).setOnes();
    b[n] = b[n + 1] = b[n + 2] = 1.0;
    return linear_feasible(a, b, tol);
}

/// Nonemptiness of conv(P) intersect conv(Q).
inline bool polytopes_intersect(const Matrix& p, const Matrix& q,
                                double tol = default_tolerances().lp_feasibility) {
    const int n = static_cast<int>(p.rows());
    const int np = static_cast<int>(p.cols());
    const int nq = static_cast<int>(q.cols());
    Matrix a = Matrix::Zero(n + 2, np + nq);
    Vector b = Vector::Zero(n + 2);
    a.block(0, 0, n, np) = p;
    a.block(0, np, n, nq) = -q;
    a.block(n, 0, 1, np).setOnes();
    a.block(n + 1, np, 1, nq).setOnes();
    b[n] = b[n + 1] = 1.0;
    return linear_feasible(a, b, tol);
}

/// Nonemptiness of {x in conv(P), y in conv(Q) : x + y in conv(R)} with an
/// interiority margin: all barycentric weights at least delta. Used for the
/// pairwise facet-overlap validation.
inline bool polytopes_overlap_interior(const Matrix& p, const Matrix& q, double delta,
                                       double tol = default_tolerances().lp_feasibility) {
    // substitute lambda = delta + s, s >= 0
    const int n = static_cast<int>(p.rows());
    const int np = static_cast<int>(p.cols());
    const int nq = static_cast<int>(q.cols());
    Matrix a = Matrix::Zero(n + 2, np + nq);
    Vector b = Vector::Zero(n + 2);
    a.block(0, 0, n, np) = p;
    a.block(0, np, n, nq) = -q;
    a.block(n, 0, 1, np).setOnes();
    a.block(n + 1, np, 1, nq).setOnes();
    b[n] = 1.0 - delta * np;
    b[n + 1] = 1.0 - delta * nq;
    if (b[n] < 0.0 || b[n + 1] < 0.0) return false;
    Vector shift = delta * (p.rowwise().sum() - q.rowwise().sum());
    b.head(n) = -shift;
    return linear_feasible(a, b, tol);
}

}  // namespace transconv
