#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "transconv/config.hpp"
#include "transconv/errors.hpp"

namespace transconv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Stack-allocated variants for the hot loops; ambient dimension is capped at 8.
constexpr int kMaxDim = 8;
using MatN = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using VecN = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;

/// Gramian determinant of a wide matrix A (rows <= cols): sqrt(det(A A^T)),
/// the rows-dimensional volume of the parallelepiped spanned by the rows.
/// Computed as the product of singular values rather than an explicit
/// determinant of A A^T, which would square the condition number.
/// Rank-deficient input yields 0.
inline double gramian(const Matrix& a) {
    if (a.rows() > a.cols()) throw RankDeficient("gramian: expected rows <= cols");
    if (a.rows() == 0) return 1.0;
    Eigen::JacobiSVD<Matrix> svd(a);
    double p = 1.0;
    for (int i = 0; i < svd.singularValues().size(); ++i) p *= svd.singularValues()[i];
    return p;
}

/// Singular values of a wide matrix, ascending. Their product equals the
/// Gramian determinant of the matrix.
inline Vector singular_values(const Matrix& a) {
    if (a.rows() > a.cols()) throw RankDeficient("singular_values: expected rows <= cols");
    Eigen::JacobiSVD<Matrix> svd(a);
    const auto& s = svd.singularValues();  // Eigen returns them descending
    Vector out(s.size());
    for (int i = 0; i < s.size(); ++i) out[i] = s[s.size() - 1 - i];
    return out;
}

/// An n x k column-orthonormal matrix representing a tangent or normal basis.
class Frame {
public:
    Frame() = default;

    explicit Frame(Matrix columns, double orth_tol = default_tolerances().frame_orthonormality)
        : columns_(std::move(columns)) {
        const int n = static_cast<int>(columns_.rows());
        const int k = static_cast<int>(columns_.cols());
        if (k < 1 || k > n)
            throw RankDeficient("Frame: need 1 <= rank <= ambient dimension, got " +
                                std::to_string(k) + " columns in R^" + std::to_string(n));
        const double res = (columns_.transpose() * columns_ - Matrix::Identity(k, k))
                               .cwiseAbs()
                               .maxCoeff();
        if (res > orth_tol)
            throw RankDeficient("Frame: columns not orthonormal, residual " + std::to_string(res));
    }

    const Matrix& columns() const { return columns_; }
    int ambient_dim() const { return static_cast<int>(columns_.rows()); }
    int rank() const { return static_cast<int>(columns_.cols()); }

private:
    Matrix columns_;
};

/// Re-orthonormalizes a full-column-rank matrix (thin QR).
inline Frame orthonormalized_frame(const Matrix& a) {
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
    return Frame(std::move(q));
}

/// Orthonormal basis of the kernel of a full-rank wide matrix (m x n, m < n).
inline Frame null_frame(const Matrix& a, double rank_tol = default_tolerances().rank_rel) {
    const int m = static_cast<int>(a.rows());
    const int n = static_cast<int>(a.cols());
    if (m >= n) throw RankDeficient("null_frame: expected a strictly wide matrix");
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    if (s[m - 1] <= rank_tol * std::max(1.0, s[0]))
        throw RankDeficient("null_frame: numerical rank below row count");
    return Frame(svd.matrixV().rightCols(n - m));
}

/// Orthonormal completion of a frame: columns spanning its orthogonal complement.
inline Frame orthonormal_completion(const Frame& f) {
    const int n = f.ambient_dim();
    const int k = f.rank();
    if (k == n) throw RankDeficient("orthonormal_completion: frame already spans");
    Eigen::HouseholderQR<Matrix> qr(f.columns());
    Matrix q = qr.householderQ() * Matrix::Identity(n, n);
    return Frame(q.rightCols(n - k));
}

/// Ambient dimension n together with the three surface/image dimensions.
/// Codimensions must add up to n, i.e. n1 + n2 + n3 = 2n.
struct DimensionSignature {
    int n = 0;
    int n1 = 0, n2 = 0, n3 = 0;

    DimensionSignature() = default;
    DimensionSignature(int n_, int n1_, int n2_, int n3_) : n(n_), n1(n1_), n2(n2_), n3(n3_) {
        validate();
    }

    int dim(int i) const { return i == 1 ? n1 : (i == 2 ? n2 : n3); }
    int codim(int i) const { return n - dim(i); }

    void validate() const {
        if (n1 + n2 + n3 != 2 * n)
            throw ScenarioError("signature requires n1 + n2 + n3 = 2n, got (" + std::to_string(n1) +
                                "," + std::to_string(n2) + "," + std::to_string(n3) + ") in R^" +
                                std::to_string(n));
        for (int d : {n1, n2, n3})
            if (d <= 0 || d >= n)
                throw ScenarioError("signature requires 0 < n_i < n");
    }
};

/// Dual pair of concatenated bases: V = (V1,V2,V3) orthonormal per block,
/// W = (W1,W2,W3) with V^T W = id, and gamma = |det V| = |det W|^-1.
struct DualBasisTriple {
    std::array<Frame, 3> v;
    std::array<Matrix, 3> w;
    double gamma = 0.0;

    Matrix concat_v() const {
        const int n = v[0].ambient_dim();
        Matrix m(n, n);
        m << v[0].columns(), v[1].columns(), v[2].columns();
        return m;
    }
    Matrix concat_w() const {
        const int n = static_cast<int>(w[0].rows());
        Matrix m(n, n);
        m << w[0], w[1], w[2];
        return m;
    }
};

/// Computes the unique dual basis W with V^T W = id, partitioned conformally
/// with V. Throws SingularFrame when |det V| falls below the floor, which is
/// the numerical expression of a non-transversal configuration.
inline DualBasisTriple dual_basis(const Frame& v1, const Frame& v2, const Frame& v3,
                                  const DimensionSignature& sig,
                                  double det_floor = default_tolerances().det_floor) {
    const int n = sig.n;
    if (v1.ambient_dim() != n || v2.ambient_dim() != n || v3.ambient_dim() != n)
        throw ScenarioError("dual_basis: ambient dimension mismatch");
    if (v1.rank() != sig.codim(1) || v2.rank() != sig.codim(2) || v3.rank() != sig.codim(3))
        throw ScenarioError("dual_basis: frame ranks must equal the codimensions");

    Matrix v(n, n);
    v << v1.columns(), v2.columns(), v3.columns();
    Eigen::PartialPivLU<Matrix> lu(v);
    const double det = lu.determinant();
    if (std::abs(det) < det_floor)
        throw SingularFrame("dual_basis: |det V| = " + std::to_string(std::abs(det)) +
                            " below floor");

    // W = V^{-T}; solve instead of forming the inverse explicitly.
    Matrix w = v.transpose().lu().solve(Matrix::Identity(n, n));

    DualBasisTriple t;
    t.v = {v1, v2, v3};
    t.w = {w.leftCols(sig.codim(1)), w.middleCols(sig.codim(1), sig.codim(2)),
           w.rightCols(sig.codim(3))};
    t.gamma = std::abs(det);
    return t;
}

/// Residuals of the two dual-basis volume identities, for i = 1,2,3:
///   |(W_{i-1} W_{i+1})^T| * gamma = 1         (rel_w[i])
///   |(V_{i-1} V_{i+1})^T| = gamma * |W_i^T|   (rel_v[i])
/// Both are reported relative to the right-hand side.
struct DualBasisResiduals {
    std::array<double, 3> rel_w{};
    std::array<double, 3> rel_v{};

    double max() const {
        double m = 0.0;
        for (int i = 0; i < 3; ++i) m = std::max({m, rel_w[i], rel_v[i]});
        return m;
    }
};

inline DualBasisResiduals dual_basis_identities(const DualBasisTriple& t) {
    DualBasisResiduals r;
    for (int i = 0; i < 3; ++i) {
        const int prev = (i + 2) % 3;
        const int next = (i + 1) % 3;
        const Matrix& wp = t.w[prev];
        const Matrix& wn = t.w[next];
        Matrix w_pair(wp.rows(), wp.cols() + wn.cols());
        w_pair << wp, wn;
        r.rel_w[i] = std::abs(gramian(w_pair.transpose()) * t.gamma - 1.0);

        const Matrix& vp = t.v[prev].columns();
        const Matrix& vn = t.v[next].columns();
        Matrix v_pair(vp.rows(), vp.cols() + vn.cols());
        v_pair << vp, vn;
        const double lhs = gramian(v_pair.transpose());
        const double rhs = t.gamma * gramian(t.w[i].transpose());
        r.rel_v[i] = std::abs(lhs - rhs) / rhs;
    }
    return r;
}

/// |det(N1,N2,N3)| for three frames whose ranks add up to the ambient
/// dimension. With orthonormal blocks the value lies in [0, 1].
inline double frame_triple_det(const Matrix& n1, const Matrix& n2, const Matrix& n3) {
    const int n = static_cast<int>(n1.rows());
    MatN m(n, n);
    m << n1, n2, n3;
    return std::abs(m.determinant());
}

}  // namespace transconv
