#pragma once

#include <array>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "knadi/errors.hpp"
#include "knadi/types.hpp"

namespace knadi {

// Tall block Z representing the symmetric semidefinite matrix Z Z^T.
// Columns grow only by concatenation; nothing is truncated implicitly.
struct LowRankFactor {
    Mat Z;

    LowRankFactor() = default;
    explicit LowRankFactor(Mat Z_) : Z(std::move(Z_)) {}
    Eigen::Index rank_bound() const { return Z.cols(); }
    Eigen::Index rows() const { return Z.rows(); }
};

// Pair (U, signature) representing the indefinite symmetric matrix U D U^T
// with D = diag(signature); positive columns always come first.
struct SignedResidualFactor {
    Mat U;
    int n_pos = 0;

    SignedResidualFactor() = default;
    SignedResidualFactor(Mat U_, int n_pos_) : U(std::move(U_)), n_pos(n_pos_) {
        if (n_pos < 0 || n_pos > U.cols())
            throw DimensionMismatch("SignedResidualFactor: n_pos out of range");
    }

    int n_neg() const { return static_cast<int>(U.cols()) - n_pos; }
    Vec signature() const {
        Vec d(U.cols());
        d.head(n_pos).setOnes();
        d.tail(n_neg()).setConstant(-1.0);
        return d;
    }
    Mat positive_part() const { return U.leftCols(n_pos); }
    Mat negative_part() const { return U.rightCols(n_neg()); }
};

namespace detail {

// trace((T D)^2) for diagonal D of signs; T = U^T U.
inline double trace_td_squared(const Mat& T, const Vec& d) {
    const Eigen::Index r = T.rows();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < r; ++j)
            acc += T(i, j) * d(j) * T(j, i) * d(i);
    return acc;
}

}  // namespace detail

// || U D U^T || from the r x r Gram matrix only; the n_v x n_v product is
// never formed (peak dense temporary is r x r).
inline double gram_norm(const SignedResidualFactor& f, NormKind kind) {
    if (f.U.cols() == 0) return 0.0;
    Mat T = f.U.transpose() * f.U;
    Vec d = f.signature();
    if (kind == NormKind::frobenius)
        return std::sqrt(std::max(0.0, detail::trace_td_squared(T, d)));
    // Spectral: eigenvalues of U D U^T coincide with those of the symmetric
    // matrix T^{1/2} D T^{1/2}.
    Eigen::SelfAdjointEigenSolver<Mat> es(T);
    Vec lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Mat half = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    Mat S = half * d.asDiagonal() * half;
    Eigen::SelfAdjointEigenSolver<Mat> es2(S);
    return es2.eigenvalues().cwiseAbs().maxCoeff();
}

// || W W^T || for an all-positive factor.
inline double gram_norm(const Mat& W, NormKind kind) {
    return gram_norm(SignedResidualFactor(W, static_cast<int>(W.cols())), kind);
}

// phi(xi) = || (1-xi) N1 + xi N2 - xi^2 N3 ||_F^2 as a quartic in xi,
// with N1 = U D U^T, N2 = W~ W~^T, N3 = dK~ dK~^T.
struct LineSearchPolynomial {
    std::array<double, 5> c{};  // phi(xi) = c0 + c1 xi + ... + c4 xi^4

    double eval(double xi) const {
        return c[0] + xi * (c[1] + xi * (c[2] + xi * (c[3] + xi * c[4])));
    }
    double derivative(double xi) const {
        return c[1] + xi * (2.0 * c[2] + xi * (3.0 * c[3] + xi * 4.0 * c[4]));
    }
};

// Coefficients from pairwise trace inner products of the three low-rank
// terms; cost is independent of n_v beyond the Gram products themselves.
inline LineSearchPolynomial build_line_search_poly(const SignedResidualFactor& R,
                                                   const Mat& W, const Mat& dK) {
    const Vec d = R.signature();

    auto signed_cross = [&](const Mat& Y) {
        // trace(U D U^T * Y Y^T) = sum_i d_i ||row_i(U^T Y)||^2
        if (R.U.cols() == 0 || Y.cols() == 0) return 0.0;
        Mat H = R.U.transpose() * Y;
        double acc = 0.0;
        for (Eigen::Index i = 0; i < H.rows(); ++i) acc += d(i) * H.row(i).squaredNorm();
        return acc;
    };
    auto plain_cross = [](const Mat& X, const Mat& Y) {
        // trace(X X^T Y Y^T) = ||X^T Y||_F^2
        if (X.cols() == 0 || Y.cols() == 0) return 0.0;
        return (X.transpose() * Y).squaredNorm();
    };

    const double a11 = R.U.cols() == 0 ? 0.0
                       : detail::trace_td_squared(Mat(R.U.transpose() * R.U), d);
    const double a12 = signed_cross(W);
    const double a13 = signed_cross(dK);
    const double a22 = plain_cross(W, W);
    const double a23 = plain_cross(W, dK);
    const double a33 = plain_cross(dK, dK);

    LineSearchPolynomial p;
    p.c[0] = a11;
    p.c[1] = 2.0 * (a12 - a11);
    p.c[2] = a11 - 2.0 * a12 + a22 - 2.0 * a13;
    p.c[3] = 2.0 * (a13 - a23);
    p.c[4] = a33;
    return p;
}

// U^{(k+1)} = [ sqrt(1-xi) W_old | sqrt(xi) W~ || sqrt(1-xi) dK_old | xi dK~ ]
// with signs [+...+, -...-]; at xi = 1 the (1-xi) columns are not emitted.
inline SignedResidualFactor combine_after_step(const SignedResidualFactor& R_old, const Mat& W,
                                               const Mat& dK_old, const Mat& dK, double xi) {
    if (!(xi > 0.0 && xi <= 1.0)) throw InvalidSpec("combine_after_step: xi must be in (0,1]");
    const Mat W_old = R_old.positive_part();
    if (xi == 1.0) {
        Mat U(W.rows(), W.cols() + dK.cols());
        U << W, dK;
        return SignedResidualFactor(std::move(U), static_cast<int>(W.cols()));
    }
    const double s_old = std::sqrt(1.0 - xi);
    const double s_new = std::sqrt(xi);
    Mat U(W.rows(), W_old.cols() + W.cols() + dK_old.cols() + dK.cols());
    U << s_old * W_old, s_new * W, s_old * dK_old, xi * dK;
    return SignedResidualFactor(std::move(U), static_cast<int>(W_old.cols() + W.cols()));
}

// Z^{(k+1)} = [sqrt(1-xi) Z_old, sqrt(xi) Z~]; represents (1-xi) X_old + xi X~.
inline LowRankFactor concat_solution(const LowRankFactor& Z_old, const LowRankFactor& Z_new, double xi) {
    if (!(xi > 0.0 && xi <= 1.0)) throw InvalidSpec("concat_solution: xi must be in (0,1]");
    if (xi == 1.0) return Z_new;
    Mat Z(Z_new.rows(), Z_old.Z.cols() + Z_new.Z.cols());
    Z << std::sqrt(1.0 - xi) * Z_old.Z, std::sqrt(xi) * Z_new.Z;
    return LowRankFactor(std::move(Z));
}

// Optional rank compression (off by default; the core algorithm never
// truncates). Exact up to the drop tolerance: U D U^T is re-expressed
// through a thin QR and a small eigendecomposition.
inline SignedResidualFactor compress(const SignedResidualFactor& f, double drop_tol = 1e-14) {
    if (f.U.cols() == 0) return f;
    Eigen::HouseholderQR<Mat> qr(f.U);
    const Eigen::Index r = std::min(f.U.rows(), f.U.cols());
    Mat Q = qr.householderQ() * Mat::Identity(f.U.rows(), r);
    Mat R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    Mat S = R * f.signature().asDiagonal() * R.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()));
    const Vec lam = es.eigenvalues();
    const double cut = drop_tol * lam.cwiseAbs().maxCoeff();
    std::vector<Eigen::Index> pos, neg;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (lam(i) > cut) pos.push_back(i);
        else if (lam(i) < -cut) neg.push_back(i);
    }
    Mat U(f.U.rows(), pos.size() + neg.size());
    Eigen::Index col = 0;
    for (Eigen::Index i : pos) U.col(col++) = Q * es.eigenvectors().col(i) * std::sqrt(lam(i));
    for (Eigen::Index i : neg) U.col(col++) = Q * es.eigenvectors().col(i) * std::sqrt(-lam(i));
    return SignedResidualFactor(std::move(U), static_cast<int>(pos.size()));
}

inline LowRankFactor compress(const LowRankFactor& f, double drop_tol = 1e-14) {
    if (f.Z.cols() == 0) return f;
    SignedResidualFactor c = compress(SignedResidualFactor(f.Z, static_cast<int>(f.Z.cols())), drop_tol);
    return LowRankFactor(c.positive_part());
}

}  // namespace knadi
