#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "knadi/dae_system.hpp"
#include "knadi/errors.hpp"
#include "knadi/saddle.hpp"
#include "knadi/types.hpp"

// Dense brute-force references for desk-scale verification: explicit
// projectors, direct Lyapunov and Riccati solves, pencil eigenvalue
// certificates, and a complex-arithmetic ADI recurrence. Nothing here is
// meant to scale; everything here is meant to be obviously right.

namespace knadi {

// Explicit Pi = I - G (G^T M^{-1} G)^{-1} G^T M^{-1}.
inline Mat dense_pi(const DaeSystem& sys, int dense_cap = 1000) {
    if (sys.n_v > dense_cap) throw TooLarge("dense_pi: n_v exceeds dense cap");
    if (sys.n_p == 0) return Mat::Identity(sys.n_v, sys.n_v);
    Mat Md = Mat(sys.M);
    Mat Gd = Mat(sys.G);
    Eigen::LLT<Mat> llt(Md);
    if (llt.info() != Eigen::Success) throw SingularSaddlePoint("dense_pi: M not SPD");
    Mat MinvG = llt.solve(Gd);
    Mat S = Gd.transpose() * MinvG;
    return Mat::Identity(sys.n_v, sys.n_v) - Gd * S.ldlt().solve(MinvG.transpose());
}

// Projected system through an explicit factorization Pi = Theta_l Theta_r^T
// with Theta_l^T Theta_r = I. Theta_r is an orthonormal basis of null(G^T);
// this choice is valid since null(Pi) = range(G) gives Pi Theta_r Theta_r^T = Pi.
struct DenseProjectedSystem {
    Mat Theta_r, Theta_l;  // n_v x (n_v - n_p)
    Mat Mp, Ap, Bp, Cp;    // Theta_r^T M Theta_r, ..., alpha folded into Cp
    Mat MTheta_r;          // M Theta_r, maps projected solutions back to feedback
};

inline DenseProjectedSystem build_theta(const DaeSystem& sys, int dense_cap = 1000) {
    if (sys.n_v > dense_cap) throw TooLarge("build_theta: n_v exceeds dense cap");
    const int n = sys.n_v - sys.n_p;
    DenseProjectedSystem out;
    if (sys.n_p == 0) {
        out.Theta_r = Mat::Identity(sys.n_v, sys.n_v);
    } else {
        Mat Gt = Mat(sys.G).transpose();
        Eigen::BDCSVD<Mat> svd(Gt, Eigen::ComputeFullV);
        out.Theta_r = svd.matrixV().rightCols(n);
    }
    out.Theta_l = dense_pi(sys, dense_cap) * out.Theta_r;
    Mat Md = Mat(sys.M);
    out.Mp = out.Theta_r.transpose() * Md * out.Theta_r;
    out.Ap = out.Theta_r.transpose() * Mat(sys.A) * out.Theta_r;
    out.Bp = out.Theta_r.transpose() * sys.B;
    out.Cp = scaled_output(sys) * out.Theta_r;
    out.MTheta_r = Md * out.Theta_r;
    return out;
}

// ---------------------------------------------------------------------------
// Dense generalized Lyapunov solvers for A^T X M + M X A + Q = 0, X = X^T.

// Vectorized Kronecker route; simplest possible statement of the equation.
inline Mat lyap_dense_kron(const Mat& A, const Mat& M, const Mat& Q) {
    const int n = static_cast<int>(A.rows());
    if (n > 60) throw TooLarge("lyap_dense_kron: n^2 x n^2 system too big");
    Mat big(n * n, n * n);
    // vec(A^T X M) = kron(M, A^T) vec X, vec(M X A) = kron(A^T, M) vec X with M = M^T.
    Mat At = A.transpose();
    for (int jb = 0; jb < n; ++jb)
        for (int ib = 0; ib < n; ++ib) {
            big.block(ib * n, jb * n, n, n) = M(jb, ib) * At;  // (M^T)_{ib,jb} = M_{jb,ib}
            big.block(ib * n, jb * n, n, n) += At(ib, jb) * M;
        }
    Eigen::PartialPivLU<Mat> lu(big);
    Vec vecQ(n * n);
    for (int j = 0; j < n; ++j) vecQ.segment(j * n, n) = -Q.col(j);
    Vec vecX = lu.solve(vecQ);
    Mat X(n, n);
    for (int j = 0; j < n; ++j) X.col(j) = vecX.segment(j * n, n);
    return 0.5 * (X + X.transpose());
}

// Cholesky reduction to a standard equation plus complex-Schur back
// substitution; the fast path for n beyond Kronecker reach.
inline Mat lyap_dense_schur(const Mat& A, const Mat& M, const Mat& Q) {
    const int n = static_cast<int>(A.rows());
    Eigen::LLT<Mat> llt(M);
    if (llt.info() != Eigen::Success) throw SingularSaddlePoint("lyap_dense_schur: M not SPD");
    Mat L = llt.matrixL();
    auto lower = L.triangularView<Eigen::Lower>();
    // Atil = L^{-1} A L^{-T}, Qtil = L^{-1} Q L^{-T}
    Mat Atil = lower.solve(A);
    Atil = lower.solve(Atil.transpose()).transpose();
    Mat Qtil = lower.solve(Q);
    Qtil = lower.solve(Qtil.transpose()).transpose();

    // Solve F^T Y + Y F + Qtil = 0 via the complex Schur form of F^T.
    Eigen::ComplexSchur<CMat> schur(n);
    schur.compute(Atil.transpose().cast<Complex>());
    if (schur.info() != Eigen::Success) throw Error("lyap_dense_schur: Schur iteration failed");
    const CMat U = schur.matrixU();
    const CMat T = schur.matrixT();
    CMat S = U.adjoint() * Qtil.cast<Complex>() * U;
    CMat Y = CMat::Zero(n, n);
    for (int j = n - 1; j >= 0; --j) {
        CVec rhs = -S.col(j);
        for (int k = j + 1; k < n; ++k) rhs -= std::conj(T(j, k)) * Y.col(k);
        CMat shifted = T + std::conj(T(j, j)) * CMat::Identity(n, n);
        Y.col(j) = shifted.triangularView<Eigen::Upper>().solve(rhs);
    }
    Mat Yr = (U * Y * U.adjoint()).real();
    Yr = 0.5 * (Yr + Yr.transpose());
    // X = L^{-T} Y L^{-1}
    auto upperT = L.transpose().triangularView<Eigen::Upper>();
    Mat X = upperT.solve(Yr);
    X = upperT.solve(X.transpose()).transpose();
    return 0.5 * (X + X.transpose());
}

inline Mat lyap_dense(const Mat& A, const Mat& M, const Mat& Q) {
    return A.rows() <= 40 ? lyap_dense_kron(A, M, Q) : lyap_dense_schur(A, M, Q);
}

// ---------------------------------------------------------------------------
// Finite spectrum of ([A - B K^T, G; G^T, 0], [M, 0; 0, 0]).
inline std::vector<Complex> pencil_eigenvalues(const DaeSystem& sys, const Mat& K, int dense_cap = 1000) {
    const int n = sys.n_v + sys.n_p;
    if (n > dense_cap) throw TooLarge("pencil_eigenvalues: dimension exceeds dense cap");
    Mat bA = Mat::Zero(n, n);
    bA.topLeftCorner(sys.n_v, sys.n_v) = Mat(sys.A) - sys.B * K.transpose();
    if (sys.n_p > 0) {
        bA.topRightCorner(sys.n_v, sys.n_p) = Mat(sys.G);
        bA.bottomLeftCorner(sys.n_p, sys.n_v) = Mat(sys.G).transpose();
    }
    Mat bM = Mat::Zero(n, n);
    bM.topLeftCorner(sys.n_v, sys.n_v) = Mat(sys.M);

    Eigen::GeneralizedEigenSolver<Mat> ges;
    ges.compute(bA, bM, false);
    const double inf_cut = 1.0 / std::sqrt(std::numeric_limits<double>::epsilon());
    std::vector<Complex> finite;
    for (int i = 0; i < n; ++i) {
        const Complex a = ges.alphas()(i);
        const double b = ges.betas()(i);
        if (b == 0.0) continue;
        const Complex lam = a / b;
        if (std::abs(lam) > inf_cut) continue;
        finite.push_back(lam);
    }
    return finite;
}

inline double max_real(const std::vector<Complex>& eigs) {
    double m = -std::numeric_limits<double>::infinity();
    for (const Complex& e : eigs) m = std::max(m, e.real());
    return m;
}

// ---------------------------------------------------------------------------
// Dense projected Kleinman-Newton with direct Lyapunov solves.

struct CareResult {
    Mat X;                    // projected stabilizing solution (n x n)
    Mat K;                    // velocity-space feedback M Theta_r X Theta_r^T B
    std::vector<Mat> iterates;
    int newton_steps = 0;
    double residual = 0.0;    // absolute Frobenius residual of the projected GCARE
};

inline double dense_projected_residual_norm(const DenseProjectedSystem& p, const Mat& X) {
    Mat R = p.Cp.transpose() * p.Cp + p.Ap.transpose() * X * p.Mp + p.Mp * X * p.Ap -
            p.Mp * X * p.Bp * (p.Bp.transpose() * X * p.Mp);
    return R.norm();
}

inline CareResult dense_care_solve(const DenseProjectedSystem& proj, const Mat& K0,
                                   double rel_tol = 1e-12, int max_iter = 100) {
    const int n = static_cast<int>(proj.Ap.rows());
    Mat Kp = K0.transpose() * proj.Theta_r;  // n_u x n
    const Mat CtC = proj.Cp.transpose() * proj.Cp;
    const double scale = CtC.norm();

    CareResult out;
    for (int it = 0; it < max_iter; ++it) {
        Mat Acl = proj.Ap - proj.Bp * Kp;
        Mat Q = CtC + Kp.transpose() * Kp;
        Mat X = lyap_dense(Acl, proj.Mp, Q);
        if (!X.allFinite()) throw NotStabilizable("dense_care_solve: Lyapunov solve produced non-finite values");
        Kp = proj.Bp.transpose() * X * proj.Mp;
        out.iterates.push_back(X);
        out.newton_steps = it + 1;
        out.residual = dense_projected_residual_norm(proj, X);
        if (out.residual <= rel_tol * scale) {
            out.X = X;
            out.K = proj.MTheta_r * X * proj.Bp;
            return out;
        }
    }
    throw NotStabilizable("dense_care_solve: no convergence within iteration cap");
}

// Matrix-sign bootstrap for a stabilizing feedback when none is known.
// Reduces the projected GCARE to a standard CARE through M = L L^T and takes
// the stable invariant subspace of the Hamiltonian via the sign function.
inline Mat stabilizing_feedback_sign(const DenseProjectedSystem& proj) {
    const int n = static_cast<int>(proj.Ap.rows());
    Eigen::LLT<Mat> llt(proj.Mp);
    if (llt.info() != Eigen::Success) throw SingularSaddlePoint("stabilizing_feedback_sign: Mp not SPD");
    Mat L = llt.matrixL();
    auto lower = L.triangularView<Eigen::Lower>();
    Mat Atil = lower.solve(proj.Ap);
    Atil = lower.solve(Atil.transpose()).transpose();
    Mat Btil = lower.solve(proj.Bp);
    Mat Ctil = lower.solve(proj.Cp.transpose()).transpose();

    Mat H(2 * n, 2 * n);
    H.topLeftCorner(n, n) = Atil;
    H.topRightCorner(n, n) = -Btil * Btil.transpose();
    H.bottomLeftCorner(n, n) = -Ctil.transpose() * Ctil;
    H.bottomRightCorner(n, n) = -Atil.transpose();

    Mat Z = H;
    for (int it = 0; it < 100; ++it) {
        Mat Zinv = Z.inverse();
        double c = std::sqrt(Zinv.norm() / Z.norm());
        Mat Znext = 0.5 * (c * Z + Zinv / c);
        double delta = (Znext - Z).norm() / Z.norm();
        Z = Znext;
        if (delta < 1e-14) break;
    }
    Mat P = 0.5 * (Mat::Identity(2 * n, 2 * n) - Z);  // projector onto the stable subspace
    Eigen::ColPivHouseholderQR<Mat> qr(P);
    Mat Qfull = qr.householderQ();
    Mat V = Qfull.leftCols(n);
    Mat V1 = V.topRows(n), V2 = V.bottomRows(n);
    Eigen::FullPivLU<Mat> v1lu(V1);
    if (!v1lu.isInvertible()) throw NotStabilizable("stabilizing_feedback_sign: singular subspace basis");
    Mat Xhat = V2 * v1lu.solve(Mat::Identity(n, n));
    Xhat = 0.5 * (Xhat + Xhat.transpose());
    // X = L^{-T} Xhat L^{-1} in projected coordinates
    auto upperT = L.transpose().triangularView<Eigen::Upper>();
    Mat X = upperT.solve(Xhat);
    X = upperT.solve(X.transpose()).transpose();
    return proj.MTheta_r * X * proj.Bp;
}

// ---------------------------------------------------------------------------
// Dense residual assemblies used by tests and the explicit benchmark setups.

// Velocity-space Riccati residual Pi [a^2 C^T C + A^T X M + M X A - M X B B^T X M] Pi^T
// for an iterate X supported on the constraint manifold.
inline Mat dense_velocity_residual(const DaeSystem& sys, const Mat& X, int dense_cap = 1000) {
    Mat Pi = dense_pi(sys, dense_cap);
    Mat Ca = scaled_output(sys);
    Mat Md = Mat(sys.M), Ad = Mat(sys.A);
    Mat inner = Ca.transpose() * Ca + Ad.transpose() * X * Md + Md * X * Ad -
                Md * X * sys.B * (sys.B.transpose() * X * Md);
    return Pi * inner * Pi.transpose();
}

// Velocity-space Lyapunov residual W0 W0^T + Pi [Acl^T X M + M X Acl] Pi^T for
// the closed loop Acl = A - B K^T; W0 must already be projected.
inline Mat dense_lyapunov_residual(const DaeSystem& sys, const Mat& K, const Mat& W0,
                                   const Mat& X, int dense_cap = 1000) {
    Mat Pi = dense_pi(sys, dense_cap);
    Mat Md = Mat(sys.M);
    Mat Acl = Mat(sys.A) - sys.B * K.transpose();
    Mat inner = Acl.transpose() * X * Md + Md * X * Acl;
    return W0 * W0.transpose() + Pi * inner * Pi.transpose();
}

// ---------------------------------------------------------------------------
// Complex-arithmetic low-rank residual ADI, one solve per shift, kept as the
// reference recurrence for the real shift-pair formulation and as the engine
// of the classical benchmark setup.
class ComplexAdiRef {
  public:
    ComplexAdiRef(const DaeSystem& sys, const Mat& K, const Mat& W0)
        : sys_(sys), K_(K), W_(W0.cast<Complex>()), Z_(W0.rows(), 0) {}

    // One ADI step with shift q (either member of a conjugate pair).
    void step(Complex q) {
        if (q.real() >= 0.0) throw InvalidSpec("ComplexAdiRef: shift must be stable");
        CMat V;
        if (q.imag() == 0.0) {
            const ClosedLoopSolver& s = pack(q);  // real handle, solve parts separately
            V = s.solve(Mat(W_.real())).cast<Complex>();
            V += Complex(0, 1) * s.solve(Mat(W_.imag())).cast<Complex>();
        } else {
            const ClosedLoopSolver& s = pack(Complex(q.real(), std::abs(q.imag())));
            if (q.imag() > 0.0) {
                V = s.solve(W_);
            } else {
                V = s.solve(CMat(W_.conjugate())).conjugate();
            }
        }
        W_ -= 2.0 * q.real() * (sys_.Mrow * V);
        CMat Vt = std::sqrt(Complex(-2.0 * q.real(), 0.0)) * V;
        CMat Znew(Z_.rows(), Z_.cols() + Vt.cols());
        Znew << Z_, Vt;
        Z_ = std::move(Znew);
        ++steps_;
        ++solves_;
    }

    const CMat& W() const { return W_; }
    const CMat& Z() const { return Z_; }
    Mat X() const { return (Z_ * Z_.adjoint()).real(); }
    int steps() const { return steps_; }
    int solves() const { return solves_; }

  private:
    const ClosedLoopSolver& pack(Complex q) {
        auto key = std::make_pair(q.real(), q.imag());
        auto it = cache_.find(key);
        if (it == cache_.end())
            it = cache_.emplace(key, std::make_unique<ClosedLoopSolver>(sys_, q, K_)).first;
        return *it->second;
    }

    const DaeSystem& sys_;
    Mat K_;
    CMat W_;
    CMat Z_;
    int steps_ = 0;
    int solves_ = 0;
    std::map<std::pair<double, double>, std::unique_ptr<ClosedLoopSolver>> cache_;
};

}  // namespace knadi
