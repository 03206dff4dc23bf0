#pragma once

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/SparseLU>

#include "knadi/dae_system.hpp"
#include "knadi/errors.hpp"
#include "knadi/types.hpp"

namespace knadi {

namespace detail {

inline SpMatC assemble_saddle_complex(const SpMat& base, Complex q, const SpMat& M, const SpMat& G) {
    const int n = static_cast<int>(base.rows());
    const int p = static_cast<int>(G.cols());
    std::vector<Eigen::Triplet<Complex>> trips;
    trips.reserve(base.nonZeros() + M.nonZeros() + 2 * G.nonZeros());
    for (int k = 0; k < base.outerSize(); ++k)
        for (SpMat::InnerIterator it(base, k); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), Complex(it.value(), 0.0));
    for (int k = 0; k < M.outerSize(); ++k)
        for (SpMat::InnerIterator it(M, k); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), q * it.value());
    for (int k = 0; k < G.outerSize(); ++k)
        for (SpMat::InnerIterator it(G, k); it; ++it) {
            trips.emplace_back(static_cast<int>(it.row()), n + static_cast<int>(it.col()), Complex(it.value(), 0.0));
            trips.emplace_back(n + static_cast<int>(it.col()), static_cast<int>(it.row()), Complex(it.value(), 0.0));
        }
    SpMatC S(n + p, n + p);
    S.setFromTriplets(trips.begin(), trips.end());
    S.makeCompressed();
    return S;
}

}  // namespace detail

// Sparse LU of one saddle matrix:
//
//   q present:  [ A^T + q M   G ]        (transpose = true)
//               [ G^T         0 ]
//   or the non-transposed variant with A in place of A^T;
//   q absent:   [ M   G ]                 the mass-only operator.
//               [ G^T 0 ]
//
// Complex-valued factorization iff Im(q) != 0; a conjugate shift pair
// shares one handle because only the Im > 0 member triggers a solve.
// Handles are immutable after construction; concurrent solves are fine.
class SaddleFactorization {
  public:
    SaddleFactorization(const DaeSystem& sys, std::optional<Complex> q, bool transpose)
        : n_v_(sys.n_v), n_p_(sys.n_p), q_(q), transpose_(transpose) {
        if (q && q->real() > 0.0)
            throw InvalidSpec("factor_saddle: shift must have Re(q) <= 0");
        complex_ = q && q->imag() != 0.0;
        if (complex_) {
            SpMat base = transpose_ ? SpMat(sys.A.transpose()) : sys.A;
            SpMatC S = detail::assemble_saddle_complex(base, *q, sys.M, sys.G);
            cplx_lu_.compute(S);
            if (cplx_lu_.info() != Eigen::Success)
                throw FactorizationFailed("complex saddle LU failed for shift");
        } else {
            SpMat F;
            if (q) {
                F = transpose_ ? SpMat(sys.A.transpose()) : sys.A;
                if (q->real() != 0.0) F = F + q->real() * sys.M;
            } else {
                F = sys.M;
            }
            SpMat S = detail::assemble_saddle(F, sys.G);
            real_lu_.compute(S);
            if (real_lu_.info() != Eigen::Success)
                throw FactorizationFailed("saddle LU failed (rank-deficient G or invalid shift)");
        }
    }

    SaddleFactorization(const SaddleFactorization&) = delete;
    SaddleFactorization& operator=(const SaddleFactorization&) = delete;

    bool is_complex() const { return complex_; }
    bool transposed() const { return transpose_; }
    std::optional<Complex> shift() const { return q_; }
    int n_v() const { return n_v_; }
    int n_p() const { return n_p_; }

    // Both solution blocks of [.][x; y] = [rhs; 0], stacked (n_v+n_p) x m.
    Mat solve_full(const Mat& rhs) const {
        require_real();
        Mat padded = Mat::Zero(n_v_ + n_p_, rhs.cols());
        padded.topRows(n_v_) = rhs;
        return real_lu_.solve(padded);
    }
    CMat solve_full(const CMat& rhs) const {
        if (!complex_) throw Error("SaddleFactorization: complex solve on real handle");
        CMat padded = CMat::Zero(n_v_ + n_p_, rhs.cols());
        padded.topRows(n_v_) = rhs;
        return cplx_lu_.solve(padded);
    }

    // Velocity block only; the multiplier block is discarded.
    Mat solve(const Mat& rhs) const { return solve_full(rhs).topRows(n_v_); }
    CMat solve(const CMat& rhs) const { return solve_full(rhs).topRows(n_v_); }

  private:
    void require_real() const {
        if (complex_) throw Error("SaddleFactorization: real solve on complex handle");
    }

    int n_v_, n_p_;
    std::optional<Complex> q_;
    bool transpose_ = false;
    bool complex_ = false;
    Eigen::SparseLU<SpMat> real_lu_;
    Eigen::SparseLU<SpMatC> cplx_lu_;
};

inline SaddleFactorization factor_saddle(const DaeSystem& sys, std::optional<Complex> q, bool transpose) {
    return SaddleFactorization(sys, q, transpose);
}

// Solve [M G; G^T 0][W; *] = [rhs; 0]; the returned W satisfies G^T W = 0.
inline Mat mass_saddle_solve(const DaeSystem& sys, const Mat& rhs) {
    SaddleFactorization f(sys, std::nullopt, false);
    return f.solve(rhs);
}

// Sherman-Morrison-Woodbury solver for the feedback-corrected saddle matrix
//
//   [ A^T + q M - K B^T   G ]         (transpose handles: correction K B^T)
//   [ G^T                 0 ]         (non-transposed:      correction B K^T)
//
// against the unperturbed factorization f. The n_u x n_u capacitance matrix
// and the corrected columns are cached so a handle amortizes over a sweep.
class FeedbackSolver {
  public:
    FeedbackSolver(const SaddleFactorization& f, const Mat& K, const Mat& B) : f_(f) {
        const Mat& P = f.transposed() ? K : B;  // (1,1) block loses P * Q^T
        const Mat& Q = f.transposed() ? B : K;
        Q_ = Q;
        r_ = static_cast<int>(P.cols());
        if (Q.cols() != r_) throw DimensionMismatch("FeedbackSolver: K and B column mismatch");
        identity_correction_ = P.isZero(0.0) || Q.isZero(0.0);
        if (identity_correction_) return;
        if (f.is_complex()) {
            Yc_ = f.solve_full(CMat(P.cast<Complex>()));
            CMat S = CMat::Identity(r_, r_) - Q.transpose().cast<Complex>() * Yc_.topRows(f.n_v());
            cap_c_.compute(S);
            if (!cap_c_.isInvertible())
                throw SmwSingular("SMW capacitance matrix singular (complex shift)");
        } else {
            Y_ = f.solve_full(P);
            Mat S = Mat::Identity(r_, r_) - Q.transpose() * Y_.topRows(f.n_v());
            cap_.compute(S);
            if (!cap_.isInvertible())
                throw SmwSingular("SMW capacitance matrix singular");
        }
    }

    // Velocity block V of the corrected solve with right-hand side [rhs; 0].
    Mat solve(const Mat& rhs) const {
        Mat X0 = f_.solve_full(rhs);
        if (identity_correction_) return X0.topRows(f_.n_v());
        Mat T = cap_.solve(Q_.transpose() * X0.topRows(f_.n_v()));
        return (X0 + Y_ * T).topRows(f_.n_v());
    }
    CMat solve(const CMat& rhs) const {
        CMat X0 = f_.solve_full(rhs);
        if (identity_correction_) return X0.topRows(f_.n_v());
        CMat T = cap_c_.solve(Q_.transpose().cast<Complex>() * X0.topRows(f_.n_v()));
        return (X0 + Yc_ * T).topRows(f_.n_v());
    }

  private:
    const SaddleFactorization& f_;
    Mat Q_;
    int r_ = 0;
    bool identity_correction_ = false;
    Mat Y_;                           // f^{-1} [P; 0]
    CMat Yc_;
    Eigen::FullPivLU<Mat> cap_;       // I - Q^T Y_v
    Eigen::FullPivLU<CMat> cap_c_;
};

// One-shot convenience wrapper around FeedbackSolver.
inline Mat solve_with_feedback(const SaddleFactorization& f, const Mat& K, const Mat& B, const Mat& rhs) {
    return FeedbackSolver(f, K, B).solve(rhs);
}
inline CMat solve_with_feedback(const SaddleFactorization& f, const Mat& K, const Mat& B, const CMat& rhs) {
    return FeedbackSolver(f, K, B).solve(rhs);
}

// Shifted closed-loop velocity solve robust to a singular splitting.
//
// The SMW route factors the plain (transposed) saddle matrix once and folds
// the feedback term in through the capacitance system. That splitting is
// singular exactly when -q is an eigenvalue of the open-loop pencil, which
// the closed-loop operator itself does not care about, so on factorization
// failure the corrected operator is factored directly via the augmentation
//
//   [ A^T + q M   G   K ] [x]   [r]
//   [ G^T         0   0 ] [y] = [0]    =>  (A^T + q M - K B^T) x + G y = r,
//   [ B^T         0   I ] [z]   [0]
//
// whose n_u extra columns stay sparse, unlike the dense correction K B^T.
class ClosedLoopSolver {
  public:
    ClosedLoopSolver(const DaeSystem& sys, Complex q, const Mat& K) : n_v_(sys.n_v) {
        try {
            base_ = std::make_unique<SaddleFactorization>(sys, q, true);
            smw_ = std::make_unique<FeedbackSolver>(*base_, K, sys.B);
            return;
        } catch (const FactorizationFailed&) {
            base_.reset();
        }
        complex_ = q.imag() != 0.0;
        const int n_p = sys.n_p, n_u = sys.n_u;
        const int n = n_v_ + n_p + n_u;
        if (complex_) {
            SpMatC S = detail::assemble_saddle_complex(SpMat(sys.A.transpose()), q, sys.M, sys.G);
            std::vector<Eigen::Triplet<Complex>> trips;
            trips.reserve(S.nonZeros() + 2 * n_v_ * n_u + n_u);
            for (int k = 0; k < S.outerSize(); ++k)
                for (SpMatC::InnerIterator it(S, k); it; ++it)
                    trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
            for (int j = 0; j < n_u; ++j) {
                for (int i = 0; i < n_v_; ++i) {
                    if (K(i, j) != 0.0) trips.emplace_back(i, n_v_ + n_p + j, Complex(K(i, j), 0.0));
                    if (sys.B(i, j) != 0.0) trips.emplace_back(n_v_ + n_p + j, i, Complex(sys.B(i, j), 0.0));
                }
                trips.emplace_back(n_v_ + n_p + j, n_v_ + n_p + j, Complex(1.0, 0.0));
            }
            SpMatC big(n, n);
            big.setFromTriplets(trips.begin(), trips.end());
            big.makeCompressed();
            aug_lu_c_.compute(big);
            if (aug_lu_c_.info() != Eigen::Success)
                throw FactorizationFailed("closed-loop saddle LU failed for shift");
        } else {
            SpMat F = SpMat(sys.A.transpose());
            if (q.real() != 0.0) F = F + q.real() * sys.M;
            SpMat S = detail::assemble_saddle(F, sys.G);
            std::vector<Eigen::Triplet<double>> trips;
            trips.reserve(S.nonZeros() + 2 * n_v_ * n_u + n_u);
            for (int k = 0; k < S.outerSize(); ++k)
                for (SpMat::InnerIterator it(S, k); it; ++it)
                    trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
            for (int j = 0; j < n_u; ++j) {
                for (int i = 0; i < n_v_; ++i) {
                    if (K(i, j) != 0.0) trips.emplace_back(i, n_v_ + n_p + j, K(i, j));
                    if (sys.B(i, j) != 0.0) trips.emplace_back(n_v_ + n_p + j, i, sys.B(i, j));
                }
                trips.emplace_back(n_v_ + n_p + j, n_v_ + n_p + j, 1.0);
            }
            SpMat big(n, n);
            big.setFromTriplets(trips.begin(), trips.end());
            big.makeCompressed();
            aug_lu_.compute(big);
            if (aug_lu_.info() != Eigen::Success)
                throw FactorizationFailed("closed-loop saddle LU failed for shift");
        }
        rows_ = n;
    }

    bool used_fallback() const { return smw_ == nullptr; }

    Mat solve(const Mat& rhs) const {
        if (smw_) return smw_->solve(rhs);
        if (complex_) throw Error("ClosedLoopSolver: real solve on complex handle");
        Mat padded = Mat::Zero(rows_, rhs.cols());
        padded.topRows(n_v_) = rhs;
        return aug_lu_.solve(padded).topRows(n_v_);
    }
    CMat solve(const CMat& rhs) const {
        if (smw_) return smw_->solve(rhs);
        if (!complex_) throw Error("ClosedLoopSolver: complex solve on real handle");
        CMat padded = CMat::Zero(rows_, rhs.cols());
        padded.topRows(n_v_) = rhs;
        return aug_lu_c_.solve(padded).topRows(n_v_);
    }

  private:
    int n_v_ = 0;
    int rows_ = 0;
    bool complex_ = false;
    std::unique_ptr<SaddleFactorization> base_;
    std::unique_ptr<FeedbackSolver> smw_;
    Eigen::SparseLU<SpMat> aug_lu_;
    Eigen::SparseLU<SpMatC> aug_lu_c_;
};

}  // namespace knadi
