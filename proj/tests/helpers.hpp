#pragma once

#include <random>

#include "knadi/dae_system.hpp"
#include "knadi/types.hpp"

namespace knadi::testing {

inline DaeSystem make_system(const Mat& M, const Mat& A, const Mat& G, const Mat& B, const Mat& C,
                             double alpha = 1.0) {
    return DaeSystem(SpMat(M.sparseView()), SpMat(A.sparseView()),
                     G.cols() > 0 ? SpMat(G.sparseView()) : SpMat(M.rows(), 0), B, C, alpha);
}

// Hand-solvable 2x2 constrained fixture: M = diag(2,1), G = [1;1], A = -I.
// With rhs e1 the mass saddle solve is [1/3, -1/3], Pi e1 = [2/3, -1/3],
// Pi^T e1 = [2/3, -2/3], and the recovered pressure for v = e1, u = 0 is 1/3.
inline DaeSystem fixture_2x2() {
    Mat M(2, 2), A(2, 2), G(2, 1), B(2, 1), C(1, 2);
    M << 2, 0, 0, 1;
    A << -1, 0, 0, -1;
    G << 1, 1;
    B << 1, 0;
    C << 1, 0;
    return make_system(M, A, G, B, C);
}

inline Mat randn(std::mt19937& rng, int r, int c) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat X(r, c);
    for (int j = 0; j < c; ++j)
        for (int i = 0; i < r; ++i) X(i, j) = gauss(rng);
    return X;
}

// Random constrained system with M SPD, sym(A) negative definite (pencil
// eigenvalues stay left of zero by the field-of-values bound), G full rank.
inline DaeSystem random_system(std::mt19937& rng, int n_v, int n_p, int n_u = 1, int n_y = 1,
                               double alpha = 1.0) {
    Mat R = randn(rng, n_v, n_v);
    Mat M = R * R.transpose() + static_cast<double>(n_v) * Mat::Identity(n_v, n_v);
    Mat S = randn(rng, n_v, n_v);
    Mat T = randn(rng, n_v, n_v);
    Mat A = -(S * S.transpose()) - Mat::Identity(n_v, n_v) + 0.5 * (T - T.transpose());
    Mat G = randn(rng, n_v, n_p);
    if (n_p > 0) G.topRows(n_p) += 2.0 * std::sqrt(static_cast<double>(n_v)) * Mat::Identity(n_p, n_p);
    return make_system(M, A, G, randn(rng, n_v, n_u), randn(rng, n_y, n_v), alpha);
}

}  // namespace knadi::testing
