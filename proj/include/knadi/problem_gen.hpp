#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "knadi/dae_system.hpp"
#include "knadi/errors.hpp"
#include "knadi/oracle.hpp"
#include "knadi/types.hpp"

// Reproducible test-problem families. Each generator is fully determined by
// its spec (sizes, seed, parameters); none of them aims for physical fidelity
// beyond the structural properties the solver relies on.

namespace knadi {

struct ProblemSpec {
    enum class Family { stokes2d, random_sparse, diagonal, scalar_unstable };
    Family family = Family::stokes2d;

    // stokes2d
    int nx = 8, ny = 8;
    double viscosity = 1.0;

    // random_sparse
    int n_v = 60, n_p = 12;
    double density = 0.05;
    bool unstable = false;
    double mu = 3.0;  // pencil shift applied when unstable

    // diagonal
    int n = 4;

    unsigned seed = 1;
    int n_u = 2, n_y = 2;
    double alpha = 1.0;
};

namespace detail {

// Staggered-grid Stokes on the unit square, Dirichlet velocity walls, one
// pressure cell pinned so G has full column rank. The vector Laplacian is
// assembled in finite-volume scaling: symmetric and negative definite.
inline DaeSystem make_stokes2d(const ProblemSpec& spec) {
    const int nx = spec.nx, ny = spec.ny;
    if (nx < 2 || ny < 2) throw InvalidSpec("stokes2d: need nx, ny >= 2");
    const double hx = 1.0 / nx, hy = 1.0 / ny;
    const double nu = spec.viscosity;
    const int nu_nodes = (nx - 1) * ny;       // x-velocity on interior vertical edges
    const int nv_nodes = nx * (ny - 1);       // y-velocity on interior horizontal edges
    const int n_v = nu_nodes + nv_nodes;
    const int n_p = nx * ny - 1;              // last cell pinned

    auto uidx = [&](int i, int j) { return (i - 1) * ny + j; };              // i in [1,nx-1], j in [0,ny-1]
    auto vidx = [&](int i, int j) { return nu_nodes + i * (ny - 1) + (j - 1); };  // i in [0,nx-1], j in [1,ny-1]
    auto cidx = [&](int i, int j) { return i * ny + j; };                    // cell (i,j), column dropped if == n_p

    std::vector<Eigen::Triplet<double>> ta, tg;
    const double cx = nu * hy / hx, cy = nu * hx / hy;
    for (int i = 1; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            const int r = uidx(i, j);
            ta.emplace_back(r, r, -2.0 * (cx + cy));
            if (i > 1) ta.emplace_back(r, uidx(i - 1, j), cx);
            if (i < nx - 1) ta.emplace_back(r, uidx(i + 1, j), cx);
            if (j > 0) ta.emplace_back(r, uidx(i, j - 1), cy);
            if (j < ny - 1) ta.emplace_back(r, uidx(i, j + 1), cy);
            // pressure difference across the edge, scaled by cell face hy
            if (cidx(i, j) != n_p) tg.emplace_back(r, cidx(i, j), -hy);
            if (cidx(i - 1, j) != n_p) tg.emplace_back(r, cidx(i - 1, j), hy);
        }
    for (int i = 0; i < nx; ++i)
        for (int j = 1; j < ny; ++j) {
            const int r = vidx(i, j);
            ta.emplace_back(r, r, -2.0 * (cx + cy));
            if (i > 0) ta.emplace_back(r, vidx(i - 1, j), cx);
            if (i < nx - 1) ta.emplace_back(r, vidx(i + 1, j), cx);
            if (j > 1) ta.emplace_back(r, vidx(i, j - 1), cy);
            if (j < ny - 1) ta.emplace_back(r, vidx(i, j + 1), cy);
            if (cidx(i, j) != n_p) tg.emplace_back(r, cidx(i, j), -hx);
            if (cidx(i, j - 1) != n_p) tg.emplace_back(r, cidx(i, j - 1), hx);
        }

    SpMat A(n_v, n_v);
    A.setFromTriplets(ta.begin(), ta.end());
    SpMat G(n_v, n_p);
    G.setFromTriplets(tg.begin(), tg.end());
    SpMat M(n_v, n_v);
    M.setIdentity();
    M *= hx * hy;

    std::mt19937 rng(spec.seed);
    std::uniform_int_distribution<int> pick(0, n_v - 1);
    auto draw_distinct = [&](int count) {
        std::vector<int> out;
        while (static_cast<int>(out.size()) < count) {
            int cand = pick(rng);
            if (std::find(out.begin(), out.end(), cand) == out.end()) out.push_back(cand);
        }
        return out;
    };
    Mat B = Mat::Zero(n_v, spec.n_u);
    auto bi = draw_distinct(spec.n_u);
    for (int k = 0; k < spec.n_u; ++k) B(bi[k], k) = 1.0;
    Mat C = Mat::Zero(spec.n_y, n_v);
    auto ci = draw_distinct(spec.n_y);
    for (int k = 0; k < spec.n_y; ++k) C(k, ci[k]) = 1.0;

    return DaeSystem(M, A, G, B, C, spec.alpha);
}

// Random sparse instance built from two exactly decoupled blocks: the last
// two indices carry isolated modes with pencil eigenvalues -1 and -1/2 (unit
// mass, no constraint row, no coupling), everything else is a bulk block
// whose symmetric part is diagonally dominant below -20, putting its pencil
// eigenvalues left of -8 by the field-of-values bound Re(lam) =
// v* sym(A) v / v* M v. The unstable variant adds mu * M, which translates
// the pencil spectrum by exactly mu: for desk-scale mu in (1/2, 8) precisely
// the planted modes cross into Re > 0 and the abscissa is mu - 1/2.
inline DaeSystem make_random_sparse(const ProblemSpec& spec) {
    const int n_v = spec.n_v, n_p = spec.n_p;
    if (n_v < 2 || n_p < 0 || n_p > n_v - 2)
        throw InvalidSpec("random_sparse: need n_v >= 2 and 0 <= n_p <= n_v - 2");
    if (spec.unstable && spec.mu <= 0.5)
        throw InvalidSpec("random_sparse: mu must exceed 1/2 to destabilize");
    std::mt19937 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0), sym(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int nb = n_v - 2;  // bulk indices 0..nb-1, planted modes at nb, nb+1

    // M: diagonally dominant symmetric on the bulk, identity on the planted rows.
    std::vector<Eigen::Triplet<double>> tm;
    std::vector<double> mdiag(nb);
    for (int i = 0; i < nb; ++i) mdiag[i] = 0.5 + 1.5 * unit(rng);
    for (int i = 0; i < nb; ++i)
        for (int j = i + 1; j < nb; ++j)
            if (unit(rng) < spec.density) {
                const double v = 0.1 * sym(rng);
                tm.emplace_back(i, j, v);
                tm.emplace_back(j, i, v);
                mdiag[i] += std::abs(v);
                mdiag[j] += std::abs(v);
            }
    for (int i = 0; i < nb; ++i) tm.emplace_back(i, i, mdiag[i]);
    tm.emplace_back(nb, nb, 1.0);
    tm.emplace_back(nb + 1, nb + 1, 1.0);
    SpMat M(n_v, n_v);
    M.setFromTriplets(tm.begin(), tm.end());

    // A: random bulk off-diagonals, bulk diagonal dominating them below -20,
    // and the two planted eigenvalues.
    Mat offd = Mat::Zero(nb, nb);
    for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j)
            if (i != j && unit(rng) < spec.density) offd(i, j) = sym(rng);
    std::vector<Eigen::Triplet<double>> ta;
    for (int i = 0; i < nb; ++i) {
        double dom = 0.0;
        for (int j = 0; j < nb; ++j)
            if (j != i) dom += 0.5 * (std::abs(offd(i, j)) + std::abs(offd(j, i)));
        ta.emplace_back(i, i, -(20.0 + 10.0 * unit(rng) + dom));
        for (int j = 0; j < nb; ++j)
            if (j != i && offd(i, j) != 0.0) ta.emplace_back(i, j, offd(i, j));
    }
    ta.emplace_back(nb, nb, -1.0);
    ta.emplace_back(nb + 1, nb + 1, -0.5);
    SpMat A(n_v, n_v);
    A.setFromTriplets(ta.begin(), ta.end());

    // G: nonsingular diagonal top block guarantees full column rank; the
    // planted rows stay empty so those modes live on the constraint manifold.
    std::vector<Eigen::Triplet<double>> tg;
    for (int j = 0; j < n_p; ++j) tg.emplace_back(j, j, 1.0 + unit(rng));
    for (int i = n_p; i < nb; ++i)
        for (int j = 0; j < n_p; ++j)
            if (unit(rng) < spec.density) tg.emplace_back(i, j, 0.5 * sym(rng));
    SpMat G(n_v, n_p);
    G.setFromTriplets(tg.begin(), tg.end());

    Mat B(n_v, spec.n_u), C(spec.n_y, n_v);
    for (int i = 0; i < n_v; ++i)
        for (int k = 0; k < spec.n_u; ++k) B(i, k) = gauss(rng);
    for (int k = 0; k < spec.n_y; ++k)
        for (int i = 0; i < n_v; ++i) C(k, i) = gauss(rng);

    if (spec.unstable) A = A + spec.mu * M;  // pencil spectrum shifts by exactly mu
    return DaeSystem(M, A, G, B, C, spec.alpha);
}

inline DaeSystem make_diagonal(const ProblemSpec& spec) {
    if (spec.n < 1) throw InvalidSpec("diagonal: need n >= 1");
    SpMat M(spec.n, spec.n);
    M.setIdentity();
    SpMat A(spec.n, spec.n);
    std::vector<Eigen::Triplet<double>> ta;
    for (int i = 0; i < spec.n; ++i) ta.emplace_back(i, i, -(i + 1.0));
    A.setFromTriplets(ta.begin(), ta.end());
    SpMat G(spec.n, 0);
    return DaeSystem(M, A, G, Mat::Ones(spec.n, 1), Mat::Ones(1, spec.n), spec.alpha);
}

// One-dimensional unstable fixture: M = A = B = C = 1. The closed-form
// stabilizing solution is X = 1 + sqrt(2), and from K0 = 2 the exact
// iteration passes through 5/2 and 29/12.
inline DaeSystem make_scalar_unstable(const ProblemSpec& spec) {
    SpMat M(1, 1), A(1, 1);
    M.insert(0, 0) = 1.0;
    A.insert(0, 0) = 1.0;
    SpMat G(1, 0);
    return DaeSystem(M, A, G, Mat::Ones(1, 1), Mat::Ones(1, 1), spec.alpha);
}

}  // namespace detail

inline DaeSystem generate(const ProblemSpec& spec) {
    switch (spec.family) {
        case ProblemSpec::Family::stokes2d: return detail::make_stokes2d(spec);
        case ProblemSpec::Family::random_sparse: return detail::make_random_sparse(spec);
        case ProblemSpec::Family::diagonal: return detail::make_diagonal(spec);
        case ProblemSpec::Family::scalar_unstable: return detail::make_scalar_unstable(spec);
    }
    throw InvalidSpec("generate: unknown family");
}

// Stabilizing, deliberately non-optimal starting feedback. Stable pencils get
// K0 = 0; unstable ones get 1.5x the unit-weight optimal gain, which stays
// stabilizing by the gain margin of the Riccati feedback.
inline Mat initial_feedback(const DaeSystem& sys, int dense_cap = 1000) {
    Mat zero = Mat::Zero(sys.n_v, sys.n_u);
    if (max_real(pencil_eigenvalues(sys, zero, dense_cap)) < 0.0) return zero;

    DenseProjectedSystem proj = build_theta(sys, dense_cap);
    proj.Cp = sys.C * proj.Theta_r;  // design weight alpha = 1 regardless of sys.alpha
    Mat Kboot = stabilizing_feedback_sign(proj);
    if (!(max_real(pencil_eigenvalues(sys, Kboot, dense_cap)) < 0.0))
        throw NotStabilizable("initial_feedback: sign-function bootstrap not stabilizing");
    CareResult care = dense_care_solve(proj, Kboot);

    Mat scaled = 1.5 * care.K;
    if (max_real(pencil_eigenvalues(sys, scaled, dense_cap)) < 0.0) return scaled;
    if (max_real(pencil_eigenvalues(sys, care.K, dense_cap)) < 0.0) return care.K;
    throw NotStabilizable("initial_feedback: no stabilizing candidate found");
}

}  // namespace knadi
