#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "knadi/errors.hpp"
#include "knadi/types.hpp"

namespace knadi {

// Index-2 DAE problem instance
//
//   M v' = A v + G p + B u,   G^T v = 0,   y = C v,
//
// with M symmetric positive definite and G of full column rank.
// Immutable after construction; all solver state lives elsewhere.
struct DaeSystem {
    int n_v = 0;
    int n_p = 0;
    int n_u = 0;
    int n_y = 0;

    SpMat M, A, G;        // column storage, feeds factorizations
    SpMatRow Mrow, Arow;  // row storage, feeds repeated products
    Mat B, C;
    double alpha = 1.0;   // output weight, applied lazily via scaled_output

    DaeSystem(SpMat M_, SpMat A_, SpMat G_, Mat B_, Mat C_, double alpha_ = 1.0)
        : M(std::move(M_)), A(std::move(A_)), G(std::move(G_)),
          B(std::move(B_)), C(std::move(C_)), alpha(alpha_) {
        n_v = static_cast<int>(M.rows());
        n_p = static_cast<int>(G.cols());
        n_u = static_cast<int>(B.cols());
        n_y = static_cast<int>(C.rows());

        if (M.cols() != n_v) throw DimensionMismatch("M must be square");
        if (A.rows() != n_v || A.cols() != n_v) throw DimensionMismatch("A must be n_v x n_v");
        if (G.rows() != n_v) throw DimensionMismatch("G must have n_v rows");
        if (n_p >= n_v && n_p > 0) throw DimensionMismatch("n_p must be < n_v");
        if (B.rows() != n_v || n_u < 1) throw DimensionMismatch("B must be n_v x n_u, n_u >= 1");
        if (C.cols() != n_v || n_y < 1) throw DimensionMismatch("C must be n_y x n_v, n_y >= 1");
        if (!(alpha > 0.0)) throw InvalidSpec("alpha must be positive");

        symmetrize_mass();
        M.makeCompressed();
        A.makeCompressed();
        G.makeCompressed();
        Mrow = M;
        Arow = A;
    }

  private:
    // Text round-trips leave tiny asymmetries; average them away, reject real ones.
    void symmetrize_mass() {
        SpMat Mt = SpMat(M.transpose());
        double max_abs = 0.0;
        for (int k = 0; k < M.outerSize(); ++k)
            for (SpMat::InnerIterator it(M, k); it; ++it)
                max_abs = std::max(max_abs, std::abs(it.value()));
        SpMat D = M - Mt;
        double defect = 0.0;
        for (int k = 0; k < D.outerSize(); ++k)
            for (SpMat::InnerIterator it(D, k); it; ++it)
                defect = std::max(defect, std::abs(it.value()));
        if (defect > 1e-12 * max_abs)
            throw NotSymmetric("M asymmetry " + std::to_string(defect) +
                               " exceeds 1e-12 * max|M| = " + std::to_string(1e-12 * max_abs));
        if (defect > 0.0) M = 0.5 * (M + Mt);
    }
};

namespace detail {

// [F G; G^T 0] assembled in column storage.
inline SpMat assemble_saddle(const SpMat& F, const SpMat& G) {
    const int n = static_cast<int>(F.rows());
    const int p = static_cast<int>(G.cols());
    SpMat S(n + p, n + p);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(F.nonZeros() + 2 * G.nonZeros());
    for (int k = 0; k < F.outerSize(); ++k)
        for (SpMat::InnerIterator it(F, k); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int k = 0; k < G.outerSize(); ++k)
        for (SpMat::InnerIterator it(G, k); it; ++it) {
            trips.emplace_back(static_cast<int>(it.row()), n + static_cast<int>(it.col()), it.value());
            trips.emplace_back(n + static_cast<int>(it.col()), static_cast<int>(it.row()), it.value());
        }
    S.setFromTriplets(trips.begin(), trips.end());
    S.makeCompressed();
    return S;
}

}  // namespace detail

struct ValidationReport {
    struct Check {
        std::string name;
        bool passed = false;
        double measure = 0.0;
        std::string detail;
    };
    std::vector<Check> checks;

    bool ok() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }
    std::string to_string() const {
        std::string out;
        for (const auto& c : checks) {
            out += (c.passed ? "[pass] " : "[FAIL] ") + c.name;
            if (!c.detail.empty()) out += " (" + c.detail + ")";
            out += "\n";
        }
        return out;
    }
};

// Checks the standing hypotheses: M = M^T > 0, rank(G) = n_p (via the
// mass saddle matrix factorizing), and a solve-residual sanity check.
inline ValidationReport validate(const DaeSystem& sys) {
    ValidationReport rep;

    rep.checks.push_back({"dimensions consistent", true, 0.0,
                          "n_v=" + std::to_string(sys.n_v) + " n_p=" + std::to_string(sys.n_p) +
                          " n_u=" + std::to_string(sys.n_u) + " n_y=" + std::to_string(sys.n_y)});

    {
        SpMat D = SpMat(sys.M.transpose()) - sys.M;
        double defect = 0.0;
        for (int k = 0; k < D.outerSize(); ++k)
            for (SpMat::InnerIterator it(D, k); it; ++it)
                defect = std::max(defect, std::abs(it.value()));
        rep.checks.push_back({"M symmetric", defect == 0.0, defect, "max|M - M^T| after load"});
    }

    {
        Eigen::SimplicialLLT<SpMat> llt(sys.M);
        bool spd = llt.info() == Eigen::Success;
        rep.checks.push_back({"M positive definite", spd, 0.0,
                              spd ? "sparse Cholesky succeeded" : "sparse Cholesky failed"});
    }

    {
        bool factor_ok = true;
        double resid = 0.0;
        std::string detail;
        if (sys.n_p > 0) {
            SpMat S = detail::assemble_saddle(sys.M, sys.G);
            Eigen::SparseLU<SpMat> lu;
            lu.compute(S);
            factor_ok = lu.info() == Eigen::Success;
            if (factor_ok) {
                std::mt19937 rng(12345);
                std::normal_distribution<double> dist;
                Vec rhs(sys.n_v + sys.n_p);
                for (int i = 0; i < rhs.size(); ++i) rhs[i] = dist(rng);
                Vec x = lu.solve(rhs);
                resid = (S * x - rhs).norm() / rhs.norm();
                factor_ok = resid <= 1e-12;
                detail = "relative solve residual";
            } else {
                detail = "LU of [M G; G^T 0] reported singularity";
            }
        } else {
            detail = "n_p = 0, no constraint";
        }
        rep.checks.push_back({"saddle matrix nonsingular (G full rank)", factor_ok, resid, detail});
    }

    return rep;
}

// Throws the matching typed error for the first failing validate() check.
inline void require_valid(const DaeSystem& sys) {
    ValidationReport rep = validate(sys);
    for (const auto& c : rep.checks) {
        if (c.passed) continue;
        if (c.name == "M symmetric") throw NotSymmetric("validate: " + c.name);
        throw SingularSaddlePoint("validate: " + c.name + " failed; " + c.detail);
    }
}

// sqrt(alpha) * C, the weighted output everything downstream consumes; the
// Gram product then carries the full weight alpha.
inline Mat scaled_output(const DaeSystem& sys) { return std::sqrt(sys.alpha) * sys.C; }

// View of the compact pencil
//
//   bA = [A G; G^T 0],  bM = [M 0; 0 0],  bB = [B; 0],  bC = [C 0],
//
// exposed as products so no sparse data is copied. bM has exactly n_p
// structurally zero trailing rows and columns by construction.
class CompactPencil {
  public:
    explicit CompactPencil(const DaeSystem& s) : sys_(s) {}

    Eigen::Index rows() const { return sys_.n_v + sys_.n_p; }

    Vec apply_A(const Vec& x) const {
        check(x.size());
        Vec y(rows());
        y.head(sys_.n_v) = sys_.Arow * x.head(sys_.n_v) + sys_.G * x.tail(sys_.n_p);
        y.tail(sys_.n_p) = sys_.G.transpose() * x.head(sys_.n_v);
        return y;
    }
    Vec apply_M(const Vec& x) const {
        check(x.size());
        Vec y = Vec::Zero(rows());
        y.head(sys_.n_v) = sys_.Mrow * x.head(sys_.n_v);
        return y;
    }
    Vec apply_B(const Vec& u) const {
        if (u.size() != sys_.n_u) throw DimensionMismatch("CompactPencil::apply_B");
        Vec y = Vec::Zero(rows());
        y.head(sys_.n_v) = sys_.B * u;
        return y;
    }
    Vec apply_C(const Vec& x) const {
        check(x.size());
        return sys_.C * x.head(sys_.n_v);
    }

  private:
    void check(Eigen::Index n) const {
        if (n != rows()) throw DimensionMismatch("CompactPencil: vector length");
    }
    const DaeSystem& sys_;
};

}  // namespace knadi
