#pragma once

#include <optional>

#include "knadi/dae_system.hpp"
#include "knadi/errors.hpp"
#include "knadi/saddle.hpp"
#include "knadi/types.hpp"

namespace knadi {

// Implicit application of the discrete Leray projector
//
//   Pi = I - G (G^T M^{-1} G)^{-1} G^T M^{-1},
//
// through one cached factorization of [M G; G^T 0]. Pi itself is never
// assembled here; the explicit formula lives only in the oracle module.
class ProjectorContext {
  public:
    explicit ProjectorContext(const DaeSystem& sys) try
        : sys_(sys), mass_(sys, std::nullopt, false) {
    } catch (const FactorizationFailed& e) {
        throw SingularSaddlePoint(e.what());
    }

    const DaeSystem& system() const { return sys_; }
    const SaddleFactorization& mass_factorization() const { return mass_; }

    // Pi W = M * (first block of [M G; G^T 0]^{-1} [W; 0])
    Mat apply_pi(const Mat& W) const {
        if (W.rows() != sys_.n_v) throw DimensionMismatch("apply_pi: W must have n_v rows");
        if (sys_.n_p == 0) return W;
        return sys_.Mrow * mass_.solve(W);
    }

    // Pi^T v = M^{-1} Pi M v, realized as the same saddle solve on M v.
    Mat apply_pi_transpose(const Mat& V) const {
        if (V.rows() != sys_.n_v) throw DimensionMismatch("apply_pi_transpose: V must have n_v rows");
        if (sys_.n_p == 0) return V;
        return mass_.solve(Mat(sys_.Mrow * V));
    }

    // p = -(G^T M^{-1} G)^{-1} G^T M^{-1} (A v + B u), read off as the negated
    // multiplier block of the mass saddle solve with right-hand side [Av+Bu; 0].
    Vec recover_pressure(const Vec& v, const Vec& u) const {
        if (v.size() != sys_.n_v) throw DimensionMismatch("recover_pressure: v must have n_v entries");
        if (u.size() != sys_.n_u) throw DimensionMismatch("recover_pressure: u must have n_u entries");
        if (sys_.n_p == 0) return Vec(0);
        Mat rhs = sys_.Arow * v + sys_.B * u;
        Mat full = mass_.solve_full(rhs);
        return -full.col(0).tail(sys_.n_p);
    }

  private:
    const DaeSystem& sys_;
    SaddleFactorization mass_;
};

inline Vec recover_pressure(const DaeSystem& sys, const Vec& v, const Vec& u) {
    return ProjectorContext(sys).recover_pressure(v, u);
}

}  // namespace knadi
