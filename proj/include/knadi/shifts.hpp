#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "knadi/dae_system.hpp"
#include "knadi/errors.hpp"
#include "knadi/projector.hpp"
#include "knadi/saddle.hpp"
#include "knadi/types.hpp"

// ADI shift machinery: Ritz-value heuristics, projection-based adaptive
// shifts, and the greedy min-max reduction that turns a candidate pool into
// a working set.

namespace knadi {

struct ShiftCounts {
    int k_plus = 20;    // Arnoldi steps on the operator (large magnitude)
    int k_minus = 10;   // Arnoldi steps on its inverse (small magnitude)
    int n_shifts = 10;  // target working-set size
    int pool_cap = 30;  // candidate pool bound before min-max selection
};

// Ordered shift list. Invariants enforced on construction: Re(q) < 0,
// conjugation closure, conjugate pairs adjacent with Im > 0 first.
class ShiftSet {
  public:
    enum class Provenance { heuristic, adaptive };

    ShiftSet() = default;
    ShiftSet(const std::vector<Complex>& values, Provenance source) : source_(source) {
        std::vector<Complex> reps;
        for (Complex z : values) {
            if (!(z.real() < 0.0)) throw InvalidSpec("ShiftSet: every shift needs Re < 0");
            Complex rep = z.imag() < 0.0 ? std::conj(z) : z;
            if (std::abs(rep.imag()) <= 1e-14 * std::abs(rep)) rep = Complex(rep.real(), 0.0);
            bool dup = false;
            for (const Complex& r : reps)
                if (std::abs(r - rep) <= 1e-10 * std::abs(rep)) {
                    dup = true;
                    break;
                }
            if (dup) continue;
            reps.push_back(rep);
            q_.push_back(rep);
            if (rep.imag() > 0.0) {
                q_.push_back(std::conj(rep));
                has_pairs_ = true;
            }
        }
    }

    int size() const { return static_cast<int>(q_.size()); }
    bool empty() const { return q_.empty(); }
    Complex operator[](int i) const { return q_[static_cast<std::size_t>(i)]; }
    const std::vector<Complex>& values() const { return q_; }
    Provenance source() const { return source_; }
    bool has_pairs() const { return has_pairs_; }

  private:
    std::vector<Complex> q_;
    Provenance source_ = Provenance::heuristic;
    bool has_pairs_ = false;
};

// Greedy min-max selection: repeatedly add the candidate where the current
// shift product damps worst. Deterministic; ties resolved to the smallest
// candidate index. Selected complex shifts bring their conjugates along.
inline ShiftSet lp_mnmx(const std::vector<Complex>& candidates, int r,
                        ShiftSet::Provenance source = ShiftSet::Provenance::heuristic) {
    if (candidates.empty()) throw InvalidSpec("lp_mnmx: empty candidate set");
    for (const Complex& c : candidates)
        if (!(c.real() < 0.0)) throw InvalidSpec("lp_mnmx: candidates must be stable");

    auto rho = [](Complex q, Complex lam) { return std::abs((q - lam) / (q + lam)); };
    std::vector<Complex> chosen;
    auto push = [&](Complex q) {
        chosen.push_back(q);
        if (q.imag() != 0.0) chosen.push_back(std::conj(q));
    };

    int best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        double m = 0.0;
        for (const Complex& lam : candidates) m = std::max(m, rho(candidates[i], lam));
        if (m < best_val) {
            best_val = m;
            best = static_cast<int>(i);
        }
    }
    push(candidates[static_cast<std::size_t>(best)]);

    while (static_cast<int>(chosen.size()) < r) {
        int arg = -1;
        double worst = -1.0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            double f = 1.0;
            for (const Complex& q : chosen) f *= rho(q, candidates[i]);
            if (f > worst) {
                worst = f;
                arg = static_cast<int>(i);
            }
        }
        if (arg < 0 || worst <= 0.0) break;  // pool exhausted
        push(candidates[static_cast<std::size_t>(arg)]);
    }
    return ShiftSet(chosen, source);
}

namespace detail {

// Arnoldi with one reorthogonalization pass; stops early on an invariant
// subspace. Returns the Ritz values of the square Hessenberg block.
template <typename Op>
inline std::vector<Complex> arnoldi_ritz(int n, int k, const Op& op, const ProjectorContext& ctx,
                                         std::mt19937& rng) {
    k = std::max(1, std::min(k, n));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int attempt = 0; attempt < 2; ++attempt) {
        Vec v0(n);
        for (int i = 0; i < n; ++i) v0(i) = gauss(rng);
        if (ctx.system().n_p > 0) v0 = ctx.apply_pi_transpose(Mat(v0)).col(0);
        const double nrm0 = v0.norm();
        if (nrm0 < 1e-300) continue;  // degenerate start, retry once

        Mat V(n, k + 1);
        Mat H = Mat::Zero(k + 1, k);
        V.col(0) = v0 / nrm0;
        int m = 0;
        double scale = 1.0;
        for (int j = 0; j < k; ++j) {
            Vec w = op(Vec(V.col(j)));
            scale = std::max(scale, w.norm());
            for (int pass = 0; pass < 2; ++pass)
                for (int i = 0; i <= j; ++i) {
                    const double h = V.col(i).dot(w);
                    w -= h * V.col(i);
                    H(i, j) += h;
                }
            m = j + 1;
            const double hn = w.norm();
            // Generous threshold: solver roundoff leaves O(1e-10) residue in
            // the constraint complement once the projected subspace is
            // exhausted, and such noise vectors poison the Ritz values.
            if (hn <= 1e-8 * scale) break;
            if (j + 1 < k) {
                H(j + 1, j) = hn;
                V.col(j + 1) = w / hn;
            }
        }
        Eigen::EigenSolver<Mat> es(H.topLeftCorner(m, m), false);
        std::vector<Complex> out;
        out.reserve(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) out.push_back(es.eigenvalues()(i));
        return out;
    }
    throw ArnoldiBreakdown("arnoldi_ritz: start vector vanished under projection twice");
}

}  // namespace detail

// Penzl-style heuristic: Ritz values of the projected closed loop from a
// short Arnoldi run, small-magnitude ones from a run on the inverse, all
// mirrored into the left half-plane, reduced by lp_mnmx.
inline ShiftSet heuristic_shifts(const DaeSystem& sys, const ProjectorContext& ctx, const Mat& K,
                                 const ShiftCounts& counts = {}, unsigned seed = 7) {
    std::mt19937 rng(seed);
    const int n = sys.n_v;

    auto fwd = [&](const Vec& v) -> Vec {
        Vec t = sys.Arow * v - sys.B * (K.transpose() * v);
        return ctx.mass_factorization().solve(Mat(t)).col(0);
    };
    SaddleFactorization f0 = factor_saddle(sys, Complex(0.0, 0.0), false);
    FeedbackSolver fs0(f0, K, sys.B);
    auto inv = [&](const Vec& v) -> Vec { return fs0.solve(Mat(sys.Mrow * v)).col(0); };

    std::vector<Complex> rplus = detail::arnoldi_ritz(n, counts.k_plus, fwd, ctx, rng);
    std::vector<Complex> rminus = detail::arnoldi_ritz(n, counts.k_minus, inv, ctx, rng);

    std::vector<Complex> pool;
    auto add = [&](Complex z) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return;
        if (std::abs(z) < 1e-13) return;
        Complex m(-std::abs(z.real()), z.imag());  // mirror rule
        if (std::abs(m.real()) < 1e-13 * std::abs(m)) return;
        for (const Complex& p : pool)
            if (std::abs(p - m) <= 1e-8 * std::abs(m)) return;
        pool.push_back(m);
    };
    // Near-zero Ritz values are breakdown artifacts; inverting one would
    // plant an absurdly large shift, so filter before inversion.
    double top_plus = 0.0, top_minus = 0.0;
    for (const Complex& z : rplus) top_plus = std::max(top_plus, std::abs(z));
    for (const Complex& z : rminus) top_minus = std::max(top_minus, std::abs(z));
    for (const Complex& z : rplus)
        if (std::abs(z) > 1e-10 * top_plus) add(z);
    for (const Complex& z : rminus)
        if (std::abs(z) > 1e-10 * top_minus) add(1.0 / z);

    if (pool.empty()) throw EmptyStableSet("heuristic_shifts: no usable Ritz values");
    if (static_cast<int>(pool.size()) > counts.pool_cap)
        pool.resize(static_cast<std::size_t>(counts.pool_cap));
    return lp_mnmx(pool, counts.n_shifts, ShiftSet::Provenance::heuristic);
}

// Projection shifts: orthonormalize the supplied blocks, form the small
// projected closed-loop pencil, keep its stable eigenvalues.
inline ShiftSet adaptive_shifts(const DaeSystem& sys, const Mat& K, const std::vector<Mat>& basis_blocks,
                                int r_max = 15) {
    int total = 0;
    for (const Mat& b : basis_blocks) {
        if (b.rows() != sys.n_v) throw DimensionMismatch("adaptive_shifts: basis block row mismatch");
        total += static_cast<int>(b.cols());
    }
    if (total == 0) throw InvalidSpec("adaptive_shifts: empty basis");
    Mat basis(sys.n_v, total);
    int at = 0;
    for (const Mat& b : basis_blocks) {
        basis.middleCols(at, static_cast<int>(b.cols())) = b;
        at += static_cast<int>(b.cols());
    }

    Eigen::ColPivHouseholderQR<Mat> qr(basis);
    const int rank = static_cast<int>(qr.rank());
    if (rank == 0) throw EmptyStableSet("adaptive_shifts: basis spans nothing");
    Mat Q = qr.householderQ() * Mat::Identity(sys.n_v, rank);

    Mat Ap = Q.transpose() * (sys.A * Q) - (Q.transpose() * sys.B) * (K.transpose() * Q);
    Mat Mp = Q.transpose() * (sys.M * Q);

    Eigen::GeneralizedEigenSolver<Mat> ges;
    ges.compute(Ap, Mp, false);
    const double inf_cut = 1.0 / std::sqrt(std::numeric_limits<double>::epsilon());
    std::vector<Complex> stable;
    for (int i = 0; i < rank; ++i) {
        if (ges.betas()(i) == 0.0) continue;
        const Complex lam = ges.alphas()(i) / ges.betas()(i);
        if (std::abs(lam) > inf_cut) continue;
        if (lam.real() < 0.0) stable.push_back(lam);  // unstable Ritz values dropped
    }
    if (stable.empty()) throw EmptyStableSet("adaptive_shifts: no stable Ritz values");
    return lp_mnmx(stable, std::min(r_max, rank), ShiftSet::Provenance::adaptive);
}

// Strategy interface consumed by the ADI sweep: one call at sweep start,
// refreshes whenever the working set is exhausted.
class ShiftProvider {
  public:
    virtual ~ShiftProvider() = default;
    virtual ShiftSet initial(const DaeSystem& sys, const ProjectorContext& ctx, const Mat& K,
                             const Mat& W0) = 0;
    virtual ShiftSet refresh(const DaeSystem& sys, const ProjectorContext& ctx, const Mat& K,
                             const std::vector<Mat>& blocks) = 0;
};

class HeuristicShiftProvider final : public ShiftProvider {
  public:
    explicit HeuristicShiftProvider(const ShiftCounts& counts = {}, unsigned seed = 7)
        : counts_(counts), seed_(seed) {}

    ShiftSet initial(const DaeSystem& sys, const ProjectorContext& ctx, const Mat& K,
                     const Mat&) override {
        set_ = heuristic_shifts(sys, ctx, K, counts_, seed_);
        return set_;
    }
    // classical cycling: exhausted sets are reused unchanged
    ShiftSet refresh(const DaeSystem&, const ProjectorContext&, const Mat&,
                     const std::vector<Mat>&) override {
        return set_;
    }

  private:
    ShiftCounts counts_;
    unsigned seed_;
    ShiftSet set_;
};

class AdaptiveShiftProvider final : public ShiftProvider {
  public:
    explicit AdaptiveShiftProvider(int r_max = 15, const ShiftCounts& fallback = {}, unsigned seed = 7)
        : r_max_(r_max), fallback_(fallback), seed_(seed) {}

    ShiftSet initial(const DaeSystem& sys, const ProjectorContext& ctx, const Mat& K,
                     const Mat& W0) override {
        try {
            return adaptive_shifts(sys, K, {W0}, r_max_);
        } catch (const EmptyStableSet&) {
            return heuristic_shifts(sys, ctx, K, fallback_, seed_);
        }
    }
    ShiftSet refresh(const DaeSystem& sys, const ProjectorContext& ctx, const Mat& K,
                     const std::vector<Mat>& blocks) override {
        try {
            if (blocks.empty()) throw EmptyStableSet("adaptive refresh without basis blocks");
            return adaptive_shifts(sys, K, blocks, r_max_);
        } catch (const EmptyStableSet&) {
            return heuristic_shifts(sys, ctx, K, fallback_, seed_);
        }
    }

  private:
    int r_max_;
    ShiftCounts fallback_;
    unsigned seed_;
};

}  // namespace knadi
