#pragma once

#include <chrono>
#include <cmath>
#include <concepts>
#include <functional>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "knadi/dae_system.hpp"
#include "knadi/errors.hpp"
#include "knadi/lowrank.hpp"
#include "knadi/projector.hpp"
#include "knadi/saddle.hpp"
#include "knadi/shifts.hpp"
#include "knadi/types.hpp"

// Low-rank residual ADI in real arithmetic: conjugate shift pairs are
// absorbed into rank-2 real column blocks off a single complex solve, the
// residual factor W and the feedback change dK are accumulated in place, and
// the solution factor Z only grows.

namespace knadi {

struct AdiOptions {
    NormKind norm = NormKind::spectral;
    bool track_solution = true;   // keep Z (not needed when only K is wanted)
    bool store_v_blocks = true;   // keep unscaled V data for shift refreshes
    // per-step sink: (step counter, shift, residual norm, seconds)
    std::function<void(int, Complex, double, double)> on_step;
};

struct AdiStop {
    double eta_times_newton_resid = 0.0;  // absolute threshold on the residual norm
    double rel_to_initial = 0.0;          // if > 0 overrides: threshold = rel * initial norm
    int max_steps = 300;
    double growth_cap = 1e6;
};

enum class AdiOutcome { converged, growth_abort };

struct AdiState {
    int steps = 0;       // +1 per real shift, +2 per conjugate pair
    int lin_solves = 0;  // one saddle solve per real shift and per pair
    Mat W;               // residual factor, n_v x (n_y + n_u), column count constant
    Mat dK;              // accumulated feedback change, n_v x n_u
    LowRankFactor Z;
    int cursor = 0;                 // position in the active shift set
    double initial_norm = 0.0;      // norm of W before the first step
    std::vector<double> norms;      // residual norm after each step
    std::vector<Mat> v_blocks;      // unscaled V ([Re V, Im V] for pairs) since last refresh

    // last-step bookkeeping so a diverging step can be dropped exactly
    int last_cols = 0;
    Mat prev_W;
    Mat last_dK_delta;
};

struct AdiResult {
    AdiState state;
    AdiOutcome outcome;
};

inline AdiState adi_init(const ProjectorContext& ctx, const Mat& C_scaled, const Mat& K) {
    const DaeSystem& sys = ctx.system();
    if (C_scaled.cols() != sys.n_v) throw DimensionMismatch("adi_init: output matrix column mismatch");
    if (K.rows() != sys.n_v || K.cols() != sys.n_u)
        throw DimensionMismatch("adi_init: feedback must be n_v x n_u");
    AdiState st;
    Mat W0(sys.n_v, C_scaled.rows() + K.cols());
    W0 << C_scaled.transpose(), K;
    st.W = ctx.apply_pi(W0);
    st.dK = -K;
    st.Z.Z = Mat(sys.n_v, 0);
    return st;
}

namespace detail {

inline void append_columns(Mat& Z, const Mat& block) {
    Mat grown(Z.rows(), Z.cols() + block.cols());
    grown << Z, block;
    Z = std::move(grown);
}

}  // namespace detail

// One ADI step. A real shift consumes itself; a complex shift (Im > 0)
// consumes its conjugate implicitly and appends a real rank-2w block.
// Solver is anything with the FeedbackSolver/ClosedLoopSolver solve surface.
template <typename Solver>
    requires requires(Solver& s, const Mat& m, const CMat& c) {
        { s.solve(m) } -> std::convertible_to<Mat>;
        { s.solve(c) } -> std::convertible_to<CMat>;
    }
inline void adi_step(AdiState& st, Complex q, const DaeSystem& sys, Solver& fs,
                     const AdiOptions& opt = {}) {
    if (!(q.real() < 0.0)) throw InvalidSpec("adi_step: shift must have Re < 0");
    st.prev_W = st.W;
    if (q.imag() == 0.0) {
        Mat V = fs.solve(st.W);
        st.W -= 2.0 * q.real() * (sys.Mrow * V);
        Mat Vt = std::sqrt(-2.0 * q.real()) * V;
        if (opt.track_solution) detail::append_columns(st.Z.Z, Vt);
        st.last_dK_delta = sys.Mrow * (Vt * (Vt.transpose() * sys.B));
        st.last_cols = static_cast<int>(Vt.cols());
        if (opt.store_v_blocks) st.v_blocks.push_back(V);
        st.steps += 1;
    } else {
        if (!(q.imag() > 0.0)) throw InvalidSpec("adi_step: pass the Im > 0 member of a pair");
        CMat Vc = fs.solve(CMat(st.W.cast<Complex>()));
        const double gamma = 2.0 * std::sqrt(-q.real());
        const double delta = q.real() / q.imag();
        Mat Vr = Vc.real(), Vi = Vc.imag();
        Mat core = Vr + delta * Vi;
        st.W += (gamma * gamma) * (sys.Mrow * core);
        Mat V1 = gamma * core;
        Mat V2 = gamma * std::sqrt(delta * delta + 1.0) * Vi;
        Mat block(sys.n_v, V1.cols() + V2.cols());
        block << V1, V2;
        if (opt.track_solution) detail::append_columns(st.Z.Z, block);
        st.last_dK_delta =
            sys.Mrow * (V1 * (V1.transpose() * sys.B) + V2 * (V2.transpose() * sys.B));
        st.last_cols = static_cast<int>(block.cols());
        if (opt.store_v_blocks) {
            Mat vb(sys.n_v, Vr.cols() + Vi.cols());
            vb << Vr, Vi;
            st.v_blocks.push_back(vb);
        }
        st.steps += 2;
    }
    st.dK += st.last_dK_delta;
    st.lin_solves += 1;
}

// Convenience overload building the shifted factorization on the spot.
inline void adi_step(AdiState& st, Complex q, const DaeSystem& sys, const Mat& K,
                     const AdiOptions& opt = {}) {
    Complex qq = q.imag() < 0.0 ? std::conj(q) : q;
    ClosedLoopSolver fs(sys, qq, K);
    adi_step(st, qq, sys, fs, opt);
}

// Drop the most recent step from the state: residual factor and feedback
// change are restored exactly; the counters keep the work that was spent.
inline void truncate_last_step(AdiState& st) {
    if (st.last_cols == 0) throw Error("truncate_last_step: nothing to drop");
    st.W = st.prev_W;
    st.dK -= st.last_dK_delta;
    if (st.Z.Z.cols() >= st.last_cols)
        st.Z.Z = Mat(st.Z.Z.leftCols(st.Z.Z.cols() - st.last_cols));
    if (!st.v_blocks.empty()) st.v_blocks.pop_back();
    if (!st.norms.empty()) st.norms.pop_back();
    st.last_cols = 0;
}

// Full sweep: consume shifts from the provider, refresh on exhaustion, stop
// on the threshold, report growth aborts to the caller instead of guessing.
inline AdiResult run_adi(const DaeSystem& sys, const ProjectorContext& ctx, const Mat& K,
                         ShiftProvider& shifts, const AdiStop& stop, const AdiOptions& opt = {}) {
    AdiState st = adi_init(ctx, scaled_output(sys), K);
    st.initial_norm = gram_norm(st.W, opt.norm);
    const double threshold = stop.rel_to_initial > 0.0 ? stop.rel_to_initial * st.initial_norm
                                                       : stop.eta_times_newton_resid;
    if (st.initial_norm <= threshold) return {std::move(st), AdiOutcome::converged};

    ShiftSet set = shifts.initial(sys, ctx, K, st.W);
    if (set.empty()) throw EmptyStableSet("run_adi: shift provider returned an empty set");

    std::map<std::pair<double, double>, std::unique_ptr<ClosedLoopSolver>> cache;
    auto solver_for = [&](Complex q) -> ClosedLoopSolver& {
        auto key = std::make_pair(q.real(), q.imag());
        auto it = cache.find(key);
        if (it == cache.end())
            it = cache.emplace(key, std::make_unique<ClosedLoopSolver>(sys, q, K)).first;
        return *it->second;
    };

    while (true) {
        if (st.steps >= stop.max_steps)
            throw NonConvergent(NonConvergent::Reason::max_steps,
                                "run_adi: step cap reached before the threshold");
        if (st.cursor >= set.size()) {
            ShiftSet next = shifts.refresh(sys, ctx, K, st.v_blocks);
            if (next.empty()) throw EmptyStableSet("run_adi: shift refresh returned an empty set");
            if (next.values() != set.values()) cache.clear();
            set = std::move(next);
            st.v_blocks.clear();
            st.cursor = 0;
        }
        const Complex q = set[st.cursor];
        if (q.imag() < 0.0) {  // conjugate already consumed with its partner
            ++st.cursor;
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        adi_step(st, q, sys, solver_for(q), opt);
        st.cursor += q.imag() > 0.0 ? 2 : 1;
        const double nrm = gram_norm(st.W, opt.norm);
        st.norms.push_back(nrm);
        if (opt.on_step) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            opt.on_step(st.steps, q, nrm, secs);
        }
        if (!std::isfinite(nrm) || nrm > stop.growth_cap * st.initial_norm)
            return {std::move(st), AdiOutcome::growth_abort};
        if (nrm <= threshold) return {std::move(st), AdiOutcome::converged};
    }
}

}  // namespace knadi
