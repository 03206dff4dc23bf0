#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "knadi/newton.hpp"
#include "knadi/oracle.hpp"
#include "knadi/shifts.hpp"

// Benchmark harness: five solver setups run on one system, counters collected
// into a small CSV. Setup i is the classical reference (complex shifted
// iteration, every step pays a full solve); ii..v layer the cheaper variants
// on top of the production Newton driver.

namespace knadi {

struct BenchRow {
    std::string setup;
    int kn = 0;          // Newton steps
    int adi = 0;         // inner iteration steps, summed
    int lin_solves = 0;  // saddle-point solves, summed
    int ls = 0;          // damped Newton steps (step size below one)
    double seconds = 0.0;
    double rel_residual = 0.0;
};

// Setup i: exact Kleinman-Newton on the dense oracle path. Each Newton step
// solves its Lyapunov equation with the complex low-rank iteration, cycling
// one freshly computed shift set until the dense Lyapunov residual drops
// below tol_lyap relative to the right-hand side.
inline BenchRow bench_setup_i(const DaeSystem& sys, const Mat& K0, double tol_newton,
                              double tol_lyap = 1e-10, int dense_cap = 1000, int max_newton = 50,
                              int max_adi = 300) {
    const auto t0 = std::chrono::steady_clock::now();
    ProjectorContext ctx(sys);

    auto rhs_factor = [&](const Mat& K) {
        Mat W0(sys.n_v, sys.n_y + K.cols());
        W0.leftCols(sys.n_y) = scaled_output(sys).transpose();
        W0.rightCols(K.cols()) = K;
        return ctx.apply_pi(W0);
    };

    BenchRow row;
    row.setup = "i";

    Mat K = K0;
    const Mat W_init = rhs_factor(K0);
    const double r0 = (W_init * W_init.transpose()).norm();
    if (r0 <= 0.0) throw InvalidSpec("bench: zero initial residual");

    for (int k = 1; k <= max_newton; ++k) {
        const Mat W = rhs_factor(K);
        const double w_norm = gram_norm(W, NormKind::spectral);
        const ShiftSet shifts = heuristic_shifts(sys, ctx, K);

        ComplexAdiRef adi(sys, K, W);
        int cursor = 0;
        while (true) {
            if (adi.steps() >= max_adi) throw NonConvergent(NonConvergent::Reason::max_steps,
                                                            "bench setup i: inner iteration stalled");
            adi.step(shifts[cursor % static_cast<int>(shifts.size())]);
            ++cursor;
            const Mat R = dense_lyapunov_residual(sys, K, W, adi.X(), dense_cap);
            if (R.operatorNorm() <= tol_lyap * w_norm) break;
        }

        row.adi += adi.steps();
        row.lin_solves += adi.solves();
        row.kn = k;

        const Mat X = adi.X();
        K = sys.M * (X * sys.B);
        row.rel_residual = dense_velocity_residual(sys, X, dense_cap).norm() / r0;
        if (row.rel_residual <= tol_newton) break;
        if (k == max_newton) throw MaxIterations("bench setup i: Newton did not converge");
    }

    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

inline SolverConfig bench_config(const std::string& setup, double tol_newton) {
    SolverConfig s;
    s.tol_newton = tol_newton;
    if (setup == "ii" || setup == "iii" || setup == "iv") {
        s.line_search = LineSearchRule::none;
        s.fixed_adi_tol = 1e-8;
        s.shift_strategy = (setup == "iv") ? ShiftStrategy::adaptive : ShiftStrategy::heuristic;
        s.explicit_newton_residual = (setup == "ii");
    } else if (setup == "v") {
        s.line_search = LineSearchRule::armijo;
        s.forcing = ForcingRule::quadratic;
        s.exact_start = true;
        s.shift_strategy = ShiftStrategy::adaptive;
    } else {
        throw ParseError("bench: unknown setup '" + setup + "'");
    }
    return s;
}

inline BenchRow bench_setup(const DaeSystem& sys, const Mat& K0, const std::string& setup,
                            double tol_newton, int dense_cap = 1000) {
    if (setup == "i") return bench_setup_i(sys, K0, tol_newton, 1e-10, dense_cap);
    SolverConfig cfg = bench_config(setup, tol_newton);
    cfg.dense_cap = dense_cap;
    const NewtonResult res = newton_solve(sys, K0, cfg);
    BenchRow row;
    row.setup = setup;
    row.kn = res.log.total_newton();
    row.adi = res.log.total_adi();
    row.lin_solves = res.log.total_lin_solves();
    row.ls = res.log.total_line_searches();
    row.seconds = res.log.total_seconds();
    row.rel_residual = res.rel_residual;
    return row;
}

inline std::vector<std::string> parse_setups(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        // trim surrounding blanks
        size_t b = cur.find_first_not_of(" \t");
        if (b == std::string::npos) { cur.clear(); return; }
        size_t e = cur.find_last_not_of(" \t");
        out.push_back(cur.substr(b, e - b + 1));
        cur.clear();
    };
    for (char ch : csv) {
        if (ch == ',') flush();
        else cur.push_back(ch);
    }
    flush();
    if (out.empty()) throw ParseError("bench: empty setup list");
    for (const auto& s : out)
        if (s != "i" && s != "ii" && s != "iii" && s != "iv" && s != "v")
            throw ParseError("bench: unknown setup '" + s + "'");
    return out;
}

inline std::vector<BenchRow> run_bench(const DaeSystem& sys, const Mat& K0, const std::string& setups,
                                       double tol_newton, int dense_cap = 1000) {
    std::vector<BenchRow> rows;
    for (const auto& s : parse_setups(setups)) rows.push_back(bench_setup(sys, K0, s, tol_newton, dense_cap));
    return rows;
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::string out = "setup,kn,adi,lin_solves,ls,seconds,rel_residual\n";
    char buf[192];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%d,%d,%d,%.6f,%.10e\n", r.setup.c_str(), r.kn, r.adi,
                      r.lin_solves, r.ls, r.seconds, r.rel_residual);
        out += buf;
    }
    return out;
}

}  // namespace knadi
