#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "knadi/newton.hpp"
#include "knadi/oracle.hpp"
#include "knadi/problem_gen.hpp"

#include "helpers.hpp"

using namespace knadi;

namespace {

DaeSystem scalar_system() {
    ProblemSpec spec;
    spec.family = ProblemSpec::Family::scalar_unstable;
    return generate(spec);
}

}  // namespace

TEST_CASE("newton_init builds the signed residual factor", "[newton]") {
    DaeSystem sys = scalar_system();
    ProjectorContext ctx(sys);
    Mat K0 = 2.0 * Mat::Ones(1, 1);
    NewtonState st = newton_init(sys, ctx, K0);

    REQUIRE(st.W_bar.rows() == 1);
    REQUIRE(st.W_bar.cols() == 2);
    CHECK(st.W_bar(0, 0) == 1.0);  // C^T column
    CHECK(st.W_bar(0, 1) == 2.0);  // K column
    CHECK(st.dK_acc.cols() == 0);
    CHECK(st.residual.n_pos == 2);
    CHECK((st.K - K0).norm() == 0.0);
    // || [1 2] [1 2]^T ||_F = 5
    CHECK(std::abs(st.initial_norm - 5.0) <= 1e-14);

    CHECK_THROWS_AS(newton_init(sys, ctx, Mat::Zero(2, 1)), DimensionMismatch);
    CHECK_THROWS_AS(newton_init(sys, ctx, Mat::Zero(1, 2)), DimensionMismatch);
}

TEST_CASE("newton_init folds the output weight into the factor", "[newton]") {
    Mat M = Mat::Ones(1, 1), A = Mat::Ones(1, 1), G(1, 0);
    DaeSystem sys = testing::make_system(M, A, G, Mat::Ones(1, 1), Mat::Ones(1, 1), 4.0);
    ProjectorContext ctx(sys);
    NewtonState st = newton_init(sys, ctx, 2.0 * Mat::Ones(1, 1));
    CHECK(st.W_bar(0, 0) == 2.0);  // sqrt(alpha) C^T
    CHECK(st.W_bar(0, 1) == 2.0);
    CHECK(std::abs(st.initial_norm - 8.0) <= 1e-14);
}

TEST_CASE("inner tolerance controller branches", "[newton]") {
    SolverConfig cfg;  // quadratic forcing, eta_bar 0.1, exact start off

    InnerTolerance t = exact_start_controller(cfg, 0, 1.0, 7.0);
    CHECK_FALSE(t.relative);
    CHECK(std::abs(t.value - 0.7) <= 1e-15);  // min(0.1, 0.9) * 7
    CHECK(t.eta_log == 0.1);

    t = exact_start_controller(cfg, 3, 1e-3, 2.0);
    CHECK(std::abs(t.eta_log - 9e-4) <= 1e-18);  // 0.9 * rel below the cap
    CHECK(std::abs(t.value - 1.8e-3) <= 1e-17);

    cfg.forcing = ForcingRule::constant;
    cfg.eta_constant = 0.05;
    t = exact_start_controller(cfg, 5, 1e-6, 3.0);
    CHECK(std::abs(t.value - 0.15) <= 1e-15);
    CHECK(t.eta_log == 0.05);
    CHECK_FALSE(t.relative);

    SolverConfig es;
    es.exact_start = true;  // tol 1e-2 until the residual halves, two steps max
    t = exact_start_controller(es, 0, 1.0, 1.0);
    CHECK(t.relative);
    CHECK(t.value == 1e-2);
    CHECK(t.eta_log == 1e-2);
    t = exact_start_controller(es, 1, 0.6, 1.0);
    CHECK(t.relative);
    t = exact_start_controller(es, 1, 0.4, 1.0);  // below the switch: back to forcing
    CHECK_FALSE(t.relative);
    CHECK(t.eta_log == 0.1);
    t = exact_start_controller(es, 2, 0.9, 1.0);  // step cap: back to forcing
    CHECK_FALSE(t.relative);

    SolverConfig fx;
    fx.fixed_adi_tol = 1e-8;
    fx.exact_start = true;  // fixed tolerance wins over everything
    t = exact_start_controller(fx, 0, 1.0, 5.0);
    CHECK(t.relative);
    CHECK(t.value == 1e-8);
    CHECK(t.eta_log == 1e-8);
}

TEST_CASE("cubic root finder handles every degeneracy", "[newton]") {
    auto sorted = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v;
    };

    auto r3 = sorted(detail::cubic_real_roots(1.0, -6.0, 11.0, -6.0));
    REQUIRE(r3.size() == 3);
    CHECK(std::abs(r3[0] - 1.0) <= 1e-9);
    CHECK(std::abs(r3[1] - 2.0) <= 1e-9);
    CHECK(std::abs(r3[2] - 3.0) <= 1e-9);

    auto r2 = sorted(detail::cubic_real_roots(0.0, 1.0, -3.0, 2.0));
    REQUIRE(r2.size() == 2);
    CHECK(std::abs(r2[0] - 1.0) <= 1e-12);
    CHECK(std::abs(r2[1] - 2.0) <= 1e-12);

    auto r1 = detail::cubic_real_roots(0.0, 0.0, 2.0, -4.0);
    REQUIRE(r1.size() == 1);
    CHECK(std::abs(r1[0] - 2.0) <= 1e-12);

    CHECK(detail::cubic_real_roots(0.0, 0.0, 0.0, 5.0).empty());
    CHECK(detail::cubic_real_roots(0.0, 1.0, 0.0, 1.0).empty());  // x^2 + 1
}

TEST_CASE("line search frozen cases", "[newton]") {
    LineSearchPolynomial sq;  // (1 - xi)^2: full step is admissible
    sq.c = {1.0, -2.0, 1.0, 0.0, 0.0};
    CHECK(line_search(sq, 0.1, LineSearchRule::armijo) == 1.0);
    CHECK(line_search(sq, 0.1, LineSearchRule::polymin) == 1.0);
    CHECK(line_search(sq, 0.1, LineSearchRule::none) == 1.0);

    LineSearchPolynomial quart;  // 1 - 2 xi + xi^2 + 5 xi^4: full step overshoots
    quart.c = {1.0, -2.0, 1.0, 0.0, 5.0};
    CHECK(line_search(quart, 0.1, LineSearchRule::armijo) == 0.5);
    const double xi = line_search(quart, 0.1, LineSearchRule::polymin);
    CHECK(xi > 0.3);
    CHECK(xi < 0.5);
    CHECK(std::abs(quart.derivative(xi)) <= 1e-9);     // interior stationary point
    CHECK(quart.eval(xi) < quart.eval(0.5));           // strictly better than halving

    LineSearchPolynomial flat;  // no decrease anywhere
    flat.c = {1.0, 0.0, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(line_search(flat, 0.1, LineSearchRule::armijo), NoAdmissibleStep);
    CHECK_THROWS_AS(line_search(flat, 0.1, LineSearchRule::polymin), NoAdmissibleStep);
    CHECK(line_search(flat, 0.1, LineSearchRule::none) == 1.0);

    LineSearchPolynomial zero;  // vanished residual short-circuits
    CHECK(line_search(zero, 0.1, LineSearchRule::armijo) == 1.0);
}

TEST_CASE("one exact inner sweep reproduces the hand iteration", "[newton]") {
    // closed loop at K = 2 is -1; the heuristic shift hits it exactly, so a
    // single sweep solves the Lyapunov equation and the update lands on 5/2
    DaeSystem sys = scalar_system();
    ProjectorContext ctx(sys);
    AdiStop stop;
    stop.rel_to_initial = 1e-12;
    AdiOptions opt;

    Mat K = 2.0 * Mat::Ones(1, 1);
    HeuristicShiftProvider prov1;
    AdiResult r1 = run_adi(sys, ctx, K, prov1, stop, opt);
    REQUIRE(r1.outcome == AdiOutcome::converged);
    CHECK(r1.state.steps == 1);
    Mat K1 = K + r1.state.dK;
    CHECK(std::abs(K1(0, 0) - 2.5) <= 1e-12);

    HeuristicShiftProvider prov2;
    AdiResult r2 = run_adi(sys, ctx, K1, prov2, stop, opt);
    REQUIRE(r2.outcome == AdiOutcome::converged);
    Mat K2 = K1 + r2.state.dK;
    CHECK(std::abs(K2(0, 0) - 29.0 / 12.0) <= 1e-12);
}

TEST_CASE("the scalar problem converges to the closed form", "[newton]") {
    DaeSystem sys = scalar_system();
    Mat K0 = 2.0 * Mat::Ones(1, 1);
    NewtonResult res = newton_solve(sys, K0);

    CHECK(std::abs(res.K(0, 0) - (1.0 + std::sqrt(2.0))) <= 1e-9);
    CHECK(res.rel_residual <= 1e-8);
    CHECK(res.iterations == static_cast<int>(res.log.rows.size()));
    CHECK(res.iterations >= 3);
    CHECK_FALSE(res.Z.has_value());  // not requested
    for (const auto& row : res.log.rows) {
        CHECK(row.xi == 1.0);  // exclusively full steps on the monotone path
        CHECK(row.adi_steps == 1);
        CHECK(row.lin_solves == 1);
    }
    CHECK(res.log.rows.back().rel_residual == res.rel_residual);
}

TEST_CASE("constant forcing is honored in the log", "[newton]") {
    DaeSystem sys = scalar_system();
    SolverConfig cfg;
    cfg.forcing = ForcingRule::constant;
    cfg.eta_constant = 0.5;
    NewtonResult res = newton_solve(sys, 2.0 * Mat::Ones(1, 1), cfg);
    CHECK(std::abs(res.K(0, 0) - (1.0 + std::sqrt(2.0))) <= 1e-8);
    for (const auto& row : res.log.rows) CHECK(row.eta == 0.5);
}

TEST_CASE("stokes flow agrees with the dense oracle", "[newton]") {
    ProblemSpec spec;
    spec.nx = 4;
    spec.ny = 4;
    spec.seed = 3;
    DaeSystem sys = generate(spec);
    Mat K0 = initial_feedback(sys);
    REQUIRE(K0.norm() == 0.0);  // stable pencil starts from zero

    SolverConfig cfg;
    cfg.tol_newton = 1e-10;
    NewtonResult res = newton_solve(sys, K0, cfg);

    DenseProjectedSystem proj = build_theta(sys);
    CareResult care = dense_care_solve(proj, K0);
    REQUIRE(care.K.norm() > 0.0);
    CHECK((res.K - care.K).norm() <= 1e-6 * care.K.norm());
    CHECK(max_real(pencil_eigenvalues(sys, res.K)) < 0.0);
    CHECK(res.log.rows.size() == static_cast<std::size_t>(res.iterations));
}

TEST_CASE("exact-start tightens the first sweeps", "[newton]") {
    ProblemSpec spec;
    spec.nx = 4;
    spec.ny = 4;
    spec.seed = 3;
    DaeSystem sys = generate(spec);
    SolverConfig cfg;
    cfg.exact_start = true;
    NewtonResult res = newton_solve(sys, Mat::Zero(sys.n_v, sys.n_u), cfg);
    REQUIRE_FALSE(res.log.rows.empty());
    CHECK(res.log.rows.front().eta == 1e-2);  // controller value on the first sweep
    CHECK(res.rel_residual <= 1e-8);
}

TEST_CASE("solution tracking with dense residual stopping", "[newton]") {
    ProblemSpec spec;
    spec.nx = 4;
    spec.ny = 4;
    spec.seed = 3;
    DaeSystem sys = generate(spec);
    ProjectorContext ctx(sys);
    Mat K0 = Mat::Zero(sys.n_v, sys.n_u);

    SolverConfig cfg;
    cfg.explicit_newton_residual = true;
    cfg.fixed_adi_tol = 1e-8;
    cfg.shift_strategy = ShiftStrategy::heuristic;
    cfg.line_search = LineSearchRule::none;
    NewtonResult res = newton_solve(sys, K0, cfg);

    REQUIRE(res.Z.has_value());
    Mat X = res.Z->Z * res.Z->Z.transpose();
    Mat W0 = newton_init(sys, ctx, K0).W_bar;
    const double r0 = (W0 * W0.transpose()).norm();
    CHECK(dense_velocity_residual(sys, X).norm() <= 1e-8 * r0);
    // the tracked factor reproduces the feedback it reports
    CHECK((Mat(sys.M) * X * sys.B - res.K).norm() <= 1e-8 * (1.0 + res.K.norm()));
}

TEST_CASE("configuration validation", "[newton]") {
    DaeSystem sys = scalar_system();
    Mat K0 = 2.0 * Mat::Ones(1, 1);

    SolverConfig bad;
    bad.eta_bar = 1.5;
    CHECK_THROWS_AS(newton_solve(sys, K0, bad), InvalidSpec);
    bad = SolverConfig{};
    bad.beta = 0.95;  // collides with 1 - eta_bar
    CHECK_THROWS_AS(newton_solve(sys, K0, bad), InvalidSpec);
    bad = SolverConfig{};
    bad.forcing = ForcingRule::constant;
    bad.eta_constant = 1.5;
    CHECK_THROWS_AS(newton_solve(sys, K0, bad), InvalidSpec);

    CHECK_THROWS_AS(newton_solve(sys, Mat::Zero(3, 1)), DimensionMismatch);

    SolverConfig capped;
    capped.max_newton = 1;
    CHECK_THROWS_AS(newton_solve(sys, K0, capped), MaxIterations);
}
