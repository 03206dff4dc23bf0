#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "knadi/oracle.hpp"
#include "knadi/problem_gen.hpp"

using namespace knadi;

TEST_CASE("generators are deterministic in the seed", "[problem_gen]") {
    ProblemSpec st;
    st.nx = 4;
    st.ny = 4;
    st.seed = 9;
    DaeSystem a = generate(st), b = generate(st);
    CHECK(Mat(a.A - b.A).norm() == 0.0);
    CHECK((a.B - b.B).norm() == 0.0);
    CHECK((a.C - b.C).norm() == 0.0);

    ProblemSpec sr;
    sr.family = ProblemSpec::Family::random_sparse;
    sr.n_v = 40;
    sr.n_p = 8;
    sr.seed = 13;
    DaeSystem c = generate(sr), d = generate(sr);
    CHECK(Mat(c.M - d.M).norm() == 0.0);
    CHECK(Mat(c.A - d.A).norm() == 0.0);
    CHECK(Mat(c.G - d.G).norm() == 0.0);
    CHECK((c.B - d.B).norm() == 0.0);
    CHECK((c.C - d.C).norm() == 0.0);

    sr.seed = 14;  // a different seed must actually change the draw
    DaeSystem e = generate(sr);
    CHECK(Mat(c.A - e.A).norm() > 0.0);
}

TEST_CASE("stokes grid structure", "[problem_gen]") {
    ProblemSpec spec;
    spec.nx = 4;
    spec.ny = 4;
    spec.seed = 2;
    DaeSystem sys = generate(spec);

    CHECK(sys.n_v == 24);  // 3*4 x-edges + 4*3 y-edges
    CHECK(sys.n_p == 15);  // 16 cells, one pinned
    CHECK(validate(sys).ok());

    // mass matrix is the cell volume times identity
    CHECK((Mat(sys.M) - 0.0625 * Mat::Identity(24, 24)).norm() == 0.0);

    Mat Ad = Mat(sys.A);
    CHECK((Ad - Ad.transpose()).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<Mat> es(Ad);
    CHECK(es.eigenvalues().maxCoeff() < 0.0);  // Dirichlet Laplacian

    // one-hot actuation and observation
    for (int k = 0; k < sys.n_u; ++k) {
        CHECK(sys.B.col(k).sum() == 1.0);
        CHECK((sys.B.col(k).array() != 0.0).count() == 1);
    }
    for (int k = 0; k < sys.n_y; ++k) {
        CHECK(sys.C.row(k).sum() == 1.0);
        CHECK((sys.C.row(k).array() != 0.0).count() == 1);
    }

    // the open pencil is stable, so the starting feedback is zero
    CHECK(max_real(pencil_eigenvalues(sys, Mat::Zero(24, 2))) < 0.0);
    CHECK(initial_feedback(sys).norm() == 0.0);

    ProblemSpec bad;
    bad.nx = 1;
    CHECK_THROWS_AS(generate(bad), InvalidSpec);
}

TEST_CASE("random sparse instances plant their spectral gap", "[problem_gen]") {
    ProblemSpec spec;
    spec.family = ProblemSpec::Family::random_sparse;
    spec.n_v = 40;
    spec.n_p = 8;
    spec.seed = 11;
    DaeSystem sys = generate(spec);
    CHECK(validate(sys).ok());

    const int nb = 38;  // planted modes sit on the last two indices
    Mat Ad = Mat(sys.A), Md = Mat(sys.M), Gd = Mat(sys.G);
    CHECK(Ad(nb, nb) == -1.0);
    CHECK(Ad(nb + 1, nb + 1) == -0.5);
    CHECK(Ad.row(nb).norm() == 1.0);  // fully decoupled rows and columns
    CHECK(Ad.col(nb).norm() == 1.0);
    CHECK(Ad.row(nb + 1).norm() == 0.5);
    CHECK(Md(nb, nb) == 1.0);
    CHECK(Md.row(nb).norm() == 1.0);
    CHECK(Gd.row(nb).norm() == 0.0);
    CHECK(Gd.row(nb + 1).norm() == 0.0);

    auto eigs = pencil_eigenvalues(sys, Mat::Zero(40, 2));
    CHECK(static_cast<int>(eigs.size()) == 32);  // n_v - n_p finite eigenvalues
    CHECK(std::abs(max_real(eigs) + 0.5) <= 1e-7);

    // bulk spectrum stays left of -8 by the field-of-values bound
    int near = 0;
    for (const Complex& e : eigs)
        if (e.real() > -8.0) ++near;
    CHECK(near == 2);
}

TEST_CASE("unstable variant translates the pencil, nothing else", "[problem_gen]") {
    ProblemSpec spec;
    spec.family = ProblemSpec::Family::random_sparse;
    spec.n_v = 40;
    spec.n_p = 8;
    spec.seed = 11;
    DaeSystem stable = generate(spec);
    spec.unstable = true;
    spec.mu = 3.0;
    DaeSystem shifted = generate(spec);

    CHECK(Mat(shifted.M - stable.M).norm() == 0.0);
    CHECK(Mat(shifted.G - stable.G).norm() == 0.0);
    CHECK((shifted.B - stable.B).norm() == 0.0);
    double scale = Mat(stable.A).norm();
    CHECK(Mat(shifted.A - stable.A - 3.0 * stable.M).norm() <= 1e-12 * scale);

    auto eigs = pencil_eigenvalues(shifted, Mat::Zero(40, 2));
    CHECK(std::abs(max_real(eigs) - 2.5) <= 1e-7);  // exactly mu - 1/2
    int unstable_count = 0;
    for (const Complex& e : eigs)
        if (e.real() > 0.0) ++unstable_count;
    CHECK(unstable_count == 2);  // only the planted modes cross
}

TEST_CASE("random sparse rejects impossible sizes", "[problem_gen]") {
    ProblemSpec spec;
    spec.family = ProblemSpec::Family::random_sparse;
    spec.n_v = 10;
    spec.n_p = 9;
    CHECK_THROWS_AS(generate(spec), InvalidSpec);
    spec.n_p = 4;
    spec.unstable = true;
    spec.mu = 0.3;  // cannot cross the planted gap
    CHECK_THROWS_AS(generate(spec), InvalidSpec);
    spec.unstable = false;
    spec.n_v = 1;
    spec.n_p = 0;
    CHECK_THROWS_AS(generate(spec), InvalidSpec);
}

TEST_CASE("diagonal family", "[problem_gen]") {
    ProblemSpec spec;
    spec.family = ProblemSpec::Family::diagonal;
    spec.n = 4;
    DaeSystem sys = generate(spec);
    CHECK(sys.n_v == 4);
    CHECK(sys.n_p == 0);
    Mat Ad = Mat(sys.A);
    for (int i = 0; i < 4; ++i) CHECK(Ad(i, i) == -(i + 1.0));
    CHECK((Mat(sys.M) - Mat::Identity(4, 4)).norm() == 0.0);
    CHECK(initial_feedback(sys).norm() == 0.0);

    spec.n = 0;
    CHECK_THROWS_AS(generate(spec), InvalidSpec);
}

TEST_CASE("scalar fixture bootstraps its starting feedback", "[problem_gen]") {
    ProblemSpec spec;
    spec.family = ProblemSpec::Family::scalar_unstable;
    DaeSystem sys = generate(spec);
    CHECK(sys.n_v == 1);
    CHECK(Mat(sys.A)(0, 0) == 1.0);

    // unstable pencil: the bootstrap returns 1.5x the optimal unit-weight gain
    Mat K0 = initial_feedback(sys);
    CHECK(std::abs(K0(0, 0) - 1.5 * (1.0 + std::sqrt(2.0))) <= 1e-8);
    CHECK(max_real(pencil_eigenvalues(sys, K0)) < 0.0);
}

TEST_CASE("bootstrap stabilizes a constrained unstable instance", "[problem_gen]") {
    ProblemSpec spec;
    spec.family = ProblemSpec::Family::random_sparse;
    spec.n_v = 30;
    spec.n_p = 6;
    spec.seed = 4;
    spec.unstable = true;
    spec.mu = 2.0;
    DaeSystem sys = generate(spec);
    REQUIRE(max_real(pencil_eigenvalues(sys, Mat::Zero(30, 2))) > 0.0);

    Mat K0 = initial_feedback(sys);
    CHECK(K0.norm() > 0.0);
    CHECK(max_real(pencil_eigenvalues(sys, K0)) < -1e-10);
}

TEST_CASE("output weight flows into the system", "[problem_gen]") {
    ProblemSpec spec;
    spec.family = ProblemSpec::Family::diagonal;
    spec.n = 3;
    spec.alpha = 2.5;
    DaeSystem sys = generate(spec);
    CHECK(sys.alpha == 2.5);
    CHECK((scaled_output(sys) - std::sqrt(2.5) * sys.C).norm() == 0.0);
}
