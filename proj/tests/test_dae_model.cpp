#include <catch2/catch_amalgamated.hpp>

#include "knadi/dae_system.hpp"

#include "helpers.hpp"

using namespace knadi;
using testing::fixture_2x2;
using testing::make_system;

TEST_CASE("construction validates dimensions", "[dae]") {
    Mat M = Mat::Identity(3, 3), A = -Mat::Identity(3, 3);
    Mat G(3, 1);
    G << 1, 0, 0;
    Mat B = Mat::Ones(3, 1), C = Mat::Ones(1, 3);

    CHECK_NOTHROW(make_system(M, A, G, B, C));
    CHECK_THROWS_AS(make_system(M, -Mat::Identity(2, 2), G, B, C), DimensionMismatch);
    CHECK_THROWS_AS(make_system(M, A, Mat::Ones(2, 1), B, C), DimensionMismatch);
    CHECK_THROWS_AS(make_system(M, A, G, Mat::Ones(2, 1), C), DimensionMismatch);
    CHECK_THROWS_AS(make_system(M, A, G, B, Mat::Ones(1, 2)), DimensionMismatch);
    CHECK_THROWS_AS(make_system(M, A, Mat::Ones(3, 3), B, C), DimensionMismatch);  // n_p >= n_v
    CHECK_THROWS_AS(make_system(M, A, G, B, C, 0.0), InvalidSpec);
    CHECK_THROWS_AS(make_system(M, A, G, B, C, -1.0), InvalidSpec);
}

TEST_CASE("mass matrix asymmetry is averaged or rejected", "[dae]") {
    Mat A = -Mat::Identity(2, 2), G(2, 0);
    Mat B = Mat::Ones(2, 1), C = Mat::Ones(1, 2);

    Mat M(2, 2);
    M << 2.0, 0.5, 0.5 + 1e-15, 1.0;  // round-trip sized defect
    DaeSystem sys = make_system(M, A, G, B, C);
    Mat Md = Mat(sys.M);
    CHECK((Md - Md.transpose()).norm() == 0.0);

    M(1, 0) = 0.7;  // a real asymmetry
    CHECK_THROWS_AS(make_system(M, A, G, B, C), NotSymmetric);
}

TEST_CASE("counts and scaled output", "[dae]") {
    DaeSystem sys = fixture_2x2();
    CHECK(sys.n_v == 2);
    CHECK(sys.n_p == 1);
    CHECK(sys.n_u == 1);
    CHECK(sys.n_y == 1);

    DaeSystem weighted = DaeSystem(sys.M, sys.A, sys.G, sys.B, sys.C, 2.5);
    CHECK((scaled_output(weighted) - std::sqrt(2.5) * Mat(sys.C)).norm() == 0.0);
    CHECK((scaled_output(sys) - Mat(sys.C)).norm() == 0.0);
}

TEST_CASE("validate passes on a healthy system", "[dae]") {
    DaeSystem sys = fixture_2x2();
    ValidationReport rep = validate(sys);
    CHECK(rep.ok());
    CHECK_NOTHROW(require_valid(sys));
    CHECK(rep.to_string().find("[FAIL]") == std::string::npos);
}

TEST_CASE("validate flags an indefinite mass matrix", "[dae]") {
    Mat M(2, 2);
    M << 1, 0, 0, -1;
    Mat A = -Mat::Identity(2, 2), G(2, 0);
    DaeSystem sys = make_system(M, A, G, Mat::Ones(2, 1), Mat::Ones(1, 2));
    ValidationReport rep = validate(sys);
    CHECK_FALSE(rep.ok());
    CHECK_THROWS_AS(require_valid(sys), SingularSaddlePoint);
}

TEST_CASE("validate flags rank-deficient constraints", "[dae]") {
    Mat M = Mat::Identity(3, 3), A = -Mat::Identity(3, 3);
    Mat G(3, 2);
    G << 1, 1, 1, 1, 0, 0;  // equal columns
    DaeSystem sys = make_system(M, A, G, Mat::Ones(3, 1), Mat::Ones(1, 3));
    ValidationReport rep = validate(sys);
    CHECK_FALSE(rep.ok());
    CHECK_THROWS_AS(require_valid(sys), SingularSaddlePoint);
}

TEST_CASE("compact pencil applies block products", "[dae]") {
    DaeSystem sys = fixture_2x2();
    CompactPencil pen(sys);
    REQUIRE(pen.rows() == 3);

    Vec x(3);
    x << 1.0, 2.0, 3.0;
    Vec ax = pen.apply_A(x);
    // [A G; G^T 0] x with A = -I, G = [1;1]; integer arithmetic, exact
    CHECK(ax(0) == 2.0);
    CHECK(ax(1) == 1.0);
    CHECK(ax(2) == 3.0);

    Vec mx = pen.apply_M(x);
    CHECK(mx(0) == 2.0);
    CHECK(mx(1) == 2.0);
    CHECK(mx(2) == 0.0);

    Vec u(1);
    u << 2.0;
    Vec bu = pen.apply_B(u);
    CHECK(bu(0) == 2.0);
    CHECK(bu(1) == 0.0);
    CHECK(bu(2) == 0.0);

    Vec cx = pen.apply_C(x);
    REQUIRE(cx.size() == 1);
    CHECK(cx(0) == 1.0);

    CHECK_THROWS_AS(pen.apply_A(Vec::Ones(2)), DimensionMismatch);
}
