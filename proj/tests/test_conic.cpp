#include <doctest.h>

#include <Eigen/Dense>
#include <sstream>

#include "cobras/conic.hpp"
#include "cobras/rng.hpp"

using namespace cobras;
using conic::Complex;

namespace {

Eigen::MatrixXcd random_hermitian(int n, StableRng& rng) {
  Eigen::MatrixXcd A(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) A(i, j) = Complex(rng.normal(), rng.normal());
  }
  return 0.5 * (A + A.adjoint()).eval();
}

}  // namespace

TEST_CASE("hermitian embedding") {
  SUBCASE("identity maps to identity") {
    const Eigen::MatrixXd E = conic::embed_hermitian(Eigen::MatrixXcd::Identity(2, 2));
    CHECK((E - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("pauli-like matrix has doubled +-1 spectrum") {
    Eigen::MatrixXcd X(2, 2);
    X << Complex(0, 0), Complex(0, 1), Complex(0, -1), Complex(0, 0);
    const Eigen::MatrixXd E = conic::embed_hermitian(X);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(E, Eigen::EigenvaluesOnly);
    Eigen::VectorXd expected(4);
    expected << -1, -1, 1, 1;
    CHECK((eig.eigenvalues() - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("embedding spectrum equals doubled complex spectrum") {
    StableRng rng(11);
    const Eigen::MatrixXcd X = random_hermitian(3, rng);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ex(X, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ee(conic::embed_hermitian(X),
                                                      Eigen::EigenvaluesOnly);
    for (int i = 0; i < 3; ++i) {
      CHECK(ee.eigenvalues()(2 * i) == doctest::Approx(ex.eigenvalues()(i)).epsilon(1e-10));
      CHECK(ee.eigenvalues()(2 * i + 1) == doctest::Approx(ex.eigenvalues()(i)).epsilon(1e-10));
    }
  }
  SUBCASE("non-hermitian input is rejected") {
    Eigen::MatrixXcd X(2, 2);
    X << 1.0, 2.0, 3.0, 4.0;
    CHECK_THROWS_AS(conic::embed_hermitian(X), std::invalid_argument);
  }
  SUBCASE("round trip through the embedding") {
    StableRng rng(12);
    const Eigen::MatrixXcd X = random_hermitian(4, rng);
    const Eigen::MatrixXcd back = conic::hermitian_from_embedding(conic::embed_hermitian(X));
    CHECK((back - X).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("psd square root") {
  SUBCASE("identity") {
    const Eigen::MatrixXcd S = conic::psd_sqrt(Eigen::MatrixXcd::Identity(3, 3));
    CHECK((S - Eigen::MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("diagonal") {
    Eigen::MatrixXcd X = Eigen::MatrixXcd::Zero(2, 2);
    X(0, 0) = 4.0;
    X(1, 1) = 9.0;
    const Eigen::MatrixXcd S = conic::psd_sqrt(X);
    CHECK(S(0, 0).real() == doctest::Approx(2.0));
    CHECK(S(1, 1).real() == doctest::Approx(3.0));
    CHECK(std::abs(S(0, 1)) < 1e-14);
  }
  SUBCASE("squaring a random PSD root recovers the matrix") {
    StableRng rng(21);
    Eigen::MatrixXcd G(3, 5);
    for (int i = 0; i < G.rows(); ++i) {
      for (int j = 0; j < G.cols(); ++j) G(i, j) = rng.complex_normal();
    }
    const Eigen::MatrixXcd B = G * G.adjoint();
    const Eigen::MatrixXcd S = conic::psd_sqrt(B);
    CHECK((S * S - B).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("indefinite input is rejected") {
    Eigen::MatrixXcd X = Eigen::MatrixXcd::Identity(2, 2);
    X(1, 1) = -1.0;
    CHECK_THROWS_AS(conic::psd_sqrt(X), std::invalid_argument);
  }
}

TEST_CASE("solver: trace minimization with a pinned entry") {
  // min tr(X) s.t. X11 = 1, X >= 0  ->  X = e1 e1^T
  conic::ProblemBuilder builder;
  const int x = builder.add_psd_block("X", 3);
  builder.add_objective_term(x, Eigen::MatrixXcd::Identity(3, 3));
  Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(3, 3);
  C(0, 0) = 1.0;
  builder.add_equality({{x, C}}, Complex(1.0, 0.0));
  const conic::ConicProblem problem = builder.build();
  const conic::ConicSolution sol = conic::solve(problem);

  REQUIRE(sol.status == conic::SolveStatus::optimal);
  CHECK(sol.primal_objective == doctest::Approx(1.0).epsilon(1e-5));
  const Eigen::MatrixXcd X = conic::extract_block(problem, sol.x, "X");
  Eigen::MatrixXcd expected = Eigen::MatrixXcd::Zero(3, 3);
  expected(0, 0) = 1.0;
  CHECK((X - expected).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("solver: objective over the spectrahedron finds the minimum eigenvalue") {
  StableRng rng(33);
  for (int instance = 0; instance < 3; ++instance) {
    const Eigen::MatrixXcd C = random_hermitian(4, rng);
    conic::ProblemBuilder builder;
    const int x = builder.add_psd_block("X", 4);
    builder.add_objective_term(x, C);
    builder.add_equality({{x, Eigen::MatrixXcd::Identity(4, 4)}}, Complex(1.0, 0.0));
    const conic::ConicSolution sol = conic::solve(builder.build());
    REQUIRE(sol.status == conic::SolveStatus::optimal);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(C, Eigen::EigenvaluesOnly);
    CHECK(sol.primal_objective ==
          doctest::Approx(eig.eigenvalues().minCoeff()).epsilon(1e-5));
  }
}

TEST_CASE("solver: decoupled blocks match independent solves") {
  StableRng rng(44);
  const Eigen::MatrixXcd C1 = random_hermitian(3, rng);
  const Eigen::MatrixXcd C2 = random_hermitian(2, rng);

  auto single = [](const Eigen::MatrixXcd& C) {
    conic::ProblemBuilder builder;
    const int x = builder.add_psd_block("X", static_cast<int>(C.rows()));
    builder.add_objective_term(x, C);
    builder.add_equality({{x, Eigen::MatrixXcd::Identity(C.rows(), C.cols())}}, Complex(1.0, 0.0));
    return conic::solve(builder.build());
  };
  const conic::ConicSolution s1 = single(C1);
  const conic::ConicSolution s2 = single(C2);

  conic::ProblemBuilder builder;
  const int x1 = builder.add_psd_block("X1", 3);
  const int x2 = builder.add_psd_block("X2", 2);
  builder.add_objective_term(x1, C1);
  builder.add_objective_term(x2, C2);
  builder.add_equality({{x1, Eigen::MatrixXcd::Identity(3, 3)}}, Complex(1.0, 0.0));
  builder.add_equality({{x2, Eigen::MatrixXcd::Identity(2, 2)}}, Complex(1.0, 0.0));
  const conic::ConicProblem problem = builder.build();
  const conic::ConicSolution joint = conic::solve(problem);

  REQUIRE(joint.status == conic::SolveStatus::optimal);
  CHECK(joint.primal_objective ==
        doctest::Approx(s1.primal_objective + s2.primal_objective).epsilon(1e-5));
  const Eigen::MatrixXcd X1 = conic::extract_block(problem, joint.x, "X1");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> e1(C1, Eigen::EigenvaluesOnly);
  CHECK((C1 * X1).trace().real() == doctest::Approx(e1.eigenvalues().minCoeff()).epsilon(1e-4));
}

TEST_CASE("solver invariants on random instances") {
  StableRng rng(55);
  for (int instance = 0; instance < 4; ++instance) {
    const int n = 3 + static_cast<int>(rng.uniform_index(3));
    const Eigen::MatrixXcd C = random_hermitian(n, rng);
    conic::ProblemBuilder builder;
    const int x = builder.add_psd_block("X", n);
    builder.add_objective_term(x, C);
    builder.add_equality({{x, Eigen::MatrixXcd::Identity(n, n)}}, Complex(1.0, 0.0));
    // pin one off-diagonal entry as well
    Eigen::MatrixXcd P = Eigen::MatrixXcd::Zero(n, n);
    P(1, 0) = 1.0;
    builder.add_equality({{x, P}}, Complex(0.1, 0.05));
    const conic::ConicProblem problem = builder.build();
    const conic::ConicSolution sol = conic::solve(problem);
    REQUIRE(sol.status == conic::SolveStatus::optimal);

    // duality gap bound
    CHECK(std::abs(sol.primal_objective - sol.dual_objective) /
              (1.0 + std::abs(sol.primal_objective)) <=
          10 * 1e-7);
    // cone feasibility of the returned primal
    const Eigen::MatrixXcd X = conic::extract_block(problem, sol.x, "X");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(X, Eigen::EigenvaluesOnly);
    CHECK(eig.eigenvalues().minCoeff() >= -10 * 1e-7 * (1.0 + X.cwiseAbs().maxCoeff()));

    // scaling the objective scales the value and keeps the argmin
    conic::ProblemBuilder scaled;
    const int xs = scaled.add_psd_block("X", n);
    scaled.add_objective_term(xs, 5.0 * C);
    scaled.add_equality({{xs, Eigen::MatrixXcd::Identity(n, n)}}, Complex(1.0, 0.0));
    scaled.add_equality({{xs, P}}, Complex(0.1, 0.05));
    const conic::ConicProblem sproblem = scaled.build();
    const conic::ConicSolution ssol = conic::solve(sproblem);
    REQUIRE(ssol.status == conic::SolveStatus::optimal);
    CHECK(ssol.primal_objective == doctest::Approx(5.0 * sol.primal_objective).epsilon(1e-4));
    const Eigen::MatrixXcd Xs = conic::extract_block(sproblem, ssol.x, "X");
    CHECK((Xs - X).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("solver determinism") {
  StableRng rng(66);
  const Eigen::MatrixXcd C = random_hermitian(4, rng);
  conic::ProblemBuilder builder;
  const int x = builder.add_psd_block("X", 4);
  builder.add_objective_term(x, C);
  builder.add_equality({{x, Eigen::MatrixXcd::Identity(4, 4)}}, Complex(1.0, 0.0));
  const conic::ConicProblem problem = builder.build();
  const conic::ConicSolution a = conic::solve(problem);
  const conic::ConicSolution b = conic::solve(problem);
  CHECK(a.iterations == b.iterations);
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("problem dump lists cones, objective and equalities") {
  conic::ProblemBuilder builder;
  const int x = builder.add_psd_block("X", 2);
  builder.add_objective_term(x, Eigen::MatrixXcd::Identity(2, 2));
  builder.add_equality({{x, Eigen::MatrixXcd::Identity(2, 2)}}, Complex(1.0, 0.0));
  std::ostringstream os;
  conic::dump_problem(builder.build(), os);
  const std::string text = os.str();
  CHECK(text.find("X:psd:2") != std::string::npos);
  CHECK(text.find("objective") != std::string::npos);
  CHECK(text.find("eq 0") != std::string::npos);
}
