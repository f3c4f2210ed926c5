#include <catch2/catch.hpp>

#include "dobc/matrix_kernels.hpp"
#include "support.hpp"

using namespace dobc;
namespace dt = dobc::testing;

TEST_CASE("range basis of identity and a single column") {
  Matrix q = orthonormal_range_basis(Matrix::Identity(3, 3));
  REQUIRE(q.cols() == 3);
  CHECK((q.transpose() * q - Matrix::Identity(3, 3)).norm() < 1e-12);

  Matrix m(2, 1);
  m << 1, 1;
  Matrix q1 = orthonormal_range_basis(m);
  REQUIRE(q1.cols() == 1);
  CHECK(std::abs(std::abs(q1(0, 0)) - std::sqrt(0.5)) < 1e-12);
  CHECK(std::abs(q1(0, 0) - q1(1, 0)) < 1e-12);
}

TEST_CASE("range basis of a rank-2 product reproduces the matrix") {
  dt::Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    Matrix m = dt::gaussian(rng, 5, 2) * dt::gaussian(rng, 2, 3);
    Matrix q = orthonormal_range_basis(m);
    REQUIRE(q.cols() == 2);
    CHECK((m - q * q.transpose() * m).norm() < 1e-8);
  }
}

TEST_CASE("annihilator examples") {
  Matrix m(2, 1);
  m << 1, 0;
  Matrix xi = annihilator(m);
  REQUIRE(xi.rows() == 1);
  CHECK(std::abs(xi(0, 0)) < 1e-12);
  CHECK(std::abs(std::abs(xi(0, 1)) - 1.0) < 1e-12);

  CHECK(annihilator(Matrix::Identity(2, 2)).rows() == 0);
  CHECK(annihilator(Matrix(3, 0)).isApprox(Matrix::Identity(3, 3)));

  dt::Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    Matrix r = dt::gaussian(rng, 4, 2);
    Matrix a = annihilator(r);
    REQUIRE(a.rows() == 2);
    REQUIRE(a.cols() == 4);
    CHECK((a * r).norm() < 1e-10);
    CHECK((a * a.transpose() - Matrix::Identity(2, 2)).norm() < 1e-10);
  }
}

TEST_CASE("null space and pseudo inverse agree with their definitions") {
  dt::Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    Matrix m = dt::gaussian(rng, 3, 2) * dt::gaussian(rng, 2, 5);
    Matrix ns = null_space(m);
    CHECK(ns.cols() == 3);
    CHECK((m * ns).norm() < 1e-9);
    Matrix pi = pseudo_inverse(m);
    CHECK((m * pi * m - m).norm() < 1e-9);
    CHECK((pi * m * pi - pi).norm() < 1e-9);
  }
}

TEST_CASE("rank factorization") {
  dt::Rng rng(4);
  Matrix m = dt::gaussian(rng, 4, 2) * dt::gaussian(rng, 2, 3);
  RankFactorization f = rank_factorization(m);
  REQUIRE(f.rank == 2);
  Matrix d = f.phi * m * f.psi;
  Matrix expected = Matrix::Zero(4, 3);
  expected.topLeftCorner(2, 2).setIdentity();
  CHECK((d - expected).norm() < 1e-9);
}

TEST_CASE("gram schmidt rowspace") {
  Matrix m(1, 3);
  m << 2, 0, 0;
  RowspaceBasis b = gram_schmidt_rowspace(m);
  CHECK(b.t_tilde.rows() == 1);
  CHECK(std::abs(b.t_tilde(0, 0) - 0.5) < 1e-12);
  CHECK((b.t - Eigen::Vector3d(1, 0, 0)).norm() < 1e-12);

  RowspaceBasis id = gram_schmidt_rowspace(Matrix::Identity(2, 2));
  CHECK(id.t_tilde.isApprox(Matrix::Identity(2, 2)));
  CHECK(id.t.isApprox(Matrix::Identity(2, 2)));

  Matrix m2(2, 3);
  m2 << 1, 1, 0, 0, 1, 0;
  RowspaceBasis b2 = gram_schmidt_rowspace(m2);
  CHECK((b2.t_tilde * m2 - b2.t.transpose()).norm() < 1e-10);
  CHECK((b2.t.transpose() * b2.t - Matrix::Identity(2, 2)).norm() < 1e-10);

  Matrix deficient(2, 3);
  deficient << 1, 0, 0, 2, 0, 0;
  CHECK_THROWS_AS(gram_schmidt_rowspace(deficient), RankDeficient);
}

TEST_CASE("spectrum real parts") {
  Matrix d = Eigen::Vector2d(-1, -2).asDiagonal();
  CHECK(spectrum_real_parts(d) == std::vector<double>{-1, -2});

  Matrix rot(2, 2);
  rot << 0, 1, -1, 0;
  for (double r : spectrum_real_parts(rot)) CHECK(std::abs(r) < 1e-12);

  // (s+1)(s+2)(s+3) = s^3 + 6 s^2 + 11 s + 6
  Matrix comp(3, 3);
  comp << 0, 1, 0, 0, 0, 1, -6, -11, -6;
  auto re = spectrum_real_parts(comp);
  REQUIRE(re.size() == 3);
  CHECK(std::abs(re[0] + 1) < 1e-8);
  CHECK(std::abs(re[1] + 2) < 1e-8);
  CHECK(std::abs(re[2] + 3) < 1e-8);
}

TEST_CASE("spans_equal examples") {
  Matrix e1 = Matrix::Zero(2, 1), e2 = Matrix::Zero(2, 1);
  e1(0, 0) = 1;
  e2(1, 0) = 1;
  CHECK(spans_equal(e1, 2 * e1));
  CHECK_FALSE(spans_equal(e1, e2));
  Matrix a(2, 2), b(2, 2);
  a << 1, 0, 0, 1;
  b << 1, 1, 1, -1;
  CHECK(spans_equal(a, b));
  CHECK(subspace_angle(e1, e2) == Approx(M_PI / 2));
}

TEST_CASE("spans_equal is an equivalence on random subspaces") {
  dt::Rng rng(5);
  for (int k = 0; k < 50; ++k) {
    Matrix a = dt::gaussian(rng, 6, 3);
    Matrix g = dt::gaussian(rng, 3, 3);  // invertible with probability one
    Matrix b = a * g;
    Matrix c = b * dt::gaussian(rng, 3, 3);
    CHECK(spans_equal(a, a));
    CHECK(spans_equal(a, b) == spans_equal(b, a));
    CHECK(spans_equal(a, b));
    CHECK(spans_equal(b, c));
    CHECK(spans_equal(a, c));
    CHECK(subspace_angle(a, c) < 1e-8);
    CHECK_FALSE(spans_equal(a, dt::gaussian(rng, 6, 3)));
  }
}

TEST_CASE("scalar observer Riccati equation") {
  Matrix a = Matrix::Zero(1, 1), c = Matrix::Ones(1, 1), q = Matrix::Ones(1, 1);
  Matrix x = solve_care(a, c, q, 0.2, CareForm::Observer);
  CHECK(x(0, 0) == Approx(0.2 + std::sqrt(1.04)).epsilon(1e-12));
  CHECK(x(0, 0) == Approx(1.21980).margin(1e-5));
}

TEST_CASE("Riccati with zero forcing returns zero") {
  Matrix x = solve_care(-Matrix::Identity(2, 2), Matrix::Zero(2, 1), Matrix::Zero(2, 2));
  CHECK(x.norm() < 1e-12);
}

TEST_CASE("Riccati residual and closed loop on random stabilizable pairs") {
  dt::Rng rng(6);
  for (int k = 0; k < 30; ++k) {
    const int n = dt::uniform_int(rng, 2, 6);
    Matrix a = dt::gaussian(rng, n, n), b = dt::gaussian(rng, n, 2);
    Matrix id = Matrix::Identity(n, n);
    Matrix x = solve_care(a, b, id, 0.2);
    Matrix as = a + 0.2 * id;
    CHECK((as.transpose() * x + x * as - x * b * b.transpose() * x + id).norm() < 1e-8);
    CHECK(spectral_abscissa(as - b * b.transpose() * x) < 0);
    CHECK((x - x.transpose()).norm() < 1e-12);
  }
}

TEST_CASE("Riccati rejects unstabilizable pairs") {
  Matrix a = Matrix::Identity(2, 2);
  Matrix b(2, 1);
  b << 1, 0;
  CHECK_THROWS_AS(solve_care(a, b, Matrix::Identity(2, 2)), NotStabilizable);
}

TEST_CASE("Lyapunov examples") {
  Matrix p = solve_lyapunov(-Matrix::Identity(2, 2), 2 * Matrix::Identity(2, 2));
  CHECK((p - Matrix::Identity(2, 2)).norm() < 1e-12);

  Matrix f(2, 2);
  f << 0, 1, -1, -1;
  Matrix p2 = solve_lyapunov(f, Matrix::Identity(2, 2));
  CHECK((f.transpose() * p2 + p2 * f + Matrix::Identity(2, 2)).norm() < 1e-9);
  CHECK((p2 - p2.transpose()).norm() < 1e-12);

  CHECK_THROWS_AS(solve_lyapunov(Matrix::Identity(2, 2), Matrix::Identity(2, 2)), UnstableMatrix);
}

TEST_CASE("stacking checks dimensions") {
  CHECK(hstack({Matrix::Ones(2, 1), Matrix::Zero(2, 2)}, 2).cols() == 3);
  CHECK(vstack({Matrix::Ones(1, 2), Matrix::Zero(2, 2)}, 2).rows() == 3);
  CHECK_THROWS_AS(hstack({Matrix::Ones(2, 1), Matrix::Zero(3, 1)}, 2), DimensionMismatch);
}
