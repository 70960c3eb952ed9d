#include "doctest.h"
#include "strand/algebra.hpp"

#include <cstring>

using namespace strand;

TEST_CASE("shipped algebras satisfy Jacobi and ad-invariance to 1e-13") {
  for (auto& alg : {make_u1({-1.0}), make_u1({-1.0, 1.0}), make_u1({-1.0, -2.0, 0.5, 3.0}), make_su2(),
                    make_su2(2.5)}) {
    CHECK(alg.jacobi_residual() <= 1e-13);
    CHECK(alg.ad_invariance_residual() <= 1e-13);
  }
}

TEST_CASE("bracket of abelian algebra vanishes") {
  auto alg = make_u1({-1.0, 1.0});
  auto z = alg.bracket({0.3, -0.7}, {1.2, 0.4});
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);
}

TEST_CASE("su(2) structure constants read off the bracket") {
  auto alg = make_su2();
  auto z = alg.bracket({1, 0, 0}, {0, 1, 0});
  CHECK(z[0] == doctest::Approx(0.0));
  CHECK(z[1] == doctest::Approx(0.0));
  CHECK(z[2] == doctest::Approx(1.0));
  auto w = alg.bracket({1, 1, 0}, {1, 1, 0});
  CHECK(w[0] == 0.0);
  CHECK(w[1] == 0.0);
  CHECK(w[2] == 0.0);
}

TEST_CASE("bracket is bit-identical under swap with negation") {
  auto alg = make_su2(1.7);
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(3), y(3);
    for (int i = 0; i < 3; ++i) {
      x[i] = rng.sym();
      y[i] = rng.sym();
    }
    auto a = alg.bracket(x, y);
    auto b = alg.bracket(y, x);
    for (int i = 0; i < 3; ++i) {
      double na = a[i], nb = -b[i];
      CHECK(std::memcmp(&na, &nb, sizeof(double)) == 0);
    }
  }
}

TEST_CASE("pairing values and exact symmetry") {
  auto neg = make_u1({-1.0});
  CHECK(neg.pair({1}, {1}) == -1.0);

  auto mixed = make_u1({-1.0, 1.0});
  CHECK(mixed.pair({1, 1}, {1, 1}) == 0.0);  // null vector
  CHECK(mixed.pair({1, 0}, {1, 0}) == -1.0);
  CHECK(mixed.pair({0, 1}, {0, 1}) == 1.0);
  CHECK(mixed.signature == std::pair<int, int>{1, 1});

  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(2), y(2);
    for (int i = 0; i < 2; ++i) {
      x[i] = rng.sym();
      y[i] = rng.sym();
    }
    double a = mixed.pair(x, y), b = mixed.pair(y, x);
    CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);
  }
}

// Trace-pairing oracle: kappa = -tr on the defining representation of su(2)
// with the orthonormalized basis s_j = -(i/2) sigma_j gives -tr(s_j s_k) = delta/2,
// so the cyclic basis with kappa = -(1/2-normalized) pairing must be diagonal.
TEST_CASE("su(2) trace-form oracle: basis is kappa-orthogonal") {
  // explicit 2x2 matrices s_j = -(i/2) sigma_j
  const cplx I(0, 1);
  MatC s1(2), s2(2), s3(2);
  s1(0, 1) = -0.5 * I;
  s1(1, 0) = -0.5 * I;
  s2(0, 1) = -0.5;
  s2(1, 0) = 0.5;
  s3(0, 0) = -0.5 * I;
  s3(1, 1) = 0.5 * I;
  // bracket matches the cyclic structure constants
  MatC c12 = s1 * s2 - s2 * s1;
  CHECK((c12 - s3).a[0] == cplx(0));
  // off-diagonal trace pairing vanishes: pair(e1, e2) = 0
  MatC p12 = s1 * s2;
  CHECK(std::abs(p12.trace()) == doctest::Approx(0.0));
  auto alg = make_su2();
  CHECK(alg.pair({1, 0, 0}, {0, 1, 0}) == 0.0);
  // and -2 tr(s_j s_j) = 1/2 * 2 = matches kappa scale -1 after Killing normalization
  CHECK((-2.0 * p12.trace()).real() == doctest::Approx(0.0));
}

TEST_CASE("cartan_norm_sq") {
  auto ab = make_u1({-1.0, -1.0});
  CHECK(ab.cartan_norm_sq({1.0, 1.0}) == 0.0);

  auto su2 = make_su2();
  CHECK(su2.cartan_norm_sq({1.0, 1.0, 1.0}) == doctest::Approx(6.0).epsilon(1e-14));
  double s = 1.8;
  CHECK(su2.cartan_norm_sq({s, s, s}) == doctest::Approx(6.0 / (s * s * s)).epsilon(1e-13));

  CHECK_THROWS_AS(su2.cartan_norm_sq({1.0, -1.0, 1.0}), positivity_error);
  CHECK_THROWS_AS(su2.cartan_norm_sq({1.0, 1.0}), dimension_error);
}

TEST_CASE("dimension mismatches are argument errors") {
  auto alg = make_u1({-1.0, 1.0});
  CHECK_THROWS_AS(alg.bracket({1.0}, {0.0, 1.0}), dimension_error);
  CHECK_THROWS_AS(alg.pair({1.0}, {0.0, 1.0}), dimension_error);
}
