#include "pucci/matrix_ops.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "pucci/errors.hpp"

using namespace pucci;

namespace {

// Independent oracle: direct minimization of tr(AM) over the extreme points of the
// diffusion class, A = R(theta) diag(a1, a2) R(theta)^T with a_i in {lo, hi}.
// Coarse sweep of 3600 angles, then ternary refinement of the best bracket so the
// continuous minimum is resolved to machine precision.
double pucci_minus_bruteforce_2x2(const SymMatrix& M, const EllipticitySpec& s) {
  auto value = [&](double theta) {
    const double c = std::cos(theta), sn = std::sin(theta);
    const double q1 = M(0, 0) * c * c + 2.0 * M(0, 1) * c * sn + M(1, 1) * sn * sn;
    const double q2 = M(0, 0) * sn * sn - 2.0 * M(0, 1) * c * sn + M(1, 1) * c * c;
    return std::min(s.lambda_low * q1, s.lambda_high * q1) +
           std::min(s.lambda_low * q2, s.lambda_high * q2);
  };
  const int sweep = 3600;
  int best_i = 0;
  double best = value(0.0);
  for (int i = 1; i < sweep; ++i) {
    const double v = value(i * M_PI / sweep);
    if (v < best) {
      best = v;
      best_i = i;
    }
  }
  double lo = (best_i - 1) * M_PI / sweep, hi = (best_i + 1) * M_PI / sweep;
  for (int it = 0; it < 160; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (value(m1) < value(m2))
      hi = m2;
    else
      lo = m1;
  }
  return std::min(best, value(0.5 * (lo + hi)));
}

SymMatrix random_sym(std::mt19937_64& rng, int n, double scale = 2.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  SymMatrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m.set(i, j, dist(rng));
  return m;
}

SymMatrix random_psd(std::mt19937_64& rng, int n, double scale = 1.5) {
  // G^T G is positive semidefinite for any G.
  std::uniform_real_distribution<double> dist(-scale, scale);
  double g[9];
  for (int k = 0; k < n * n; ++k) g[k] = dist(rng);
  SymMatrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += g[k * n + i] * g[k * n + j];
      m.set(i, j, s);
    }
  return m;
}

SymMatrix rotate_2x2(const SymMatrix& M, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  // R^T M R with R = [[c,-s],[s,c]]
  const double a = M(0, 0), b = M(0, 1), d = M(1, 1);
  SymMatrix r(2);
  r.set(0, 0, c * c * a + 2.0 * s * c * b + s * s * d);
  r.set(0, 1, c * c * b + s * c * (d - a) - s * s * b);
  r.set(1, 1, s * s * a - 2.0 * s * c * b + c * c * d);
  return r;
}

SymMatrix rotate_3x3(const SymMatrix& M, double a1, double a2, double a3) {
  // Compose three Givens rotations; conjugate in full arithmetic, keep the upper triangle.
  double r[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  auto mul_givens = [&](int p, int q, double t) {
    const double c = std::cos(t), s = std::sin(t);
    for (int i = 0; i < 3; ++i) {
      const double rp = r[i * 3 + p], rq = r[i * 3 + q];
      r[i * 3 + p] = c * rp + s * rq;
      r[i * 3 + q] = -s * rp + c * rq;
    }
  };
  mul_givens(0, 1, a1);
  mul_givens(0, 2, a2);
  mul_givens(1, 2, a3);
  double mr[9], out[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += M(i, k) * r[k * 3 + j];
      mr[i * 3 + j] = s;
    }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += r[k * 3 + i] * mr[k * 3 + j];
      out[i * 3 + j] = s;
    }
  return SymMatrix::from_rows(3, out);
}

}  // namespace

TEST_CASE("pucci values on diagonal and zero matrices") {
  const EllipticitySpec s{1.0, 2.0};
  CHECK(pucci_plus(SymMatrix::diag({1.0, -1.0}), s) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(pucci_minus(SymMatrix::diag({1.0, -1.0}), s) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(pucci_minus(SymMatrix::identity(2), s) == doctest::Approx(2.0).epsilon(1e-14));
  for (int n = 1; n <= 3; ++n) {
    CHECK(pucci_plus(SymMatrix::zero(n), s) == 0.0);
    CHECK(pucci_minus(SymMatrix::zero(n), s) == 0.0);
  }
}

TEST_CASE("pucci value of an off-diagonal matrix via its eigenvalues") {
  // [[0,1],[1,0]] has eigenvalues +-1, the same split as diag(1,-1).
  const EllipticitySpec s{1.0, 2.0};
  SymMatrix m(2);
  m.set(0, 1, 1.0);
  CHECK(pucci_plus(m, s) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(pucci_minus(m, s) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("closed-form eigenvalues agree with characteristic polynomial") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    for (int n = 2; n <= 3; ++n) {
      const SymMatrix m = random_sym(rng, n);
      const auto ev = m.eigenvalues();
      double trace_sum = 0.0;
      for (int i = 0; i < n; ++i) trace_sum += ev[static_cast<size_t>(i)];
      CHECK(trace_sum == doctest::Approx(m.trace()).epsilon(1e-12));
      for (int i = 0; i + 1 < n; ++i) CHECK(ev[i] <= ev[i + 1]);
      // det(M - e I) must vanish for each eigenvalue.
      for (int i = 0; i < n; ++i) {
        const double e = ev[static_cast<size_t>(i)];
        double det;
        if (n == 2) {
          det = (m(0, 0) - e) * (m(1, 1) - e) - m(0, 1) * m(0, 1);
        } else {
          const double a = m(0, 0) - e, b = m(1, 1) - e, c = m(2, 2) - e;
          det = a * (b * c - m(1, 2) * m(1, 2)) - m(0, 1) * (m(0, 1) * c - m(1, 2) * m(0, 2)) +
                m(0, 2) * (m(0, 1) * m(1, 2) - b * m(0, 2));
        }
        CHECK(std::abs(det) <= 1e-9 * (1.0 + std::abs(e) * std::abs(e) * std::abs(e)));
      }
    }
  }
  const SymMatrix t3 = SymMatrix::from_rows(3, (const double[]){2, 1, 0, 1, 2, 1, 0, 1, 2});
  const auto ev = t3.eigenvalues();
  CHECK(ev[0] == doctest::Approx(2.0 - std::sqrt(2.0)).epsilon(1e-13));
  CHECK(ev[1] == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(ev[2] == doctest::Approx(2.0 + std::sqrt(2.0)).epsilon(1e-13));
}

TEST_CASE("pucci_minus matches brute-force minimization over the diffusion class") {
  std::mt19937_64 rng(777);
  const EllipticitySpec s{1.0, 2.0};
  const EllipticitySpec s2{0.3, 5.0};
  for (int trial = 0; trial < 200; ++trial) {
    const SymMatrix m = random_sym(rng, 2);
    for (const auto& spec : {s, s2}) {
      const double oracle = pucci_minus_bruteforce_2x2(m, spec);
      const double got = pucci_minus(m, spec);
      CHECK(std::abs(got - oracle) <= 1e-12 * (1.0 + std::abs(oracle)));
    }
  }
}

TEST_CASE("duality: pucci_plus(M) == -pucci_minus(-M) exactly") {
  std::mt19937_64 rng(31);
  const EllipticitySpec s{0.5, 3.0};
  for (int trial = 0; trial < 100; ++trial) {
    for (int n = 1; n <= 3; ++n) {
      const SymMatrix m = random_sym(rng, n);
      CHECK(pucci_plus(m, s) == -pucci_minus(-m, s));
    }
  }
  // For n = 2 the closed form is odd in the entries, so the eigenvalue list of -M
  // is the bitwise negation of the list of M.
  for (int trial = 0; trial < 100; ++trial) {
    const SymMatrix m = random_sym(rng, 2);
    const auto ev = m.eigenvalues();
    const auto nev = (-m).eigenvalues();
    CHECK(nev[0] == -ev[1]);
    CHECK(nev[1] == -ev[0]);
  }
}

TEST_CASE("operator_eval dispatch") {
  CHECK(operator_eval(OperatorKind::make_laplacian(), SymMatrix::diag({2.0, 3.0})) == 5.0);

  // lambda == Lambda collapses both Pucci operators onto the Laplacian.
  const auto unit_minus = OperatorKind::make_pucci_minus({1.0, 1.0});
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const SymMatrix m = random_sym(rng, 2);
    CHECK(operator_eval(unit_minus, m) == doctest::Approx(m.trace()).epsilon(1e-13));
  }

  const auto bell = OperatorKind::make_bellman_inf(
      {SymMatrix::identity(2), SymMatrix::diag({1.0, 2.0})}, {1.0, 2.0});
  CHECK(operator_eval(bell, SymMatrix::diag({-1.0, 1.0})) == 0.0);
}

TEST_CASE("positive homogeneity F(tM) = t F(M)") {
  std::mt19937_64 rng(5150);
  const auto kinds = {OperatorKind::make_pucci_minus({1.0, 2.0}),
                      OperatorKind::make_pucci_plus({1.0, 2.0}), OperatorKind::make_laplacian(),
                      OperatorKind::make_bellman_inf(
                          {SymMatrix::identity(2), SymMatrix::diag({1.0, 2.0}),
                           SymMatrix::from_rows(2, (const double[]){1.5, 0.4, 0.4, 1.5})},
                          {1.0, 2.0})};
  for (const auto& kind : kinds) {
    for (int trial = 0; trial < 50; ++trial) {
      const SymMatrix m = random_sym(rng, 2);
      const double f = operator_eval(kind, m);
      for (const double t : {0.0, 0.5, 1.0, 2.0, 10.0}) {
        CHECK(std::abs(operator_eval(kind, m * t) - t * f) <= 1e-12 * (1.0 + std::abs(f)));
      }
    }
  }
}

TEST_CASE("concavity of PucciMinus, Laplacian and BellmanInf") {
  std::mt19937_64 rng(4242);
  const auto kinds = {OperatorKind::make_pucci_minus({1.0, 2.0}), OperatorKind::make_laplacian(),
                      OperatorKind::make_bellman_inf(
                          {SymMatrix::identity(2), SymMatrix::diag({2.0, 1.0})}, {1.0, 2.0})};
  for (const auto& kind : kinds) {
    CHECK(kind.concave());
    for (int trial = 0; trial < 200; ++trial) {
      const SymMatrix m = random_sym(rng, 2);
      const SymMatrix n = random_sym(rng, 2);
      const double gap = operator_eval(kind, m) + operator_eval(kind, n) -
                         2.0 * operator_eval(kind, (m + n) * 0.5);
      CHECK(gap <= 1e-12);
    }
  }
  CHECK_FALSE(OperatorKind::make_pucci_plus({1.0, 2.0}).concave());
}

TEST_CASE("degenerate-ellipticity monotonicity: psd increments never decrease F") {
  std::mt19937_64 rng(808);
  const auto kinds = {OperatorKind::make_pucci_minus({1.0, 2.0}),
                      OperatorKind::make_pucci_plus({1.0, 2.0}), OperatorKind::make_laplacian()};
  for (const auto& kind : kinds) {
    for (int trial = 0; trial < 200; ++trial) {
      const SymMatrix m = random_sym(rng, 2);
      const SymMatrix n = random_psd(rng, 2);
      CHECK(operator_eval(kind, m + n) >=
            operator_eval(kind, m) - 1e-10 * (1.0 + std::abs(operator_eval(kind, m))));
    }
  }
}

TEST_CASE("rotation invariance of Pucci values") {
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  const EllipticitySpec s{1.0, 2.0};
  for (int trial = 0; trial < 100; ++trial) {
    const SymMatrix m2 = random_sym(rng, 2);
    const SymMatrix r2 = rotate_2x2(m2, ang(rng));
    CHECK(std::abs(pucci_minus(r2, s) - pucci_minus(m2, s)) <= 1e-10);
    const SymMatrix m3 = random_sym(rng, 3);
    const SymMatrix r3 = rotate_3x3(m3, ang(rng), ang(rng), ang(rng));
    CHECK(std::abs(pucci_minus(r3, s) - pucci_minus(m3, s)) <= 1e-10);
  }
}

TEST_CASE("ellipticity sandwich holds for every variant") {
  std::mt19937_64 rng(1234);
  const auto kinds = {OperatorKind::make_pucci_minus({1.0, 2.0}),
                      OperatorKind::make_pucci_plus({1.0, 2.0}),
                      OperatorKind::make_laplacian({0.5, 2.0}),
                      OperatorKind::make_bellman_inf(
                          {SymMatrix::identity(2), SymMatrix::diag({1.0, 2.0}),
                           SymMatrix::from_rows(2, (const double[]){1.2, 0.3, 0.3, 1.8})},
                          {1.0, 2.0})};
  for (const auto& kind : kinds) {
    for (int trial = 0; trial < 1000; ++trial) {
      const SymMatrix m = random_sym(rng, 2);
      const SymMatrix n = random_sym(rng, 2);
      CHECK(ellipticity_sandwich_check(kind, m, n));
    }
  }
  CHECK(ellipticity_sandwich_check(OperatorKind::make_laplacian({0.5, 2.0}),
                                   SymMatrix::diag({1.0, 0.0}), SymMatrix::zero(2)));
}

TEST_CASE("input validation") {
  SymMatrix bad(2);
  bad.set(0, 1, std::nan(""));
  CHECK_THROWS_AS(pucci_minus(bad, EllipticitySpec{1.0, 2.0}), input_error);
  CHECK_THROWS_AS(pucci_minus(SymMatrix::identity(2), EllipticitySpec{2.0, 1.0}), input_error);
  CHECK_THROWS_AS(pucci_minus(SymMatrix::identity(2), EllipticitySpec{0.0, 1.0}), input_error);
  CHECK_THROWS_AS(OperatorKind::make_bellman_inf({}, {1.0, 2.0}), config_error);
  // spectrum outside [lo, hi] is rejected at construction
  CHECK_THROWS_AS(OperatorKind::make_bellman_inf({SymMatrix::diag({0.5, 1.0})}, {1.0, 2.0}),
                  config_error);
  CHECK_THROWS_AS(SymMatrix(4), input_error);
}
