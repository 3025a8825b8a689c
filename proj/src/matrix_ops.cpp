#include "pucci/matrix_ops.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "pucci/errors.hpp"

namespace pucci {

namespace {

void require_valid(const EllipticitySpec& spec) {
  if (!spec.valid()) {
    throw input_error("ellipticity bounds must satisfy 0 < lambda_low <= lambda_high (got " +
                      std::to_string(spec.lambda_low) + ", " + std::to_string(spec.lambda_high) +
                      ")");
  }
}

void require_finite(const SymMatrix& M, const char* who) {
  if (!M.finite()) throw input_error(std::string(who) + ": matrix has non-finite entries");
}

// tr(A * M) for symmetric A, M: diagonal products once, off-diagonal products twice.
double sym_dot(const SymMatrix& A, const SymMatrix& M) {
  const int n = A.dim();
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    s += A(i, i) * M(i, i);
    for (int j = i + 1; j < n; ++j) s += 2.0 * A(i, j) * M(i, j);
  }
  return s;
}

}  // namespace

SymMatrix::SymMatrix(int n) : n_(n), e_{} {
  if (n < 1 || n > 3) throw input_error("SymMatrix dimension must be 1, 2 or 3");
}

int SymMatrix::tri_index(int i, int j) const {
  if (i > j) std::swap(i, j);
  if (i < 0 || j >= n_) throw input_error("SymMatrix index out of range");
  // upper triangle, row by row: (0,0),(0,1),...,(0,n-1),(1,1),...
  return i * n_ - i * (i - 1) / 2 + (j - i);
}

SymMatrix SymMatrix::identity(int n) {
  SymMatrix m(n);
  for (int i = 0; i < n; ++i) m.set(i, i, 1.0);
  return m;
}

SymMatrix SymMatrix::diag(std::vector<double> d) {
  SymMatrix m(static_cast<int>(d.size()));
  for (int i = 0; i < m.n_; ++i) m.set(i, i, d[static_cast<size_t>(i)]);
  return m;
}

SymMatrix SymMatrix::from_rows(int n, const double* rows) {
  SymMatrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m.set(i, j, rows[i * n + j]);
  return m;
}

double SymMatrix::trace() const {
  double t = 0.0;
  for (int i = 0; i < n_; ++i) t += (*this)(i, i);
  return t;
}

bool SymMatrix::finite() const {
  const int count = n_ * (n_ + 1) / 2;
  for (int k = 0; k < count; ++k)
    if (!std::isfinite(e_[static_cast<size_t>(k)])) return false;
  return true;
}

SymMatrix SymMatrix::operator+(const SymMatrix& o) const {
  if (n_ != o.n_) throw input_error("SymMatrix dimension mismatch");
  SymMatrix r(n_);
  for (size_t k = 0; k < e_.size(); ++k) r.e_[k] = e_[k] + o.e_[k];
  return r;
}

SymMatrix SymMatrix::operator-(const SymMatrix& o) const {
  if (n_ != o.n_) throw input_error("SymMatrix dimension mismatch");
  SymMatrix r(n_);
  for (size_t k = 0; k < e_.size(); ++k) r.e_[k] = e_[k] - o.e_[k];
  return r;
}

SymMatrix SymMatrix::operator-() const {
  SymMatrix r(n_);
  for (size_t k = 0; k < e_.size(); ++k) r.e_[k] = -e_[k];
  return r;
}

SymMatrix SymMatrix::operator*(double t) const {
  SymMatrix r(n_);
  for (size_t k = 0; k < e_.size(); ++k) r.e_[k] = e_[k] * t;
  return r;
}

std::array<double, 3> SymMatrix::eigenvalues() const {
  std::array<double, 3> ev{0.0, 0.0, 0.0};
  if (n_ == 1) {
    ev[0] = (*this)(0, 0);
    return ev;
  }
  if (n_ == 2) {
    const double a = (*this)(0, 0), b = (*this)(0, 1), c = (*this)(1, 1);
    const double mean = 0.5 * (a + c);
    const double r = std::hypot(0.5 * (a - c), b);
    ev[0] = mean - r;
    ev[1] = mean + r;
    return ev;
  }
  // n == 3: trigonometric closed form. With B = (A - q I)/p, the eigenvalues are
  // q + 2p cos(phi + 2 pi k / 3) where 3 phi = acos(det(B)/2).
  const double a00 = (*this)(0, 0), a11 = (*this)(1, 1), a22 = (*this)(2, 2);
  const double a01 = (*this)(0, 1), a02 = (*this)(0, 2), a12 = (*this)(1, 2);
  const double p1 = a01 * a01 + a02 * a02 + a12 * a12;
  if (p1 == 0.0) {
    ev = {a00, a11, a22};
    std::sort(ev.begin(), ev.end());
    return ev;
  }
  const double q = (a00 + a11 + a22) / 3.0;
  const double p2 =
      (a00 - q) * (a00 - q) + (a11 - q) * (a11 - q) + (a22 - q) * (a22 - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  const double b00 = (a00 - q) / p, b11 = (a11 - q) / p, b22 = (a22 - q) / p;
  const double b01 = a01 / p, b02 = a02 / p, b12 = a12 / p;
  const double detb = b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02) +
                      b02 * (b01 * b12 - b11 * b02);
  const double r = std::clamp(detb / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e_hi = q + 2.0 * p * std::cos(phi);
  const double e_lo = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
  ev = {e_lo, 3.0 * q - e_hi - e_lo, e_hi};
  return ev;
}

double pucci_minus(const SymMatrix& M, const EllipticitySpec& spec) {
  require_valid(spec);
  require_finite(M, "pucci_minus");
  const auto ev = M.eigenvalues();
  double pos = 0.0, neg = 0.0;
  for (int i = 0; i < M.dim(); ++i) {
    const double e = ev[static_cast<size_t>(i)];
    if (e > 0.0)
      pos += e;
    else
      neg += e;
  }
  return spec.lambda_low * pos + spec.lambda_high * neg;
}

double pucci_plus(const SymMatrix& M, const EllipticitySpec& spec) {
  // Exact duality: the eigenvalue list of -M is the bitwise negation of that of M
  // (the closed forms are odd in the entries), so this is the dual value exactly.
  return -pucci_minus(-M, spec);
}

OperatorKind OperatorKind::make_pucci_minus(EllipticitySpec spec) {
  require_valid(spec);
  return OperatorKind{Variant::PucciMinus, spec, {}};
}

OperatorKind OperatorKind::make_pucci_plus(EllipticitySpec spec) {
  require_valid(spec);
  return OperatorKind{Variant::PucciPlus, spec, {}};
}

OperatorKind OperatorKind::make_laplacian(EllipticitySpec spec) {
  require_valid(spec);
  return OperatorKind{Variant::Laplacian, spec, {}};
}

OperatorKind OperatorKind::make_bellman_inf(std::vector<SymMatrix> matrices,
                                            EllipticitySpec spec) {
  require_valid(spec);
  if (matrices.empty()) throw config_error("BellmanInf needs at least one diffusion matrix");
  const double slack = 1e-12 * (1.0 + spec.lambda_high);
  for (const auto& A : matrices) {
    require_finite(A, "make_bellman_inf");
    const auto ev = A.eigenvalues();
    for (int i = 0; i < A.dim(); ++i) {
      const double e = ev[static_cast<size_t>(i)];
      if (e < spec.lambda_low - slack || e > spec.lambda_high + slack) {
        throw config_error("BellmanInf matrix has an eigenvalue " + std::to_string(e) +
                           " outside [" + std::to_string(spec.lambda_low) + ", " +
                           std::to_string(spec.lambda_high) + "]");
      }
    }
  }
  return OperatorKind{Variant::BellmanInf, spec, std::move(matrices)};
}

const char* OperatorKind::name() const {
  switch (variant) {
    case Variant::PucciMinus: return "pucci_minus";
    case Variant::PucciPlus: return "pucci_plus";
    case Variant::Laplacian: return "laplacian";
    case Variant::BellmanInf: return "bellman_inf";
  }
  return "?";
}

double operator_eval(const OperatorKind& kind, const SymMatrix& M) {
  require_finite(M, "operator_eval");
  switch (kind.variant) {
    case OperatorKind::Variant::PucciMinus: return pucci_minus(M, kind.spec);
    case OperatorKind::Variant::PucciPlus: return pucci_plus(M, kind.spec);
    case OperatorKind::Variant::Laplacian: return M.trace();
    case OperatorKind::Variant::BellmanInf: {
      if (kind.bellman.empty()) throw config_error("BellmanInf has an empty matrix list");
      double best = sym_dot(kind.bellman.front(), M);
      for (size_t i = 1; i < kind.bellman.size(); ++i)
        best = std::min(best, sym_dot(kind.bellman[i], M));
      return best;
    }
  }
  throw input_error("operator_eval: unknown variant");
}

bool ellipticity_sandwich_check(const OperatorKind& kind, const SymMatrix& M,
                                const SymMatrix& N) {
  if (M.dim() != N.dim()) throw input_error("ellipticity_sandwich_check: dimension mismatch");
  const SymMatrix D = M - N;
  const double lower = pucci_minus(D, kind.spec);
  const double upper = pucci_plus(D, kind.spec);
  const double diff = operator_eval(kind, M) - operator_eval(kind, N);
  const double tol = 1e-12 * (1.0 + std::max(std::abs(lower), std::abs(upper)));
  return diff >= lower - tol && diff <= upper + tol;
}

}  // namespace pucci
