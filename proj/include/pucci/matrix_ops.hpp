#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace pucci {

// Ellipticity bounds (lambda, Lambda) defining the admissible diffusion class:
// symmetric matrices A with spectrum contained in [lambda_low, lambda_high].
struct EllipticitySpec {
  double lambda_low = 1.0;
  double lambda_high = 1.0;

  bool valid() const { return lambda_low > 0.0 && lambda_low <= lambda_high; }
};

// Symmetric n x n matrix, n in {1, 2, 3}. Only the upper triangle is stored, so
// symmetry holds to exact equality by construction.
class SymMatrix {
 public:
  explicit SymMatrix(int n);

  static SymMatrix zero(int n) { return SymMatrix(n); }
  static SymMatrix identity(int n);
  static SymMatrix diag(std::vector<double> d);
  // Row-major full matrix; the strict lower triangle is ignored.
  static SymMatrix from_rows(int n, const double* rows);

  int dim() const { return n_; }
  double operator()(int i, int j) const { return e_[tri_index(i, j)]; }
  void set(int i, int j, double v) { e_[tri_index(i, j)] = v; }

  double trace() const;
  bool finite() const;

  SymMatrix operator+(const SymMatrix& o) const;
  SymMatrix operator-(const SymMatrix& o) const;
  SymMatrix operator-() const;
  SymMatrix operator*(double t) const;

  // Eigenvalues in ascending order (closed form: linear for n=1, quadratic for
  // n=2, trigonometric for n=3). Only the first dim() entries are meaningful.
  std::array<double, 3> eigenvalues() const;

 private:
  int tri_index(int i, int j) const;

  int n_;
  std::array<double, 6> e_;  // packed upper triangle
};

// M_plus(M) = Lambda * sum(positive eigenvalues) + lambda * sum(negative eigenvalues);
// the supremum of tr(AM) over the admissible class.
double pucci_plus(const SymMatrix& M, const EllipticitySpec& spec);

// M_minus(M) = lambda * sum(positive eigenvalues) + Lambda * sum(negative eigenvalues);
// the infimum of tr(AM) over the admissible class. Dual: M_plus(M) = -M_minus(-M).
double pucci_minus(const SymMatrix& M, const EllipticitySpec& spec);

// Which F is in play. All variants are positively 1-homogeneous with F(0) = 0;
// PucciMinus, Laplacian and BellmanInf are additionally concave in the matrix argument.
struct OperatorKind {
  enum class Variant { PucciMinus, PucciPlus, Laplacian, BellmanInf };

  Variant variant = Variant::PucciMinus;
  EllipticitySpec spec;
  std::vector<SymMatrix> bellman;  // BellmanInf only; validated at construction

  static OperatorKind make_pucci_minus(EllipticitySpec spec);
  static OperatorKind make_pucci_plus(EllipticitySpec spec);
  static OperatorKind make_laplacian(EllipticitySpec spec = {1.0, 1.0});
  // Every matrix must be symmetric with spectrum inside [spec.lambda_low, spec.lambda_high].
  static OperatorKind make_bellman_inf(std::vector<SymMatrix> matrices, EllipticitySpec spec);

  bool concave() const { return variant != Variant::PucciPlus; }
  const char* name() const;
};

// Pointwise evaluation of F on a symmetric matrix.
double operator_eval(const OperatorKind& kind, const SymMatrix& M);

// Uniform ellipticity test: pucci_minus(M-N) <= F(M)-F(N) <= pucci_plus(M-N),
// with slack 1e-12 relative to the bracket size.
bool ellipticity_sandwich_check(const OperatorKind& kind, const SymMatrix& M, const SymMatrix& N);

}  // namespace pucci
