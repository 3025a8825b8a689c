#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pucci/flow.hpp"
#include "pucci/grid.hpp"
#include "pucci/matrix_ops.hpp"

namespace pucci {

// One row of the convergence history. For the linear mode `rate` is the decay
// exponent fitted over the segment and `delta` the sup-norm change of the
// normalized profile; for the sublinear mode `rate` is the log-log slope of
// sup(u) across the doubling pair and `delta` the doubling difference of
// z = t^{1/(m-1)} u. `sup_state` is the unnormalized sup of u (linear) or of
// z (sublinear).
struct ConvergenceEntry {
  int iteration = 0;
  double t = 0.0;
  double rate = 0.0;
  double delta = 0.0;
  double sup_state = 0.0;
};

// Boundary slope survey: one-sided second-order differences along the inward
// normal, one per boundary node. Nodes without a well-defined normal (polygon
// and rectangle corners) or whose sample points leave the lattice are skipped
// and counted. min/max are 0 when no node was usable.
struct HopfSlopes {
  double min_slope = 0.0;
  double max_slope = 0.0;
  int used = 0;
  int skipped = 0;
};

struct EigenControls {
  int frames = 8;
  std::int64_t max_total_steps = 20'000'000;
  int max_iterations = 200;        // segments (linear) or doublings (sublinear)
  int initial_segment_steps = 16;  // linear: first segment length, doubles up to the cap
  int max_segment_steps = 65536;
  int first_sample_steps = 16;  // sublinear: first sample at this many initial CFL steps
};

struct EigenResult {
  enum class Mode { Linear, Sublinear };
  Mode mode = Mode::Linear;
  double m = 1.0;           // 1 for Linear, the flow exponent for Sublinear
  double mu = 0.0;          // fitted decay rate (Linear); 1/(m-1) (Sublinear)
  double gamma_star = 0.0;  // Linear: limit of e^{mu t} sup u
  Field profile;            // sup-normalized to 1 (Linear); the limit f (Sublinear)
  HopfSlopes slopes;        // measured on profile (Linear) or profile^m (Sublinear)
  std::vector<ConvergenceEntry> log;
  std::vector<std::string> warnings;
  double data_lower_ratio = 0.0;  // sublinear: bounds of u0^m / boundary distance
  double data_upper_ratio = 0.0;
  double residual = 0.0;        // band residual of the returned pair
  double residual_bound = 0.0;  // threshold the residual was checked against
  std::int64_t total_steps = 0;
};

// Principal eigenpair of -F(D^2 phi) = mu phi via the renormalized heat flow:
// the field is evolved in segments of doubling length, renormalized to sup 1
// after each, and mu is fitted from the log of the decay per segment.
// Converged when consecutive mu estimates differ by less than tol_mu and
// consecutive normalized profiles by less than tol_profile; the returned pair
// must additionally pass a pointwise residual check on the interior band
// (nodes at least 4h from the boundary).
EigenResult solve_linear(const OperatorKind& kind, const Grid& grid, const Field& u0,
                         double tol_mu = 1e-5, double tol_profile = 1e-4,
                         const EigenControls& controls = {});

// Limit profile f of the degenerate flow, -F(D^2 f^m) = f/(m-1): evolves
// u_t = F(D^2 u^m) and compares z = t^{1/(m-1)} u across time doublings until
// the difference drops below tol_profile. The same band residual check
// applies, scaled by 1/(m-1).
EigenResult solve_sublinear(const OperatorKind& kind, const Grid& grid, double m,
                            const Field& u0, double tol_profile = 1e-4,
                            const EigenControls& controls = {});

HopfSlopes hopf_slope(const Field& profile);

// Two independent solves compared: sup-normalized profiles for m = 1 (the
// fitted amplitudes may differ), the full f including amplitude for m > 1.
struct UniquenessReport {
  EigenResult a, b;
  double profile_gap = 0.0;
  double tol = 1e-3;
  bool agree() const { return profile_gap <= tol; }
};

UniquenessReport uniqueness_probe(const OperatorKind& kind, const Grid& grid, double m,
                                  const Field& u0_a, const Field& u0_b, double tol = 1e-3,
                                  const EigenControls& controls = {});

// Writes manifest.json plus profile.csv into `directory` (created if needed).
void write_eigen_result(const EigenResult& result, const std::string& directory);

}  // namespace pucci
