#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pucci/eigen.hpp"
#include "pucci/flow.hpp"
#include "pucci/grid.hpp"

namespace pucci {

// Pointwise change of variables applied before a concavity check. Log and
// Power require strictly positive samples at every node the check reads;
// power(1) is the identity bitwise.
struct Transform {
  enum class Kind { Identity, Log, Power };
  Kind kind = Kind::Identity;
  double q = 1.0;  // Power exponent, positive

  static Transform identity() { return {}; }
  static Transform log() { return {Kind::Log, 1.0}; }
  static Transform power(double q);

  double apply(double v) const;
  const char* name() const;
};

// One midpoint triple a, b with lattice-exact midpoint mid, all distinct
// interior nodes inside the band. value = T(u(a)) + T(u(b)) - 2 T(u(mid));
// nonpositive for every triple exactly when T(u) is midpoint concave there.
struct Triple {
  int a = -1;
  int b = -1;
  int mid = -1;
  double value = 0.0;
};

// Concavity diagnostic over the interior band { node_dist >= band * h }.
// worst is the maximum triple value (0 when no triple is admissible); the
// discrete-Hessian summary comes from the same transformed field, read one
// lattice cell beyond the band. c1 = -max_hessian_eig when that is negative,
// else 0.
struct ConcavityReport {
  Transform transform;
  double band = 4.0;  // multiples of h
  double worst = 0.0;
  Triple worst_triple;
  std::int64_t triple_count = 0;
  double sup_transform = 0.0;  // sup |T(u)| over the band
  double max_hessian_eig = 0.0;
  double c1 = 0.0;
  int hessian_nodes = 0;
  std::vector<Triple> top;  // worst triples first, at most 100

  // Midpoint concavity holds on the band up to rel_tol * sup|T(u)|.
  bool passes(double rel_tol = 0.0) const {
    return worst <= rel_tol * sup_transform;
  }
};

// Enumerates every node pair in the band whose midpoint is a lattice node in
// the band and reports the largest transformed second difference. Ties are
// broken toward the lexicographically smallest (a, b) pair, so the parallel
// and serial versions return identical reports.
ConcavityReport midpoint_concavity(const Field& u, const Transform& transform,
                                   double band = 4.0);
ConcavityReport midpoint_concavity_serial(const Field& u, const Transform& transform,
                                          double band = 4.0);

// Largest eigenvalue of the discrete Hessian of T(u) over band nodes whose
// full axis and diagonal neighborhoods exist. The mixed term is recovered
// from the diagonal second difference, so the bound is exact on quadratics.
struct HessianBound {
  double max_eigenvalue = 0.0;
  double c1 = 0.0;  // -max_eigenvalue when negative, else 0
  int nodes = 0;    // band nodes examined
};

HessianBound hessian_bound(const Field& u, const Transform& transform,
                           double band = 4.0);

// Worst midpoint violation at every audited snapshot of a flow. The audit
// requires the initial snapshot to pass; each later snapshot is then held to
// tol = 1e-8 * sup|T(u(t))| at its own time. stride > 1 audits every
// stride-th snapshot (the final one is always included).
struct PreservationAudit {
  Transform transform;
  double band = 4.0;
  std::vector<double> times;
  std::vector<double> worst;      // per audited snapshot
  std::vector<double> tolerance;  // 1e-8 * sup|T(u(t))|, same indexing
  bool pass = false;
  int first_failure = -1;  // index into times, -1 when pass
};

PreservationAudit preservation_audit(const FlowTrace& trace, const Transform& transform,
                                     double band = 4.0, int stride = 1);

// Scans a flow for the first snapshot from which the transformed Hessian
// bound D^2 T <= -(c1 - epsilon) I holds through the end of the trace.
// Linear eigenpairs use T = log with c1 taken from log(profile); sublinear
// ones use the pressure-root sqrt(t m/(m-1)) u^((m-1)/2) with c1 from the
// same root of the limit profile. Snapshots where the state vanishes on the
// band are reported as failing rather than erroring.
struct EventualConcavityResult {
  bool reached = false;
  int index = -1;    // snapshot index of t0 when reached
  double t0 = 0.0;
  double c1 = 0.0;
  double epsilon = 0.0;
  double bound = 0.0;  // -(c1 - epsilon)
  std::vector<double> times;
  std::vector<double> max_eig;  // per snapshot, same indexing as times
  double final_margin = 0.0;    // max_eig - bound at the last snapshot
};

EventualConcavityResult eventual_concavity_probe(const FlowTrace& trace,
                                                 const EigenResult& eigen,
                                                 double epsilon, double band = 4.0);

// report.json plus triples.csv (the stored worst triples with lattice
// coordinates) under directory.
void write_concavity_report(const ConcavityReport& report, const Grid& grid,
                            const std::string& directory);

}  // namespace pucci
