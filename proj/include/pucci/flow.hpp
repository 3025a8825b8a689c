#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pucci/grid.hpp"
#include "pucci/stencil.hpp"

namespace pucci {

// When to record fields along a flow. Uniform spacing suits rate fits on a
// linear time axis; geometric spacing suits power-law decay, where equal work
// per decade matters. Zero entries pick defaults relative to t_end.
struct SnapshotSchedule {
  enum class Kind { Uniform, Geometric };
  Kind kind = Kind::Uniform;
  double dt_snap = 0.0;  // uniform spacing; 0 selects t_end / 16
  double t_first = 0.0;  // geometric: first positive time; 0 selects t_end / 1024
  double ratio = 2.0;    // geometric growth factor, > 1
};

// One diffusion run. m = 1 integrates u_t = F_h(u) directly. m > 1 evolves
// w = u^m with the degenerate coefficient frozen at each step,
//   w <- w + dt * m * w^(1-1/m) * F_h(w),
// which keeps the update monotone in every neighbor value. The boundary
// carries u = eta (so w = eta^m); eta = 0 is the plain absorbing wall and is
// mandatory for m = 1.
struct FlowConfig {
  double m = 1.0;
  OperatorKind operator_kind;
  double eta = 0.0;
  double cfl_safety = 0.5;
  double t_end = 1.0;
  SnapshotSchedule schedule;
  int frames = 8;
};

void validate(const FlowConfig& config);

struct Snapshot {
  double t = 0.0;
  Field u;
  Field w;  // empty when m == 1
  double sup_u = 0.0;
  // min and max of u / dist over interior nodes within 2h of the boundary;
  // a cheap positivity-versus-distance summary of the boundary behavior.
  double slope_min = 0.0;
  double slope_max = 0.0;
  std::int64_t steps = 0;  // cumulative step count at this snapshot
};

struct FlowTrace {
  FlowConfig config;
  std::vector<Snapshot> snapshots;
  std::int64_t total_steps = 0;
};

// Largest stable explicit step for the current state (w when m > 1). The
// bound is cfl_safety / (S * m * max(state)^(1-1/m)) with S the operator's
// worst center weight; on a clean grid S = 2 n Lambda / h^2. A vanishing
// degenerate coefficient is floored at 1e-14 (the flow is stationary then).
double cfl_dt(const FlowConfig& config, const DiscreteOperator& op, const Field& state);

// One forward-Euler step in u semantics: converts to w for m > 1, updates,
// reimposes the Dirichlet values, converts back. Throws numeric_error naming
// the first offending node if the update produces a non-finite value.
Field step(const FlowConfig& config, const DiscreteOperator& op, const Field& u, double dt);

// Full run from u0 (u semantics, u0 >= eta required) with per-step CFL
// control; steps land exactly on snapshot times. The trace always contains
// t = 0 and t = t_end.
FlowTrace evolve(const FlowConfig& config, const DiscreteOperator& op, const Field& u0);
FlowTrace evolve(const FlowConfig& config, const Field& u0);

struct ComparisonReport {
  double max_violation = 0.0;  // max over steps and nodes of (low - high)+
  std::int64_t steps = 0;
  double t_final = 0.0;
  bool ordered(double tol = 1e-12) const { return max_violation <= tol; }
};

// Evolves both initial data with a shared step sequence (the smaller of the
// two CFL bounds each step) and records the worst ordering violation of the
// evolved states. Ordered inputs must stay ordered to 1e-12.
ComparisonReport comparison_harness(const FlowConfig& config, const Field& u0_low,
                                    const Field& u0_high, double t_end);

// Writes snapshot CSVs plus manifest.json (config echo, times, norms, step
// counts) into the directory, creating it if needed.
void write_trace(const FlowTrace& trace, const std::string& directory);

// Nodewise power with exact fast paths for p in {0.5, 1, 2}.
Field power_field(const Field& f, double p);

}  // namespace pucci
