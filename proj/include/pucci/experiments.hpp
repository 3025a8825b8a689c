#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pucci/flow.hpp"
#include "pucci/grid.hpp"

namespace pucci {

// Decay-rate fit over the final third of a trace. Linear fits log sup|u|
// against t (slope -mu for an exponentially decaying flow); Sublinear fits
// log sup|u| against log t (slope -1/(m-1) for the degenerate flow). Only
// snapshot times and sup norms are read, so synthetic traces may leave the
// field data empty.
enum class DecayMode { Linear, Sublinear };

struct DecayFit {
  DecayMode mode = DecayMode::Linear;
  double rate = 0.0;          // least-squares slope over the window
  double fit_residual = 0.0;  // max |log sup - fitted line| over the window
  int points = 0;
  double window_begin = 0.0;  // first snapshot time in the window
  double window_end = 0.0;
};

// Requires at least 8 snapshots in the window; a window with no spread in
// the abscissa, a nonpositive sup norm, or (Sublinear) a nonpositive time is
// an input error.
DecayFit decay_fit(const FlowTrace& trace, DecayMode mode);

// Empirical constant of the time-derivative lower bound u_t >= -C u / t,
// measured on the degenerate state w = u^m as
//   C* = max over band nodes and snapshot times of -t w_t / w,
// with w_t from centered differences (exact on quadratics for uneven
// spacing), and likewise on v = u^(m-1). The first and last snapshots have
// no centered difference and are never evaluated; nodes where the state
// vanishes are excluded and counted.
struct AbReport {
  double c_star_w = 0.0;
  double c_star_v = 0.0;
  double band = 4.0;   // multiples of h
  double t_min = 0.0;  // snapshots strictly earlier are skipped
  std::int64_t evaluations = 0;
  std::int64_t excluded = 0;
  std::vector<double> times;       // evaluated snapshot times
  std::vector<double> per_time_w;  // band max of -t w_t / w at each time
};

AbReport ab_constant(const FlowTrace& trace, double band = 4.0, double t_min = 0.0);

// Reference limit profile f on a 1D grid over (0, L): the solution of
//   -(f^m)'' = f / (m - 1),  f = 0 at both ends,
// by shooting on g = f^m. The normalized problem g'' = -g^(1/m) / (m - 1),
// g(0) = 0, g'(0) = 1 is integrated with fixed-step RK4 to its first zero
// x0 and rescaled onto the interval, g(x) = s^(2m/(m-1)) g(x/s) with
// s = L / x0. Independent of the grid operators; used to cross-check the
// degenerate eigensolver.
Field shooting_profile_1d(const Grid& grid, double m);

// One verified inequality: pass iff measured <= bound (LessEq) or
// measured >= bound (GreaterEq). margin is the signed slack, nonnegative
// exactly when the check passes. ladder holds the measured value per grid
// level, coarse to fine, for checks run across a refinement ladder; the
// final entry equals measured.
enum class CheckRelation { LessEq, GreaterEq };

struct CheckOutcome {
  std::string name;
  std::string claim;  // plain-language property the check certifies
  double measured = 0.0;
  CheckRelation relation = CheckRelation::LessEq;
  double bound = 0.0;
  double margin = 0.0;
  bool pass = false;
  std::vector<double> ladder;
};

// Measured values shrink along the ladder, coarse to fine. Ties within the
// rounding floor count as improvements, and one inversion is tolerated at
// the finest transition.
bool ladder_improves(const CheckOutcome& check);

struct ExperimentOutcome {
  std::string name;
  std::string description;
  int coarsen = 0;
  bool pass = false;          // aggregate over checks
  double wall_seconds = 0.0;  // informational; everything else is deterministic
  std::vector<CheckOutcome> checks;
};

// coarsen halves every registered resolution that many times (time windows
// and tolerances are unchanged), for quick smoke runs. Each experiment caps
// how far it can be coarsened before its bands or stencils degenerate.
struct ExperimentOptions {
  int coarsen = 0;
};

// Registered experiment names, in registry order.
std::vector<std::string> experiment_names();

std::string experiment_description(const std::string& name);

// Runs one registered experiment and returns its outcome record. Checks are
// never skipped: every registered check appears in the outcome. Outcomes are
// deterministic given the options; only wall_seconds varies between runs.
// An unregistered name is an input error whose message lists the registry.
ExperimentOutcome run_experiment(const std::string& name, const ExperimentOptions& options = {});

// All registered experiments in registry order. Each experiment owns its
// flows and touches no shared state, so failures are independent. coarsen is
// clamped to each experiment's cap rather than rejected.
std::vector<ExperimentOutcome> run_all_experiments(const ExperimentOptions& options = {});

std::string outcome_to_json(const ExperimentOutcome& outcome);
void write_outcome_json(const ExperimentOutcome& outcome, const std::string& path);

// Inverse of outcome_to_json. Text that does not parse, lacks a required
// field, or carries an unknown relation is an input error.
ExperimentOutcome outcome_from_json(const std::string& text);

// One row per check: experiment, check, measured, relation, bound, margin,
// pass. The header row is always present.
std::string summary_csv_text(const std::vector<ExperimentOutcome>& outcomes);
void write_summary_csv(const std::vector<ExperimentOutcome>& outcomes, const std::string& path);

// Fixed-width text block, one line per check plus a verdict line.
std::string format_outcome(const ExperimentOutcome& outcome);

}  // namespace pucci
