#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pucci/domain.hpp"
#include "pucci/flow.hpp"
#include "pucci/geometry.hpp"
#include "pucci/grid.hpp"
#include "pucci/matrix_ops.hpp"

namespace pucci {

// Fully resolved run description. Every field has a documented default, so a
// parsed config is always complete; validation happens at parse time, before
// any module is invoked.
struct RunConfig {
  Domain domain;
  OperatorKind operator_kind = OperatorKind::make_laplacian();
  double m = 1.0;
  std::vector<double> h_ladder;  // one or more spacings, as written in the config
  InitialDataKind data_kind = InitialDataKind::Distance;
  double data_power = 0.5;

  double t_end = 1.0;
  double eta = 0.0;
  double cfl_safety = 0.5;
  SnapshotSchedule schedule;
  int frames = 8;

  double tol_mu = 1e-5;
  double tol_profile = 1e-4;

  // check subcommand knobs.
  Transform check_transform = Transform::log();
  double check_band = 4.0;
  double check_t_min = 0.0;
  double check_bound = 2.5;
  int check_pairs = 100;
  double check_tol = 1e-12;

  std::string output_dir;  // empty selects <output root>/<command>
  std::uint64_t seed = 1;

  // Grid at a ladder level (default: the finest entry).
  Grid make_grid(size_t level) const;
  Grid make_grid() const { return make_grid(h_ladder.size() - 1); }
  FlowConfig flow_config() const;
  Field initial_data(const Grid& grid) const;
};

// Line-oriented `key = value` text with `#` comments and dotted keys. Numeric
// values accept pi-arithmetic (`pi/256`, `2*pi`, parentheses); `grid.h` also
// accepts a comma-separated ladder. Unknown keys, duplicate keys, type
// mismatches, and precondition violations raise config_error naming the line.
RunConfig config_parse(const std::string& text);

// Every key with its default and a one-line description, in config syntax.
std::string config_defaults();

// The config re-serialized with every key explicit. Parsing the result
// reproduces the same RunConfig (numbers round-trip bit for bit).
std::string resolved_config_text(const RunConfig& config);

// Default directory root for run artifacts: $PUCCILAB_OUT when set, else
// "runs" under the working directory.
std::string output_root();

// Command-line entry point.
//   evolve <config>              run the flow, emit trace CSVs
//   eigen <config>               extract the principal pair, emit eigen.json
//   check concavity|ab|comparison|barriers <config>
//                                run one certification, emit its report
//   experiment <name>|all        run registered experiments
//   report <dir>                 aggregate a directory of runs
// Exit codes: 0 pass, 1 check failure, 2 usage or config error, 3 numerical
// failure. Every run directory receives manifest.json and resolved.cfg; no
// existing file is overwritten without --force.
int cli(int argc, const char* const* argv);

}  // namespace pucci
