#include "pucci/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>

#include "json.hpp"
#include "pucci/errors.hpp"
#include "pucci/field_io.hpp"

namespace pucci {

namespace {

double boundary_state_value(const FlowConfig& c) {
  return c.m == 1.0 ? c.eta : std::pow(c.eta, c.m);
}

void impose_boundary(const FlowConfig& c, Field& state) {
  const Grid& g = *state.grid;
  const double bv = boundary_state_value(c);
  for (int id = 0; id < g.total_nodes(); ++id)
    if (g.node_class[static_cast<size_t>(id)] != NodeClass::Interior) state[id] = bv;
}

double degenerate_coefficient(const FlowConfig& c, const Field& state) {
  if (c.m == 1.0) return 1.0;
  const double top = state.sup_norm();
  const double coeff = c.m * std::pow(top, 1.0 - 1.0 / c.m);
  return std::max(coeff, 1e-14);
}

// One explicit update of the evolved state (u for m = 1, w = u^m otherwise).
// rhs is scratch for F_h(state). Throws on the first non-finite node.
void step_state(const FlowConfig& c, const DiscreteOperator& op, Field& state, Field& rhs,
                double dt, double t_now) {
  apply_operator_into(op, state, rhs);
  const Grid& g = *op.grid;
  const int ni = g.interior_count;
  const int32_t* ids = g.interior_ids.data();
  double* w = state.values.data();
  const double* f = rhs.values.data();
  if (c.m == 1.0) {
#pragma omp parallel for schedule(static)
    for (int k = 0; k < ni; ++k) {
      const int id = ids[k];
      w[id] += dt * f[id];
    }
  } else if (c.m == 2.0) {
    const double mdt = 2.0 * dt;
#pragma omp parallel for schedule(static)
    for (int k = 0; k < ni; ++k) {
      const int id = ids[k];
      w[id] += mdt * std::sqrt(w[id]) * f[id];
    }
  } else {
    const double e = 1.0 - 1.0 / c.m;
    const double mdt = c.m * dt;
#pragma omp parallel for schedule(static)
    for (int k = 0; k < ni; ++k) {
      const int id = ids[k];
      w[id] += mdt * std::pow(w[id], e) * f[id];
    }
  }
  impose_boundary(c, state);
  for (int k = 0; k < ni; ++k) {
    const int id = ids[k];
    if (!std::isfinite(w[id]))
      throw numeric_error("time step produced a non-finite value at node " + std::to_string(id) +
                              ", t = " + std::to_string(t_now),
                          {t_now, static_cast<double>(id), w[id]});
  }
}

std::vector<double> snapshot_times(const FlowConfig& c) {
  std::vector<double> times;
  const double margin = c.t_end * (1.0 - 1e-12);
  if (c.schedule.kind == SnapshotSchedule::Kind::Uniform) {
    const double ds = c.schedule.dt_snap > 0.0 ? c.schedule.dt_snap : c.t_end / 16.0;
    for (int k = 1; k * ds < margin; ++k) times.push_back(k * ds);
  } else {
    const double tf = c.schedule.t_first > 0.0 ? c.schedule.t_first : c.t_end / 1024.0;
    for (double t = tf; t < margin; t *= c.schedule.ratio) times.push_back(t);
  }
  times.push_back(c.t_end);
  return times;
}

void record_snapshot(const FlowConfig& c, const Field& state, double t, std::int64_t steps,
                     FlowTrace& trace) {
  Snapshot s;
  s.t = t;
  s.steps = steps;
  if (c.m == 1.0) {
    s.u = state;
  } else {
    s.w = state;
    s.u = power_field(state, 1.0 / c.m);
  }
  s.sup_u = s.u.sup_norm();
  const Grid& g = *state.grid;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  bool seen = false;
  for (int k = 0; k < g.interior_count; ++k) {
    const int id = g.interior_ids[static_cast<size_t>(k)];
    const double d = g.node_dist[static_cast<size_t>(id)];
    if (d <= 0.0 || d > 2.0 * g.h) continue;
    const double r = s.u[id] / d;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    seen = true;
  }
  s.slope_min = seen ? lo : 0.0;
  s.slope_max = seen ? hi : 0.0;
  trace.snapshots.push_back(std::move(s));
}

}  // namespace

void validate(const FlowConfig& config) {
  if (!(config.m >= 1.0) || !std::isfinite(config.m))
    throw config_error("diffusion exponent m must be >= 1");
  if (!(config.eta >= 0.0) || !std::isfinite(config.eta))
    throw config_error("boundary value eta must be >= 0");
  if (config.m == 1.0 && config.eta != 0.0)
    throw config_error("m = 1 requires eta = 0 (the linear flow has no boundary lift)");
  if (!(config.cfl_safety > 0.0) || config.cfl_safety > 1.0)
    throw config_error("cfl_safety must lie in (0, 1]");
  if (!(config.t_end > 0.0) || !std::isfinite(config.t_end))
    throw config_error("t_end must be positive");
  if (!config.operator_kind.spec.valid()) throw config_error("invalid ellipticity bounds");
  if (config.schedule.kind == SnapshotSchedule::Kind::Geometric && !(config.schedule.ratio > 1.0))
    throw config_error("geometric snapshot schedule needs ratio > 1");
  if (config.schedule.dt_snap < 0.0 || config.schedule.t_first < 0.0)
    throw config_error("snapshot schedule times must be nonnegative");
  if (config.frames < 1) throw config_error("frame count must be >= 1");
}

double cfl_dt(const FlowConfig& config, const DiscreteOperator& op, const Field& state) {
  const double s = max_center_weight(op);
  return config.cfl_safety / (s * degenerate_coefficient(config, state));
}

Field step(const FlowConfig& config, const DiscreteOperator& op, const Field& u, double dt) {
  validate(config);
  if (u.grid != op.grid) throw input_error("field and operator live on different grids");
  Field state = config.m == 1.0 ? u : power_field(u, config.m);
  Field rhs(*op.grid);
  step_state(config, op, state, rhs, dt, 0.0);
  return config.m == 1.0 ? state : power_field(state, 1.0 / config.m);
}

FlowTrace evolve(const FlowConfig& config, const DiscreteOperator& op, const Field& u0) {
  validate(config);
  if (u0.grid != op.grid) throw input_error("initial data and operator live on different grids");
  if (!u0.finite()) throw input_error("initial data must be finite");
  for (int k = 0; k < op.grid->interior_count; ++k) {
    const int id = op.grid->interior_ids[static_cast<size_t>(k)];
    if (u0[id] < config.eta)
      throw input_error("initial data must dominate the boundary value eta (node " +
                        std::to_string(id) + ")");
  }

  FlowTrace trace;
  trace.config = config;
  Field state = config.m == 1.0 ? u0 : power_field(u0, config.m);
  impose_boundary(config, state);
  Field rhs(*op.grid);

  const double s_weight = max_center_weight(op);
  double t = 0.0;
  std::int64_t steps = 0;
  record_snapshot(config, state, t, steps, trace);
  for (const double target : snapshot_times(config)) {
    while (t < target) {
      double dt = config.cfl_safety / (s_weight * degenerate_coefficient(config, state));
      if (t + dt >= target) {
        dt = target - t;
        t = target;
      } else {
        t += dt;
      }
      step_state(config, op, state, rhs, dt, t);
      ++steps;
    }
    record_snapshot(config, state, target, steps, trace);
  }
  trace.total_steps = steps;
  return trace;
}

FlowTrace evolve(const FlowConfig& config, const Field& u0) {
  validate(config);
  if (u0.grid == nullptr) throw input_error("initial data is not attached to a grid");
  const auto op = make_discrete_operator(config.operator_kind, *u0.grid,
                                         make_stencil_set(*u0.grid, config.frames));
  return evolve(config, op, u0);
}

ComparisonReport comparison_harness(const FlowConfig& config, const Field& u0_low,
                                    const Field& u0_high, double t_end) {
  validate(config);
  if (u0_low.grid == nullptr || u0_low.grid != u0_high.grid)
    throw input_error("comparison inputs must share one grid");
  if (!(t_end > 0.0)) throw input_error("comparison horizon must be positive");
  const Grid& g = *u0_low.grid;
  for (int id = 0; id < g.total_nodes(); ++id)
    if (u0_low[id] > u0_high[id])
      throw input_error("comparison inputs are not ordered at node " + std::to_string(id));

  const auto op =
      make_discrete_operator(config.operator_kind, g, make_stencil_set(g, config.frames));
  Field lo = config.m == 1.0 ? u0_low : power_field(u0_low, config.m);
  Field hi = config.m == 1.0 ? u0_high : power_field(u0_high, config.m);
  impose_boundary(config, lo);
  impose_boundary(config, hi);
  Field rhs(g);

  const double s_weight = max_center_weight(op);
  ComparisonReport rep;
  double t = 0.0;
  while (t < t_end) {
    const double c =
        std::max(degenerate_coefficient(config, lo), degenerate_coefficient(config, hi));
    double dt = config.cfl_safety / (s_weight * c);
    if (t + dt >= t_end) {
      dt = t_end - t;
      t = t_end;
    } else {
      t += dt;
    }
    step_state(config, op, lo, rhs, dt, t);
    step_state(config, op, hi, rhs, dt, t);
    ++rep.steps;
    for (int id = 0; id < g.total_nodes(); ++id)
      rep.max_violation = std::max(rep.max_violation, lo[id] - hi[id]);
  }
  rep.max_violation = std::max(rep.max_violation, 0.0);
  rep.t_final = t;
  return rep;
}

void write_trace(const FlowTrace& trace, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);

  nlohmann::json man;
  const FlowConfig& c = trace.config;
  man["m"] = c.m;
  man["operator"] = c.operator_kind.name();
  man["lambda_low"] = c.operator_kind.spec.lambda_low;
  man["lambda_high"] = c.operator_kind.spec.lambda_high;
  man["eta"] = c.eta;
  man["cfl_safety"] = c.cfl_safety;
  man["t_end"] = c.t_end;
  man["frames"] = c.frames;
  man["schedule"]["kind"] =
      c.schedule.kind == SnapshotSchedule::Kind::Uniform ? "uniform" : "geometric";
  man["schedule"]["dt_snap"] = c.schedule.dt_snap;
  man["schedule"]["t_first"] = c.schedule.t_first;
  man["schedule"]["ratio"] = c.schedule.ratio;
  if (!trace.snapshots.empty() && trace.snapshots.front().u.grid != nullptr)
    man["grid"] = grid_metadata(*trace.snapshots.front().u.grid);
  man["total_steps"] = trace.total_steps;

  nlohmann::json snaps = nlohmann::json::array();
  for (size_t i = 0; i < trace.snapshots.size(); ++i) {
    const Snapshot& s = trace.snapshots[i];
    char name[32];
    std::snprintf(name, sizeof(name), "u_%04zu.csv", i);
    write_field_csv(s.u, directory + "/" + name);
    nlohmann::json e;
    e["t"] = s.t;
    e["sup_u"] = s.sup_u;
    e["steps"] = s.steps;
    e["slope_min"] = s.slope_min;
    e["slope_max"] = s.slope_max;
    e["u_csv"] = name;
    if (s.w.grid != nullptr) {
      std::snprintf(name, sizeof(name), "w_%04zu.csv", i);
      write_field_csv(s.w, directory + "/" + name);
      e["w_csv"] = name;
    }
    snaps.push_back(std::move(e));
  }
  man["snapshots"] = std::move(snaps);
  write_text_file(directory + "/manifest.json", man.dump(2) + "\n");
}

Field power_field(const Field& f, double p) {
  if (f.grid == nullptr) throw input_error("field is not attached to a grid");
  Field out(*f.grid);
  const size_t n = f.values.size();
  if (p == 1.0) {
    out.values = f.values;
  } else if (p == 2.0) {
    for (size_t i = 0; i < n; ++i) out.values[i] = f.values[i] * f.values[i];
  } else if (p == 0.5) {
    for (size_t i = 0; i < n; ++i) out.values[i] = std::sqrt(f.values[i]);
  } else {
    for (size_t i = 0; i < n; ++i) out.values[i] = std::pow(f.values[i], p);
  }
  return out;
}

}  // namespace pucci
