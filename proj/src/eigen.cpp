#include "pucci/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include "json.hpp"
#include "pucci/errors.hpp"
#include "pucci/field_io.hpp"
#include "pucci/stencil.hpp"

namespace pucci {

namespace {

void check_data(const Grid& g, const Field& u0) {
  if (u0.grid != &g) throw input_error("initial data lives on a different grid");
  if (!u0.finite()) throw input_error("initial data contains non-finite values");
  double top = 0.0;
  for (int k = 0; k < g.interior_count; ++k) {
    const int id = g.interior_ids[static_cast<size_t>(k)];
    if (u0[id] < 0.0) throw input_error("initial data must be nonnegative");
    top = std::max(top, u0[id]);
  }
  if (top == 0.0) throw input_error("initial data vanishes on the whole interior");
}

// Division by the sup leaves the extremal node at exactly 1.
void normalize_sup(Field& f) {
  const double top = f.sup_norm();
  for (double& v : f.values) v /= top;
}

// Max |F_h + coeff * low| over the interior band. The band keeps clear of the
// cut-cell layer; on grids too coarse to have one it widens until nonempty.
double band_residual(const Grid& g, const Field& rhs, const Field& low, double coeff) {
  for (double band = 4.0; band >= -0.5; band -= 2.0) {
    double worst = -1.0;
    for (int k = 0; k < g.interior_count; ++k) {
      const int id = g.interior_ids[static_cast<size_t>(k)];
      if (g.node_dist[static_cast<size_t>(id)] < band * g.h) continue;
      worst = std::max(worst, std::abs(rhs[id] + coeff * low[id]));
    }
    if (worst >= 0.0) return worst;
  }
  return 0.0;
}

// Value at an off-lattice point: the exact node value when the point sits on
// a lattice slot, otherwise bilinear from the surrounding cell. Fails when a
// needed corner holds no node. Snapped boundary nodes contribute their stored
// values at their home lattice slots.
double sample_field(const Grid& g, const Field& f, double px, double py, bool* ok) {
  const double gx = (px - g.ox) / g.h;
  const double gy = g.domain.dimension == 2 ? (py - g.oy) / g.h : 0.0;
  const double rx = std::round(gx), ry = std::round(gy);
  *ok = true;
  if (std::abs(gx - rx) < 1e-9 && std::abs(gy - ry) < 1e-9) {
    const int id = g.node_at(static_cast<int>(rx), static_cast<int>(ry));
    if (id >= 0) return f[id];
    *ok = false;
    return 0.0;
  }
  const int ix = static_cast<int>(std::floor(gx));
  const int iy = static_cast<int>(std::floor(gy));
  const double fx = gx - ix, fy = gy - iy;
  double acc = 0.0;
  for (int dy = 0; dy <= (g.domain.dimension == 2 ? 1 : 0); ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      const int id = g.node_at(ix + dx, iy + dy);
      if (id < 0) {
        *ok = false;
        return 0.0;
      }
      const double wx = dx ? fx : 1.0 - fx;
      const double wy = g.domain.dimension == 2 ? (dy ? fy : 1.0 - fy) : 1.0;
      acc += wx * wy * f[id];
    }
  return acc;
}

FlowConfig segment_config(const OperatorKind& kind, double m, int frames, double span) {
  FlowConfig cfg;
  cfg.m = m;
  cfg.operator_kind = kind;
  cfg.frames = frames;
  cfg.t_end = span;
  cfg.schedule.dt_snap = span;  // start and end snapshots only
  return cfg;
}

}  // namespace

EigenResult solve_linear(const OperatorKind& kind, const Grid& grid, const Field& u0,
                         double tol_mu, double tol_profile, const EigenControls& ctl) {
  check_data(grid, u0);
  if (!(tol_mu > 0.0) || !(tol_profile > 0.0)) throw config_error("tolerances must be positive");
  const DiscreteOperator op = make_discrete_operator(kind, grid, make_stencil_set(grid, ctl.frames));

  EigenResult res;
  res.mode = EigenResult::Mode::Linear;
  res.m = 1.0;

  Field state = u0;
  double log_amp = std::log(state.sup_norm());
  normalize_sup(state);

  // For m = 1 the step size depends only on the operator, so every run on
  // this grid shares the same dt sequence.
  const double dt_nom = cfl_dt(segment_config(kind, 1.0, ctl.frames, 1.0), op, state);

  double t_total = 0.0;
  double prev_mu = 0.0;
  Field prev_profile;
  bool have_prev = false;
  bool converged = false;
  std::vector<double> mu_seq;
  std::int64_t seg_steps = ctl.initial_segment_steps;

  for (int it = 0; it < ctl.max_iterations; ++it) {
    const double span = static_cast<double>(seg_steps) * dt_nom;
    const FlowTrace tr = evolve(segment_config(kind, 1.0, ctl.frames, span), op, state);
    res.total_steps += tr.total_steps;
    Field u_end = tr.snapshots.back().u;
    const double norm = u_end.sup_norm();
    // A subnormal end norm means the segment decayed past the point where its
    // logarithm carries rate information, so it counts as collapse too.
    if (!(norm >= std::numeric_limits<double>::min()) || !u_end.finite())
      throw numeric_error("renormalized flow collapsed before converging", mu_seq);
    const double mu_hat = -std::log(norm) / span;
    mu_seq.push_back(mu_hat);
    log_amp += std::log(norm);
    t_total += span;
    normalize_sup(u_end);

    double delta = 0.0;
    if (have_prev)
      for (size_t i = 0; i < u_end.values.size(); ++i)
        delta = std::max(delta, std::abs(u_end.values[i] - prev_profile.values[i]));
    res.log.push_back({it, t_total, mu_hat, delta, std::exp(log_amp)});

    if (have_prev && std::abs(mu_hat - prev_mu) < tol_mu && delta < tol_profile) {
      res.mu = mu_hat;
      res.profile = u_end;
      converged = true;
      break;
    }
    prev_mu = mu_hat;
    prev_profile = u_end;
    state = std::move(u_end);
    have_prev = true;
    seg_steps = std::min(seg_steps * 2, static_cast<std::int64_t>(ctl.max_segment_steps));
    if (res.total_steps >= ctl.max_total_steps)
      throw numeric_error("eigen iteration exceeded its step budget", mu_seq);
  }
  if (!converged) throw numeric_error("eigen iteration did not converge", mu_seq);
  if (!(res.mu > 0.0)) throw numeric_error("fitted decay rate is not positive", mu_seq);

  res.gamma_star = std::exp(log_amp + res.mu * t_total);

  const Field rhs = apply_operator(op, res.profile);
  res.residual = band_residual(grid, rhs, res.profile, res.mu);
  res.residual_bound = 10.0 * (grid.h * grid.h + tol_mu) * res.mu;
  if (res.residual > res.residual_bound)
    throw numeric_error("eigenpair residual exceeds its consistency bound",
                        {res.residual, res.residual_bound});

  for (int k = 0; k < grid.interior_count; ++k)
    if (!(res.profile[grid.interior_ids[static_cast<size_t>(k)]] > 0.0))
      throw numeric_error("converged profile is not strictly positive on the interior", mu_seq);

  res.slopes = hopf_slope(res.profile);
  return res;
}

EigenResult solve_sublinear(const OperatorKind& kind, const Grid& grid, double m,
                            const Field& u0, double tol_profile, const EigenControls& ctl) {
  check_data(grid, u0);
  if (!(m > 1.0)) throw input_error("the sublinear mode requires m > 1");
  if (!(tol_profile > 0.0)) throw config_error("tolerance must be positive");
  const DiscreteOperator op = make_discrete_operator(kind, grid, make_stencil_set(grid, ctl.frames));

  EigenResult res;
  res.mode = EigenResult::Mode::Sublinear;
  res.m = m;
  res.mu = 1.0 / (m - 1.0);

  // Linear-bound survey of u0^m against the boundary distance.
  res.data_lower_ratio = std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid.interior_count; ++k) {
    const int id = grid.interior_ids[static_cast<size_t>(k)];
    const double r = std::pow(u0[id], m) / grid.node_dist[static_cast<size_t>(id)];
    res.data_lower_ratio = std::min(res.data_lower_ratio, r);
    res.data_upper_ratio = std::max(res.data_upper_ratio, r);
  }
  if (!(res.data_lower_ratio > 0.0))
    res.warnings.push_back(
        "initial data vanishes somewhere on the interior; the discrete flow cannot create "
        "support there, so the limit profile inherits those zeros");

  const double e = 1.0 / (m - 1.0);
  const double dt0 =
      cfl_dt(segment_config(kind, m, ctl.frames, 1.0), op, power_field(u0, m));
  double t_now = 0.0;
  double t_sample = static_cast<double>(ctl.first_sample_steps) * dt0;

  Field state = u0;
  Field z_prev;
  double sup_prev = 0.0;
  bool have_prev = false;
  bool converged = false;
  std::vector<double> diffs;

  for (int it = 0; it < ctl.max_iterations; ++it) {
    const FlowTrace tr =
        evolve(segment_config(kind, m, ctl.frames, t_sample - t_now), op, state);
    res.total_steps += tr.total_steps;
    state = tr.snapshots.back().u;
    t_now = t_sample;

    const double scale = std::pow(t_now, e);
    Field z = state;
    for (double& v : z.values) v *= scale;
    const double sup_u = state.sup_norm();
    const double sup_z = z.sup_norm();

    double delta = 0.0;
    if (have_prev)
      for (size_t i = 0; i < z.values.size(); ++i)
        delta = std::max(delta, std::abs(z.values[i] - z_prev.values[i]));
    const double rate =
        have_prev && sup_prev > 0.0 ? std::log(sup_u / sup_prev) / std::log(2.0) : 0.0;
    diffs.push_back(delta);
    res.log.push_back({it, t_now, rate, delta, sup_z});

    // During the initial ramp z is still proportional to t^{1/(m-1)} and the
    // doubling differences are as small as z itself, so a smallness test
    // alone would pass vacuously; the scale guard rules that regime out.
    if (have_prev && delta < tol_profile && delta <= 0.01 * sup_z) {
      res.profile = std::move(z);
      converged = true;
      break;
    }
    z_prev = std::move(z);
    sup_prev = sup_u;
    have_prev = true;
    t_sample *= 2.0;
    if (res.total_steps >= ctl.max_total_steps)
      throw numeric_error("sublinear iteration exceeded its step budget", diffs);
  }
  if (!converged) throw numeric_error("sublinear iteration did not converge", diffs);

  const Field rhs = apply_operator(op, power_field(res.profile, m));
  res.residual = band_residual(grid, rhs, res.profile, res.mu);
  res.residual_bound = 10.0 * (grid.h * grid.h + tol_profile) / (m - 1.0);
  if (res.residual > res.residual_bound)
    throw numeric_error("sublinear residual exceeds its consistency bound",
                        {res.residual, res.residual_bound});

  // The scheme never creates support, so positivity is asserted on the
  // initial support only; zeros elsewhere were already warned about.
  for (int k = 0; k < grid.interior_count; ++k) {
    const int id = grid.interior_ids[static_cast<size_t>(k)];
    if (u0[id] > 0.0 && !(res.profile[id] > 0.0))
      throw numeric_error("limit profile lost positivity on the initial support", diffs);
  }

  res.slopes = hopf_slope(power_field(res.profile, m));
  return res;
}

HopfSlopes hopf_slope(const Field& profile) {
  if (profile.grid == nullptr) throw input_error("profile has no grid attached");
  const Grid& g = *profile.grid;
  HopfSlopes out;
  out.min_slope = std::numeric_limits<double>::infinity();
  out.max_slope = -out.min_slope;
  for (int id = 0; id < g.total_nodes(); ++id) {
    if (g.node_class[static_cast<size_t>(id)] != NodeClass::Boundary) continue;
    const double x = g.node_x[static_cast<size_t>(id)];
    const double y = g.domain.dimension == 2 ? g.node_y[static_cast<size_t>(id)] : 0.0;
    double nx = 0.0, ny = 0.0;
    if (!g.domain.inward_normal(x, y, &nx, &ny)) {
      ++out.skipped;
      continue;
    }
    bool ok1 = false, ok2 = false;
    const double u1 = sample_field(g, profile, x + g.h * nx, y + g.h * ny, &ok1);
    const double u2 = sample_field(g, profile, x + 2.0 * g.h * nx, y + 2.0 * g.h * ny, &ok2);
    if (!ok1 || !ok2) {
      ++out.skipped;
      continue;
    }
    const double slope = (4.0 * u1 - u2 - 3.0 * profile[id]) / (2.0 * g.h);
    out.min_slope = std::min(out.min_slope, slope);
    out.max_slope = std::max(out.max_slope, slope);
    ++out.used;
  }
  if (out.used == 0) {
    out.min_slope = 0.0;
    out.max_slope = 0.0;
  }
  return out;
}

UniquenessReport uniqueness_probe(const OperatorKind& kind, const Grid& grid, double m,
                                  const Field& u0_a, const Field& u0_b, double tol,
                                  const EigenControls& ctl) {
  UniquenessReport rep;
  rep.tol = tol;
  if (m == 1.0) {
    rep.a = solve_linear(kind, grid, u0_a, 1e-5, 1e-4, ctl);
    rep.b = solve_linear(kind, grid, u0_b, 1e-5, 1e-4, ctl);
  } else {
    rep.a = solve_sublinear(kind, grid, m, u0_a, 1e-4, ctl);
    rep.b = solve_sublinear(kind, grid, m, u0_b, 1e-4, ctl);
  }
  for (size_t i = 0; i < rep.a.profile.values.size(); ++i)
    rep.profile_gap =
        std::max(rep.profile_gap, std::abs(rep.a.profile.values[i] - rep.b.profile.values[i]));
  return rep;
}

void write_eigen_result(const EigenResult& res, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  nlohmann::json man;
  man["mode"] = res.mode == EigenResult::Mode::Linear ? "linear" : "sublinear";
  man["m"] = res.m;
  man["mu"] = res.mu;
  if (res.mode == EigenResult::Mode::Linear) {
    man["gamma_star"] = res.gamma_star;
  } else {
    man["data_lower_ratio"] = res.data_lower_ratio;
    man["data_upper_ratio"] = res.data_upper_ratio;
  }
  man["residual"] = res.residual;
  man["residual_bound"] = res.residual_bound;
  man["total_steps"] = res.total_steps;
  man["slopes"] = {{"min", res.slopes.min_slope},
                   {"max", res.slopes.max_slope},
                   {"used", res.slopes.used},
                   {"skipped", res.slopes.skipped}};
  man["warnings"] = res.warnings;
  auto& logj = man["log"] = nlohmann::json::array();
  for (const auto& entry : res.log)
    logj.push_back({{"iteration", entry.iteration},
                    {"t", entry.t},
                    {"rate", entry.rate},
                    {"delta", entry.delta},
                    {"sup", entry.sup_state}});
  man["profile_csv"] = "profile.csv";
  if (res.profile.grid) man["grid"] = grid_metadata(*res.profile.grid);
  write_field_csv(res.profile, (fs::path(directory) / "profile.csv").string());
  write_text_file((fs::path(directory) / "manifest.json").string(), man.dump(2) + "\n");
}

}  // namespace pucci
