#include "pucci/barriers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pucci/errors.hpp"
#include "pucci/stencil.hpp"

namespace pucci {

namespace {

// Residual nodes near a free boundary keep this many cells between themselves
// and the support edge, which exceeds the widest stencil reach (Chebyshev
// radius 3, Euclidean sqrt(13) cells).
constexpr double kMarginCells = 4.0;

// Consistency constant of the discrete operators on smooth barrier profiles:
// |F_h - F| <= kConsistency * h^2 across the calibration family, equal-bounds
// heat kernels over three grid levels in one and two dimensions on windows
// with t >= 1/4. The measured worst ratio is 2.0 in one dimension and 29.4 in
// two (wide frames reach sqrt(13) cells, which inflates the constant); 45
// keeps a factor 1.5 of headroom.
constexpr double kConsistency = 45.0;

int grid_dim(const Grid& g) { return g.ny == 1 ? 1 : 2; }

double radius2(const Grid& g, int node, const std::array<double, 2>& center) {
  const double dx = g.node_x[static_cast<size_t>(node)] - center[0];
  const double dy =
      g.ny == 1 ? 0.0 : g.node_y[static_cast<size_t>(node)] - center[1];
  return dx * dx + dy * dy;
}

void require_valid_ellipticity(const EllipticitySpec& ell) {
  if (!ell.valid()) {
    throw config_error("ellipticity bounds must satisfy 0 < lambda <= Lambda");
  }
}

void require_dim(int dim) {
  if (dim != 1 && dim != 2) {
    throw config_error("barriers are defined in one or two dimensions");
  }
}

void require_grid_match(const BarrierSpec& spec, const Grid& grid) {
  if (spec.kind == BarrierKind::SeparableSuper) {
    if (spec.profile.grid != &grid) {
      throw input_error("separable barrier profile lives on a different grid");
    }
    return;
  }
  if (spec.dim != grid_dim(grid)) {
    std::ostringstream msg;
    msg << "barrier is " << spec.dim << "-dimensional but the grid is "
        << grid_dim(grid) << "-dimensional";
    throw input_error(msg.str());
  }
}

void require_time(const BarrierSpec& spec, double t) {
  if (!std::isfinite(t)) throw input_error("barrier time must be finite");
  const bool positive_only = spec.kind == BarrierKind::HeatKernelSub ||
                             spec.kind == BarrierKind::BarenblattSub;
  if (positive_only && t <= 0.0) {
    std::ostringstream msg;
    msg << "this barrier kind is defined for positive times; got t = " << t;
    throw input_error(msg.str());
  }
  if (!positive_only && t < 0.0) {
    std::ostringstream msg;
    msg << "barrier time must be nonnegative; got t = " << t;
    throw input_error(msg.str());
  }
}

// Compact supports must fit inside the domain for the comparison arguments to
// apply; a barrier whose ball pokes out is a usage error worth naming.
void require_support_inside(const BarrierSpec& spec, const Grid& grid, double t) {
  const double radius = support_radius(spec, t);
  if (!std::isfinite(radius)) return;
  const double available =
      grid.domain.signed_boundary_distance(spec.center[0], spec.center[1]);
  if (radius > available * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "barrier support escapes the domain at t = " << t << ": radius "
        << radius << " exceeds the distance " << available
        << " from the center to the boundary";
    throw input_error(msg.str());
  }
}

double separable_factor(const BarrierSpec& spec, double t) {
  if (spec.m > 1.0) return std::pow(spec.K + t, -1.0 / (spec.m - 1.0));
  return std::exp(-spec.mu * t);
}

double separable_factor_dt(const BarrierSpec& spec, double t) {
  if (spec.m > 1.0) {
    const double e = 1.0 / (spec.m - 1.0);
    return -e * std::pow(spec.K + t, -e - 1.0);
  }
  return -spec.mu * std::exp(-spec.mu * t);
}

OperatorKind default_operator(const BarrierSpec& spec, ResidualSign sign) {
  if (sign == ResidualSign::Sub) return OperatorKind::make_pucci_minus(spec.ellipticity);
  return OperatorKind::make_pucci_plus(spec.ellipticity);
}

}  // namespace

BarrierSpec BarrierSpec::heat_kernel_sub(const EllipticitySpec& ell, int dim,
                                         std::array<double, 2> center) {
  require_valid_ellipticity(ell);
  require_dim(dim);
  BarrierSpec spec;
  spec.kind = BarrierKind::HeatKernelSub;
  spec.ellipticity = ell;
  spec.dim = dim;
  spec.m = 1.0;
  spec.center = center;
  if (dim == 1) spec.center[1] = 0.0;
  return spec;
}

BarrierSpec BarrierSpec::truncated_heat_sub(const EllipticitySpec& ell, int dim, double mass,
                                            double eta, std::array<double, 2> center) {
  require_valid_ellipticity(ell);
  require_dim(dim);
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw config_error("truncated barrier mass must be positive");
  }
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw config_error("truncated barrier radius eta must be positive");
  }
  BarrierSpec spec;
  spec.kind = BarrierKind::TruncatedHeatSub;
  spec.ellipticity = ell;
  spec.dim = dim;
  spec.m = 1.0;
  spec.center = center;
  if (dim == 1) spec.center[1] = 0.0;
  spec.tau0 = eta * eta / (4.0 * ell.lambda_high * dim);
  // alpha eta^2 / tau0 reduces to Lambda n / lambda, twice the Gaussian beta,
  // so the initial support radius is exactly eta.
  const double drop = std::exp(-ell.lambda_high * dim / ell.lambda_low);
  spec.c0 = mass * std::pow(spec.tau0, spec.gaussian_beta()) / (1.0 - drop);
  spec.delta0 = spec.c0 * std::pow(spec.tau0, -spec.gaussian_beta()) * drop;
  return spec;
}

BarrierSpec BarrierSpec::barenblatt_sub(const EllipticitySpec& ell, int dim, double m,
                                        double c, std::array<double, 2> center) {
  require_valid_ellipticity(ell);
  require_dim(dim);
  if (!(m > 1.0) || !std::isfinite(m)) {
    throw config_error("the Barenblatt barrier needs a diffusion power m > 1");
  }
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw config_error("the Barenblatt pressure height must be positive");
  }
  BarrierSpec spec;
  spec.kind = BarrierKind::BarenblattSub;
  spec.ellipticity = ell;
  spec.dim = dim;
  spec.m = m;
  spec.c = c;
  spec.center = center;
  if (dim == 1) spec.center[1] = 0.0;
  return spec;
}

BarrierSpec BarrierSpec::separable_super(const Field& profile, double m, double K) {
  if (profile.grid == nullptr) throw input_error("separable barrier needs a profile field");
  if (!profile.finite()) throw input_error("separable barrier profile is not finite");
  if (!(m > 1.0) || !std::isfinite(m)) {
    throw config_error("separable_super is the m > 1 form; use separable_super_linear for m = 1");
  }
  if (!(K > 0.0) || !std::isfinite(K)) {
    throw config_error("separable barrier time offset K must be positive");
  }
  BarrierSpec spec;
  spec.kind = BarrierKind::SeparableSuper;
  spec.dim = grid_dim(*profile.grid);
  spec.m = m;
  spec.profile = profile;
  spec.K = K;
  return spec;
}

BarrierSpec BarrierSpec::separable_super_linear(const Field& profile, double mu) {
  if (profile.grid == nullptr) throw input_error("separable barrier needs a profile field");
  if (!profile.finite()) throw input_error("separable barrier profile is not finite");
  if (!(mu >= 0.0) || !std::isfinite(mu)) {
    throw config_error("separable barrier decay rate must be nonnegative");
  }
  BarrierSpec spec;
  spec.kind = BarrierKind::SeparableSuper;
  spec.dim = grid_dim(*profile.grid);
  spec.m = 1.0;
  spec.profile = profile;
  spec.mu = mu;
  return spec;
}

BarenblattExponents barenblatt_exponents(const EllipticitySpec& ell, int dim, double m) {
  require_valid_ellipticity(ell);
  require_dim(dim);
  if (!(m > 1.0)) throw config_error("Barenblatt exponents need m > 1");
  BarenblattExponents e;
  const double spread = dim * (m - 1.0) * ell.lambda_high;
  e.denom = 2.0 * ell.lambda_low + spread;
  e.alpha = spread / e.denom;
  e.beta = 2.0 * ell.lambda_low / e.denom;
  e.k = 1.0 / (2.0 * e.denom);
  // The similarity exponents satisfy alpha + beta = 1 and the multiplicative
  // identities against denom; a violation beyond rounding means the inputs
  // are broken.
  const double ulp = 4.0 * std::numeric_limits<double>::epsilon();
  if (std::abs(e.alpha * e.denom - spread) > ulp * spread + ulp ||
      std::abs(e.beta * e.denom - 2.0 * ell.lambda_low) > ulp * e.denom ||
      std::abs(e.k * 2.0 * e.denom - 1.0) > ulp) {
    throw numeric_error("Barenblatt exponent identities failed",
                        {e.alpha, e.beta, e.k, e.denom});
  }
  return e;
}

Field sample(const BarrierSpec& spec, const Grid& grid, double t) {
  require_grid_match(spec, grid);
  require_time(spec, t);
  require_support_inside(spec, grid, t);
  Field out(grid, 0.0);
  const int total = grid.total_nodes();
  switch (spec.kind) {
    case BarrierKind::HeatKernelSub: {
      const double alpha = spec.gaussian_alpha();
      const double beta = spec.gaussian_beta();
      const double amp = std::pow(t, -beta);
      for (int id = 0; id < total; ++id) {
        if (grid.node_class[static_cast<size_t>(id)] == NodeClass::Exterior) continue;
        out[id] = amp * std::exp(-alpha * radius2(grid, id, spec.center) / t);
      }
      return out;
    }
    case BarrierKind::TruncatedHeatSub: {
      const double alpha = spec.gaussian_alpha();
      const double beta = spec.gaussian_beta();
      const double s = t + spec.tau0;
      const double amp = spec.c0 * std::pow(s, -beta);
      for (int id = 0; id < total; ++id) {
        if (grid.node_class[static_cast<size_t>(id)] == NodeClass::Exterior) continue;
        const double v = amp * std::exp(-alpha * radius2(grid, id, spec.center) / s) - spec.delta0;
        out[id] = std::max(v, 0.0);
      }
      return out;
    }
    case BarrierKind::BarenblattSub: {
      const Field pressure = sample_pressure(spec, grid, t);
      const double scale = (spec.m - 1.0) / spec.m;
      const double expo = 1.0 / (spec.m - 1.0);
      for (int id = 0; id < total; ++id) {
        out[id] = std::pow(scale * pressure[id], expo);
      }
      return out;
    }
    case BarrierKind::SeparableSuper: {
      const double factor = separable_factor(spec, t);
      for (int id = 0; id < total; ++id) {
        if (grid.node_class[static_cast<size_t>(id)] == NodeClass::Exterior) continue;
        out[id] = spec.profile[id] * factor;
      }
      return out;
    }
  }
  throw config_error("unknown barrier kind");
}

Field sample_pressure(const BarrierSpec& spec, const Grid& grid, double t) {
  if (spec.kind != BarrierKind::BarenblattSub) {
    throw config_error("only the Barenblatt barrier has a pressure profile");
  }
  require_grid_match(spec, grid);
  require_time(spec, t);
  require_support_inside(spec, grid, t);
  const BarenblattExponents e = barenblatt_exponents(spec.ellipticity, spec.dim, spec.m);
  const double amp = std::pow(t, -e.alpha);
  const double kt = e.k * std::pow(t, -e.beta);
  Field out(grid, 0.0);
  const int total = grid.total_nodes();
  for (int id = 0; id < total; ++id) {
    if (grid.node_class[static_cast<size_t>(id)] == NodeClass::Exterior) continue;
    const double v = spec.c - kt * radius2(grid, id, spec.center);
    out[id] = v > 0.0 ? amp * v : 0.0;
  }
  return out;
}

double support_radius(const BarrierSpec& spec, double t) {
  require_time(spec, t);
  switch (spec.kind) {
    case BarrierKind::HeatKernelSub:
    case BarrierKind::SeparableSuper:
      return std::numeric_limits<double>::infinity();
    case BarrierKind::TruncatedHeatSub: {
      const double s = t + spec.tau0;
      const double arg = std::log(spec.c0 / (spec.delta0 * std::pow(s, spec.gaussian_beta())));
      if (arg <= 0.0) return 0.0;
      return std::sqrt(s * arg / spec.gaussian_alpha());
    }
    case BarrierKind::BarenblattSub: {
      const BarenblattExponents e = barenblatt_exponents(spec.ellipticity, spec.dim, spec.m);
      return std::sqrt(spec.c / e.k * std::pow(t, e.beta));
    }
  }
  throw config_error("unknown barrier kind");
}

double support_growth_deadline(const BarrierSpec& spec) {
  if (spec.kind != BarrierKind::TruncatedHeatSub) {
    throw config_error("only the truncated barrier has a support growth deadline");
  }
  const double ratio = std::pow(spec.c0 / spec.delta0, 1.0 / spec.gaussian_beta());
  return ratio / std::exp(1.0) - spec.tau0;
}

ResidualReport residual_check(const BarrierSpec& spec, const Grid& grid,
                              const TimeWindow& window, ResidualSign sign,
                              const OperatorKind* op, double tolerance) {
  require_grid_match(spec, grid);
  if (!std::isfinite(window.t_begin) || !std::isfinite(window.t_end) ||
      window.t_begin > window.t_end) {
    throw config_error("residual window must satisfy t_begin <= t_end");
  }
  if (window.samples < 1) throw config_error("residual window needs at least one sample");

  ResidualReport report;
  report.sign = sign;
  report.tolerance = tolerance > 0.0 ? tolerance : consistency_tolerance(grid);

  const bool barenblatt = spec.kind == BarrierKind::BarenblattSub;
  OperatorKind kind = barenblatt ? OperatorKind::make_pucci_minus(spec.ellipticity)
                                 : (op != nullptr ? *op : default_operator(spec, sign));
  const DiscreteOperator discrete = make_discrete_operator(kind, grid);

  const bool free_boundary = barenblatt || spec.kind == BarrierKind::TruncatedHeatSub;
  const double margin = kMarginCells * grid.h;
  const bool super = sign == ResidualSign::Super;

  const double lambda = spec.ellipticity.lambda_low;
  BarenblattExponents be;
  if (barenblatt) be = barenblatt_exponents(spec.ellipticity, spec.dim, spec.m);

  double worst = super ? -std::numeric_limits<double>::infinity()
                       : std::numeric_limits<double>::infinity();
  for (int k = 0; k < window.samples; ++k) {
    const double t = window.samples == 1
                         ? window.t_begin
                         : window.t_begin +
                               (window.t_end - window.t_begin) * k / (window.samples - 1);
    const Field u = sample(spec, grid, t);
    Field w;
    if (barenblatt) {
      w = sample_pressure(spec, grid, t);
    } else if (spec.m > 1.0) {
      w = power_field(u, spec.m);
    } else {
      w = u;
    }
    const Field fh = apply_operator(discrete, w);

    const double reach = free_boundary ? support_radius(spec, t) - margin : 0.0;
    const double alpha = spec.gaussian_alpha();
    const double beta = spec.gaussian_beta();
    const double shifted = t + spec.tau0;
    const double factor_dt = spec.kind == BarrierKind::SeparableSuper
                                 ? separable_factor_dt(spec, t)
                                 : 0.0;

    double extreme = super ? -std::numeric_limits<double>::infinity()
                           : std::numeric_limits<double>::infinity();
    for (int id : grid.interior_ids) {
      const double r2 = radius2(grid, id, spec.center);
      if (free_boundary && (reach <= 0.0 || r2 > reach * reach)) continue;
      double residual = 0.0;
      switch (spec.kind) {
        case BarrierKind::HeatKernelSub: {
          const double dudt = u[id] * (alpha * r2 / (t * t) - beta / t);
          residual = fh[id] - dudt;
          break;
        }
        case BarrierKind::TruncatedHeatSub: {
          // Inside the support u = c0 g(., t+tau0) - delta0, so u + delta0
          // carries the Gaussian time derivative.
          const double dudt =
              (u[id] + spec.delta0) * (alpha * r2 / (shifted * shifted) - beta / shifted);
          residual = fh[id] - dudt;
          break;
        }
        case BarrierKind::BarenblattSub: {
          const double grad2 = 4.0 * be.k * be.k * r2 / (t * t);
          const double vt = -(be.alpha / t) * w[id] + be.beta * be.k * r2 / (t * t);
          residual = (spec.m - 1.0) * w[id] * fh[id] + lambda * grad2 - vt;
          break;
        }
        case BarrierKind::SeparableSuper: {
          residual = fh[id] - spec.profile[id] * factor_dt;
          break;
        }
      }
      extreme = super ? std::max(extreme, residual) : std::min(extreme, residual);
      const bool record = super ? residual > worst : residual < worst;
      if (record) {
        worst = residual;
        report.worst_node = id;
        report.worst_time = t;
      }
      report.worst_abs = std::max(report.worst_abs, std::abs(residual));
      ++report.evaluations;
    }
    report.times.push_back(t);
    report.extremes.push_back(extreme);
  }

  if (report.evaluations == 0) {
    throw input_error(
        "no residual nodes: the barrier support never clears the stencil margin");
  }
  report.worst = worst;
  report.pass = super ? worst <= report.tolerance : worst >= -report.tolerance;
  return report;
}

double consistency_tolerance(const Grid& grid) { return kConsistency * grid.h * grid.h; }

SandwichReport sandwich_run(const BarrierSpec& low, const BarrierSpec& high,
                            const FlowConfig& config, const Field& u0) {
  if (u0.grid == nullptr) throw input_error("sandwich_run needs initial data on a grid");
  const Grid& grid = *u0.grid;
  require_grid_match(low, grid);
  require_grid_match(high, grid);
  if (low.m != config.m || high.m != config.m) {
    throw config_error("barrier diffusion powers must match the flow");
  }

  SandwichReport report;
  report.trace = evolve(config, u0);

  const auto defined_at = [](const BarrierSpec& spec, double t) {
    const bool positive_only = spec.kind == BarrierKind::HeatKernelSub ||
                               spec.kind == BarrierKind::BarenblattSub;
    return !positive_only || t > 0.0;
  };

  bool first_checked = true;
  for (size_t k = 0; k < report.trace.snapshots.size(); ++k) {
    const Snapshot& snap = report.trace.snapshots[k];
    const Field& u = snap.u;
    double low_margin = 0.0;
    double high_margin = 0.0;
    int low_node = -1;
    int high_node = -1;

    double scale = 0.0;
    Field high_field;
    if (defined_at(high, snap.t)) {
      high_field = sample(high, grid, snap.t);
      scale = high_field.sup_norm();
    }
    if (scale == 0.0) scale = std::max(u.sup_norm(), 1.0);

    if (defined_at(low, snap.t)) {
      const Field low_field = sample(low, grid, snap.t);
      for (int id = 0; id < grid.total_nodes(); ++id) {
        if (grid.node_class[static_cast<size_t>(id)] == NodeClass::Exterior) continue;
        const double gap = (low_field[id] - u[id]) / scale;
        if (gap > low_margin) {
          low_margin = gap;
          low_node = id;
        }
      }
    }
    if (high_field.grid != nullptr) {
      for (int id = 0; id < grid.total_nodes(); ++id) {
        if (grid.node_class[static_cast<size_t>(id)] == NodeClass::Exterior) continue;
        const double gap = (u[id] - high_field[id]) / scale;
        if (gap > high_margin) {
          high_margin = gap;
          high_node = id;
        }
      }
    }

    if (first_checked && (low_margin > report.tolerance || high_margin > report.tolerance)) {
      std::ostringstream msg;
      msg << "initial data escapes the sandwich at t = " << snap.t
          << ": low violation " << low_margin << ", high violation " << high_margin
          << " against tolerance " << report.tolerance;
      throw input_error(msg.str());
    }
    first_checked = false;

    report.times.push_back(snap.t);
    report.low_margin.push_back(low_margin);
    report.high_margin.push_back(high_margin);
    if (low_margin > report.worst_low) {
      report.worst_low = low_margin;
      report.worst_low_time = snap.t;
      report.worst_low_node = low_node;
    }
    if (high_margin > report.worst_high) {
      report.worst_high = high_margin;
      report.worst_high_time = snap.t;
      report.worst_high_node = high_node;
    }
  }

  report.pass = report.worst_low <= report.tolerance && report.worst_high <= report.tolerance;
  return report;
}

}  // namespace pucci
