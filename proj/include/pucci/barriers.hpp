#pragma once

#include <array>
#include <vector>

#include "pucci/flow.hpp"
#include "pucci/grid.hpp"
#include "pucci/matrix_ops.hpp"

namespace pucci {

// Closed-form fields that bound the diffusion flows from one side. Each kind
// is an explicit sub- or supersolution of u_t = F_h(u^m) for every operator
// with the stated ellipticity bounds:
//
//   HeatKernelSub     g(x,t) = t^{-beta} exp(-alpha r^2 / t), r = |x - center|,
//                     alpha = 1/(4 lambda), beta = Lambda n / (2 lambda).
//                     Subsolution of the linear flow for every F >= M^-.
//   TruncatedHeatSub  h(x,t) = max(c0 (t+tau0)^{-beta} exp(-alpha r^2/(t+tau0)) - delta0, 0).
//                     Same exponents; compactly supported, so it is admissible
//                     under Dirichlet conditions while its support stays in
//                     the domain. The support radius grows exactly until
//                     (1/e)(c0/delta0)^{1/beta} - tau0.
//   BarenblattSub     pressure V(x,t) = t^{-a} (c - k r^2 / t^b)_+ with
//                     a = n(m-1)Lambda / (2 lambda + n(m-1)Lambda),
//                     b = 2 lambda / (2 lambda + n(m-1)Lambda),
//                     k = 1 / (2 (2 lambda + n(m-1)Lambda)).
//                     V solves V_t = M^-((m-1) V D^2 V) + M^-(DV DV^T)
//                     identically in its support, so the density
//                     U = ((m-1) V / m)^{1/(m-1)} is a subsolution of the
//                     porous-medium flow for every F >= M^-.
//   SeparableSuper    profile(x) * (K+t)^{-1/(m-1)} for m > 1, and
//                     profile(x) * exp(-mu t) for m = 1. With a profile from
//                     the extremal eigenproblem for M^+ this is a
//                     supersolution for every F <= M^+.
enum class BarrierKind { HeatKernelSub, TruncatedHeatSub, BarenblattSub, SeparableSuper };

struct BarrierSpec {
  BarrierKind kind = BarrierKind::HeatKernelSub;
  EllipticitySpec ellipticity;
  int dim = 1;
  double m = 1.0;
  std::array<double, 2> center{0.0, 0.0};

  // TruncatedHeatSub calibration constants.
  double c0 = 0.0;
  double tau0 = 0.0;
  double delta0 = 0.0;

  // BarenblattSub pressure height.
  double c = 1.0;

  // SeparableSuper data. K offsets the time factor for m > 1; mu is the decay
  // rate for m = 1.
  Field profile;
  double K = 1.0;
  double mu = 0.0;

  // Gaussian exponents shared by the two heat kinds.
  double gaussian_alpha() const { return 1.0 / (4.0 * ellipticity.lambda_low); }
  double gaussian_beta() const {
    return ellipticity.lambda_high * dim / (2.0 * ellipticity.lambda_low);
  }

  static BarrierSpec heat_kernel_sub(const EllipticitySpec& ell, int dim,
                                     std::array<double, 2> center = {0.0, 0.0});

  // Calibrated so that h(., 0) has support radius eta and height mass at the
  // center: eta^2 = 4 Lambda n tau0, c0 tau0^{-beta} exp(-alpha eta^2/tau0) =
  // delta0, and c0 tau0^{-beta} - delta0 = mass.
  static BarrierSpec truncated_heat_sub(const EllipticitySpec& ell, int dim, double mass,
                                        double eta, std::array<double, 2> center = {0.0, 0.0});

  static BarrierSpec barenblatt_sub(const EllipticitySpec& ell, int dim, double m,
                                    double c = 1.0, std::array<double, 2> center = {0.0, 0.0});

  static BarrierSpec separable_super(const Field& profile, double m, double K);

  // m = 1 variant: profile * exp(-mu t).
  static BarrierSpec separable_super_linear(const Field& profile, double mu);
};

// Barenblatt similarity exponents. All three satisfy exact multiplicative
// identities against denom = 2 lambda + n (m-1) Lambda:
//   alpha * denom = n (m-1) Lambda,  beta * denom = 2 lambda,
//   k * 2 * denom = 1.
struct BarenblattExponents {
  double alpha = 0.0;
  double beta = 0.0;
  double k = 0.0;
  double denom = 0.0;
};

BarenblattExponents barenblatt_exponents(const EllipticitySpec& ell, int dim, double m);

// Barrier evaluated on the grid at time t, on the density scale of the flow
// (for BarenblattSub this is U, not the pressure). Interior and boundary
// nodes carry the formula value, exterior nodes zero. Kinds with compact
// support require the support ball to fit inside the domain; the error names
// the escaping radius. HeatKernelSub and BarenblattSub require t > 0.
Field sample(const BarrierSpec& spec, const Grid& grid, double t);

// Pressure profile V of a BarenblattSub barrier.
Field sample_pressure(const BarrierSpec& spec, const Grid& grid, double t);

// Radius of the support ball at time t. Infinite for HeatKernelSub and
// SeparableSuper, zero when a truncated barrier has emptied.
double support_radius(const BarrierSpec& spec, double t);

// Last time at which a TruncatedHeatSub support is still growing:
// (1/e)(c0/delta0)^{1/beta} - tau0, which the calibration reduces to
// (e-1) tau0.
double support_growth_deadline(const BarrierSpec& spec);

enum class ResidualSign { Sub, Super };

struct TimeWindow {
  double t_begin = 0.5;
  double t_end = 1.0;
  int samples = 5;
};

// Discrete residual of the barrier against its own flow equation,
//   F_h(sample^m) - (analytic time derivative),
// scanned over the window. For BarenblattSub the residual is taken in the
// pressure form (m-1) V F_h(V) + lambda |DV|^2 - V_t, whose analytic value is
// identically zero and whose spatial part is exact on the quadratic pressure,
// so the discrete residual is rounding noise. Kinds with a free boundary are
// evaluated only at nodes a full stencil width inside the support.
//
// worst is the extreme on the violating side (minimum for Sub, maximum for
// Super); pass compares it against the tolerance, which defaults to the
// frozen consistency bound C h^2.
struct ResidualReport {
  ResidualSign sign = ResidualSign::Sub;
  double tolerance = 0.0;
  double worst = 0.0;
  double worst_abs = 0.0;
  double worst_time = 0.0;
  int worst_node = -1;
  std::vector<double> times;
  std::vector<double> extremes;
  std::int64_t evaluations = 0;
  bool pass = false;
};

// op selects the discrete operator; by default subsolutions are checked
// against PucciMinus and SeparableSuper against PucciPlus, each with the
// spec's ellipticity bounds, which are the tight cases. BarenblattSub ignores
// op: its pressure identity is specific to PucciMinus. tolerance <= 0 selects
// the frozen consistency bound.
ResidualReport residual_check(const BarrierSpec& spec, const Grid& grid,
                              const TimeWindow& window, ResidualSign sign,
                              const OperatorKind* op = nullptr, double tolerance = 0.0);

// Frozen consistency bound C h^2 used by residual_check: C covers the
// measured ratio |residual| / h^2 of the equal-bounds heat kernel across
// three grid levels in one and two dimensions, with headroom.
double consistency_tolerance(const Grid& grid);

// Evolves u0 under config and checks low <= u <= high nodewise at every
// snapshot, with slack 5e-3 relative to the upper barrier's sup norm at that
// time. A violated sandwich at the initial snapshot is an input error; later
// violations only clear pass, so the report can localize where a bound fails.
struct SandwichReport {
  double tolerance = 5e-3;
  bool pass = false;
  double worst_low = 0.0;
  double worst_high = 0.0;
  double worst_low_time = 0.0;
  double worst_high_time = 0.0;
  int worst_low_node = -1;
  int worst_high_node = -1;
  std::vector<double> times;
  std::vector<double> low_margin;
  std::vector<double> high_margin;
  FlowTrace trace;
};

SandwichReport sandwich_run(const BarrierSpec& low, const BarrierSpec& high,
                            const FlowConfig& config, const Field& u0);

}  // namespace pucci
