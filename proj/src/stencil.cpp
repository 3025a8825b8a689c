#include "pucci/stencil.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "pucci/errors.hpp"

namespace pucci {

namespace {

// Primitive integer directions of Chebyshev radius <= 3 in the first quarter
// turn, sorted by angle. Together with their quarter-turn partners these are
// all orthonormal frames the lattice can realize at this radius.
constexpr int kDirections[8][2] = {{1, 0}, {3, 1}, {2, 1}, {3, 2},
                                   {1, 1}, {2, 3}, {1, 2}, {1, 3}};

// Frames repeat with period pi/2; inputs are in [0, pi/2).
double frame_angle_distance(double a, double b) {
  const double d = std::abs(a - b);
  return std::min(d, M_PI / 2.0 - d);
}

// Index minimizing the frame distance to theta. Exact ties (the nominal angle
// sitting mid-way between two realizable ones, e.g. pi/8) go to the lower
// index; 1e-9 rad absorbs the rounding of the realizable angles.
int nearest_frame_index(double theta, const double* angles, int count) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) {
    const double d = frame_angle_distance(theta, angles[i]);
    if (d < best_d - 1e-9) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

struct KernelCtx {
  const Grid* g = nullptr;
  const DiscreteOperator* op = nullptr;
  double lam = 1.0, big = 1.0;
  double inv_h2 = 0.0;
  int dim = 1;
};

KernelCtx make_ctx(const DiscreteOperator& op) {
  KernelCtx c;
  c.g = op.grid;
  c.op = &op;
  c.lam = op.kind.spec.lambda_low;
  c.big = op.kind.spec.lambda_high;
  c.inv_h2 = 1.0 / (op.grid->h * op.grid->h);
  c.dim = op.grid->ny == 1 ? 1 : 2;
  return c;
}

// Axis second differences with cut-cell arms. Equal arms take the centered
// path so clean lattices see no extra rounding.
inline void axis_diffs(const KernelCtx& c, const double* u, int id, double& d1, double& d2) {
  const Grid& g = *c.g;
  const size_t base = 4 * static_cast<size_t>(id);
  const double u0 = u[id];
  {
    const double a = g.arm_len[base], b = g.arm_len[base + 1];
    const double up = u[g.arm_nbr[base]], um = u[g.arm_nbr[base + 1]];
    d1 = (a == g.h && b == g.h)
             ? (up - 2.0 * u0 + um) * c.inv_h2
             : 2.0 * (up / (a * (a + b)) - u0 / (a * b) + um / (b * (a + b)));
  }
  d2 = 0.0;
  if (c.dim == 2) {
    const double a = g.arm_len[base + 2], b = g.arm_len[base + 3];
    const double up = u[g.arm_nbr[base + 2]], um = u[g.arm_nbr[base + 3]];
    d2 = (a == g.h && b == g.h)
             ? (up - 2.0 * u0 + um) * c.inv_h2
             : 2.0 * (up / (a * (a + b)) - u0 / (a * b) + um / (b * (a + b)));
  }
}

inline double frame_value_minus(double d1, double d2, double lam, double big) {
  return (d1 > 0.0 ? lam : big) * d1 + (d2 > 0.0 ? lam : big) * d2;
}

inline double frame_value_plus(double d1, double d2, double lam, double big) {
  return (d1 > 0.0 ? big : lam) * d1 + (d2 > 0.0 ? big : lam) * d2;
}

// One interior node, one pure function; both sweep orders share it so the
// parallel and serial results are bitwise identical.
inline double node_value(const KernelCtx& c, const double* u, int k, int* sel) {
  const DiscreteOperator& op = *c.op;
  const Grid& g = *c.g;
  const int id = g.interior_ids[static_cast<size_t>(k)];
  double d1, d2;
  axis_diffs(c, u, id, d1, d2);

  if (op.kind.variant == OperatorKind::Variant::Laplacian) {
    if (sel) *sel = 0;
    return d1 + d2;
  }

  const double u0 = u[id];
  if (op.kind.variant == OperatorKind::Variant::BellmanInf) {
    double best = std::numeric_limits<double>::infinity();
    int best_frame = 0;
    for (const auto& pm : op.projected) {
      double v;
      int used = 0;
      bool on_axis = pm.frame == 0;
      size_t slot = 0;
      if (!on_axis) {
        slot = static_cast<size_t>(k) * static_cast<size_t>(op.wide_count) +
               static_cast<size_t>(pm.frame - 1);
        on_axis = !op.wide_usable[slot];
      }
      if (on_axis) {
        v = pm.aq1 * d1 + pm.aq2 * d2;
      } else {
        const int32_t* nb = &op.wide_nbr[slot * 4];
        const double inv = op.stencils.frames[static_cast<size_t>(pm.frame)].inv_len2;
        const double e1 = (u[nb[0]] + u[nb[1]] - 2.0 * u0) * inv;
        const double e2 = (u[nb[2]] + u[nb[3]] - 2.0 * u0) * inv;
        v = pm.q1 * e1 + pm.q2 * e2;
        used = pm.frame;
      }
      if (v < best) {
        best = v;
        best_frame = used;
      }
    }
    if (sel) *sel = best_frame;
    return best;
  }

  const bool take_min = op.kind.variant == OperatorKind::Variant::PucciMinus;
  double best = take_min ? frame_value_minus(d1, d2, c.lam, c.big)
                         : frame_value_plus(d1, d2, c.lam, c.big);
  int best_frame = 0;
  for (int f = 0; f < op.wide_count; ++f) {
    const size_t slot = static_cast<size_t>(k) * static_cast<size_t>(op.wide_count) +
                        static_cast<size_t>(f);
    if (!op.wide_usable[slot]) continue;
    const int32_t* nb = &op.wide_nbr[slot * 4];
    const double inv = op.stencils.frames[static_cast<size_t>(f) + 1].inv_len2;
    const double e1 = (u[nb[0]] + u[nb[1]] - 2.0 * u0) * inv;
    const double e2 = (u[nb[2]] + u[nb[3]] - 2.0 * u0) * inv;
    const double v = take_min ? frame_value_minus(e1, e2, c.lam, c.big)
                              : frame_value_plus(e1, e2, c.lam, c.big);
    if (take_min ? (v < best) : (v > best)) {
      best = v;
      best_frame = f + 1;
    }
  }
  if (sel) *sel = best_frame;
  return best;
}

void check_field(const DiscreteOperator& op, const Field& u) {
  if (u.grid != op.grid) throw input_error("field and operator live on different grids");
  if (u.size() != op.grid->total_nodes())
    throw input_error("field size does not match the grid");
}

}  // namespace

StencilSet make_stencil_set(const Grid& grid, int frame_count) {
  if (frame_count < 1) throw input_error("stencil frame count must be at least 1");
  StencilSet s;
  s.dim = grid.ny == 1 ? 1 : 2;
  s.requested_frames = frame_count;
  s.h = grid.h;
  const double h2 = grid.h * grid.h;
  if (s.dim == 1) {
    s.frames.push_back(Frame{1, 0, 0.0, 1.0 / h2});
    return s;
  }
  double angles[8];
  for (int i = 0; i < 8; ++i)
    angles[i] = std::atan2(static_cast<double>(kDirections[i][1]),
                           static_cast<double>(kDirections[i][0]));
  bool used[8] = {};
  for (int i = 0; i < frame_count; ++i) {
    const double theta = static_cast<double>(i) * M_PI / (2.0 * frame_count);
    const int j = nearest_frame_index(theta, angles, 8);
    if (used[j]) continue;
    used[j] = true;
    const int ax = kDirections[j][0], ay = kDirections[j][1];
    s.frames.push_back(
        Frame{ax, ay, angles[j], 1.0 / (static_cast<double>(ax * ax + ay * ay) * h2)});
  }
  return s;
}

double directional_second_difference(const Field& u, int node, int ox, int oy) {
  if (u.grid == nullptr) throw input_error("field is not attached to a grid");
  const Grid& g = *u.grid;
  if (node < 0 || node >= g.total_nodes() ||
      g.node_class[static_cast<size_t>(node)] != NodeClass::Interior)
    throw input_error("second differences are defined at interior nodes only");
  if (ox == 0 && oy == 0) throw input_error("offset must be nonzero");
  if (g.ny == 1 && oy != 0)
    throw input_error("offset leaves the lattice: the grid is one-dimensional");

  if (std::abs(ox) + std::abs(oy) == 1) {
    const size_t base = 4 * static_cast<size_t>(node);
    const size_t d = oy == 0 ? 0 : 2;
    const double a = g.arm_len[base + d], b = g.arm_len[base + d + 1];
    const double up = u[g.arm_nbr[base + d]], um = u[g.arm_nbr[base + d + 1]];
    const double u0 = u[node];
    if (a == g.h && b == g.h) return (up - 2.0 * u0 + um) / (g.h * g.h);
    return 2.0 * (up / (a * (a + b)) - u0 / (a * b) + um / (b * (a + b)));
  }

  const auto c = g.lattice_coords(node);
  const int pid = g.node_at(c[0] + ox, c[1] + oy);
  const int mid = g.node_at(c[0] - ox, c[1] - oy);
  if (pid < 0 || mid < 0) throw input_error("offset leaves the lattice or exits the domain");
  const double len2 =
      (static_cast<double>(ox) * ox + static_cast<double>(oy) * oy) * g.h * g.h;
  return (u[pid] - 2.0 * u[node] + u[mid]) / len2;
}

DiscreteOperator make_discrete_operator(const OperatorKind& kind, const Grid& grid,
                                        const StencilSet& stencils) {
  const int dim = grid.ny == 1 ? 1 : 2;
  if (stencils.dim != dim) throw input_error("stencil set was built for a different dimension");
  if (stencils.h != grid.h) throw input_error("stencil set was built for a different spacing");
  if (stencils.frames.empty() || stencils.frames[0].ax != 1 || stencils.frames[0].ay != 0)
    throw input_error("stencil set must start with the axis frame");

  DiscreteOperator op;
  op.kind = kind;
  op.stencils = stencils;
  op.grid = &grid;
  op.wide_count = static_cast<int>(stencils.frames.size()) - 1;

  const int ni = grid.interior_count;
  if (op.wide_count > 0) {
    op.wide_nbr.assign(static_cast<size_t>(ni) * static_cast<size_t>(op.wide_count) * 4, -1);
    op.wide_usable.assign(static_cast<size_t>(ni) * static_cast<size_t>(op.wide_count), 0);
    for (int k = 0; k < ni; ++k) {
      const int id = grid.interior_ids[static_cast<size_t>(k)];
      const auto c = grid.lattice_coords(id);
      for (int f = 0; f < op.wide_count; ++f) {
        const Frame& fr = stencils.frames[static_cast<size_t>(f) + 1];
        const int ex[4] = {c[0] + fr.ax, c[0] - fr.ax, c[0] + fr.bx(), c[0] - fr.bx()};
        const int ey[4] = {c[1] + fr.ay, c[1] - fr.ay, c[1] + fr.by(), c[1] - fr.by()};
        const size_t slot =
            static_cast<size_t>(k) * static_cast<size_t>(op.wide_count) + static_cast<size_t>(f);
        bool ok = true;
        for (int e = 0; e < 4; ++e) {
          const int nid = grid.node_at(ex[e], ey[e]);
          op.wide_nbr[slot * 4 + static_cast<size_t>(e)] = nid;
          if (nid < 0) {
            ok = false;
            continue;
          }
          // Snapped boundary values sit off their lattice point; only nodes
          // whose stored position equals the lattice position can serve a
          // wide frame. Interior and unsnapped boundary nodes qualify.
          if (grid.node_x[static_cast<size_t>(nid)] != grid.lattice_x(ex[e]) ||
              grid.node_y[static_cast<size_t>(nid)] != grid.lattice_y(ey[e]))
            ok = false;
        }
        op.wide_usable[slot] = ok ? 1 : 0;
      }
    }
  }

  if (kind.variant == OperatorKind::Variant::BellmanInf) {
    op.projected.reserve(kind.bellman.size());
    for (const SymMatrix& A : kind.bellman) {
      if (A.dim() != dim)
        throw input_error("control matrix dimension does not match the grid");
      DiscreteOperator::ProjectedMatrix pm;
      if (dim == 1) {
        pm.frame = 0;
        pm.q1 = pm.aq1 = A(0, 0);
      } else {
        // Eigenframe angle of the 2x2 matrix, folded into [0, pi/2).
        double theta = 0.5 * std::atan2(2.0 * A(0, 1), A(0, 0) - A(1, 1));
        if (theta < 0.0) theta += M_PI / 2.0;
        if (theta >= M_PI / 2.0) theta -= M_PI / 2.0;
        std::vector<double> fr_angles(op.stencils.frames.size());
        for (size_t i = 0; i < fr_angles.size(); ++i) fr_angles[i] = op.stencils.frames[i].angle;
        pm.frame = nearest_frame_index(theta, fr_angles.data(),
                                       static_cast<int>(fr_angles.size()));
        const Frame& fr = op.stencils.frames[static_cast<size_t>(pm.frame)];
        const double len2 = static_cast<double>(fr.ax * fr.ax + fr.ay * fr.ay);
        const double f1x = fr.ax, f1y = fr.ay, f2x = fr.bx(), f2y = fr.by();
        pm.q1 = (f1x * f1x * A(0, 0) + 2.0 * f1x * f1y * A(0, 1) + f1y * f1y * A(1, 1)) / len2;
        pm.q2 = (f2x * f2x * A(0, 0) + 2.0 * f2x * f2y * A(0, 1) + f2y * f2y * A(1, 1)) / len2;
        pm.aq1 = A(0, 0);
        pm.aq2 = A(1, 1);
      }
      op.projected.push_back(pm);
    }
  }
  return op;
}

DiscreteOperator make_discrete_operator(const OperatorKind& kind, const Grid& grid) {
  return make_discrete_operator(kind, grid, make_stencil_set(grid, 8));
}

void apply_operator_into(const DiscreteOperator& op, const Field& u, Field& out,
                         std::vector<int>* selected_frame) {
  check_field(op, u);
  if (out.grid != op.grid) out = Field(*op.grid, 0.0);
  const Grid& g = *op.grid;
  if (selected_frame) selected_frame->assign(static_cast<size_t>(g.total_nodes()), -1);
  const KernelCtx c = make_ctx(op);
  const double* uv = u.values.data();
  double* ov = out.values.data();
  int* sv = selected_frame ? selected_frame->data() : nullptr;
  const int ni = g.interior_count;
#pragma omp parallel for schedule(static)
  for (int k = 0; k < ni; ++k) {
    const int id = g.interior_ids[static_cast<size_t>(k)];
    int s = 0;
    ov[id] = node_value(c, uv, k, sv ? &s : nullptr);
    if (sv) sv[id] = s;
  }
  for (int id = 0; id < g.total_nodes(); ++id)
    if (g.node_class[static_cast<size_t>(id)] != NodeClass::Interior) ov[id] = 0.0;
}

void apply_operator_serial_into(const DiscreteOperator& op, const Field& u, Field& out,
                                std::vector<int>* selected_frame) {
  check_field(op, u);
  if (out.grid != op.grid) out = Field(*op.grid, 0.0);
  const Grid& g = *op.grid;
  if (selected_frame) selected_frame->assign(static_cast<size_t>(g.total_nodes()), -1);
  const KernelCtx c = make_ctx(op);
  const double* uv = u.values.data();
  double* ov = out.values.data();
  int* sv = selected_frame ? selected_frame->data() : nullptr;
  const int ni = g.interior_count;
  for (int k = 0; k < ni; ++k) {
    const int id = g.interior_ids[static_cast<size_t>(k)];
    int s = 0;
    ov[id] = node_value(c, uv, k, sv ? &s : nullptr);
    if (sv) sv[id] = s;
  }
  for (int id = 0; id < g.total_nodes(); ++id)
    if (g.node_class[static_cast<size_t>(id)] != NodeClass::Interior) ov[id] = 0.0;
}

Field apply_operator(const DiscreteOperator& op, const Field& u,
                     std::vector<int>* selected_frame) {
  Field out(*op.grid, 0.0);
  apply_operator_into(op, u, out, selected_frame);
  return out;
}

Field apply_operator_serial(const DiscreteOperator& op, const Field& u,
                            std::vector<int>* selected_frame) {
  Field out(*op.grid, 0.0);
  apply_operator_serial_into(op, u, out, selected_frame);
  return out;
}

double max_center_weight(const DiscreteOperator& op) {
  const Grid& g = *op.grid;
  const int dim = g.ny == 1 ? 1 : 2;
  const double coeff = op.kind.variant == OperatorKind::Variant::Laplacian
                           ? 1.0
                           : op.kind.spec.lambda_high;
  double worst = 0.0;
  for (int k = 0; k < g.interior_count; ++k) {
    const int id = g.interior_ids[static_cast<size_t>(k)];
    const size_t base = 4 * static_cast<size_t>(id);
    double w = 2.0 / (g.arm_len[base] * g.arm_len[base + 1]);
    if (dim == 2) w += 2.0 / (g.arm_len[base + 2] * g.arm_len[base + 3]);
    for (int f = 0; f < op.wide_count; ++f) {
      const size_t slot =
          static_cast<size_t>(k) * static_cast<size_t>(op.wide_count) + static_cast<size_t>(f);
      if (op.wide_usable[slot])
        w = std::max(w, 4.0 * op.stencils.frames[static_cast<size_t>(f) + 1].inv_len2);
    }
    worst = std::max(worst, coeff * w);
  }
  return worst;
}

MonotonicityReport monotonicity_audit(const DiscreteOperator& op, int trials,
                                      std::uint64_t seed, double eps) {
  MonotonicityReport rep;
  rep.trials = trials;
  rep.eps = eps;
  const Grid& g = *op.grid;
  if (g.interior_count == 0) return rep;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const KernelCtx c = make_ctx(op);
  Field u(g);
  std::vector<int> footprint;
  const int dirs = g.ny == 1 ? 2 : 4;
  for (int t = 0; t < trials; ++t) {
    for (auto& v : u.values) v = unif(rng);
    const int k = static_cast<int>(rng() % static_cast<std::uint64_t>(g.interior_count));
    const int id = g.interior_ids[static_cast<size_t>(k)];
    footprint.clear();
    const size_t base = 4 * static_cast<size_t>(id);
    for (int d = 0; d < dirs; ++d) footprint.push_back(g.arm_nbr[base + static_cast<size_t>(d)]);
    for (int f = 0; f < op.wide_count; ++f) {
      const size_t slot =
          static_cast<size_t>(k) * static_cast<size_t>(op.wide_count) + static_cast<size_t>(f);
      if (!op.wide_usable[slot]) continue;
      for (int e = 0; e < 4; ++e)
        footprint.push_back(op.wide_nbr[slot * 4 + static_cast<size_t>(e)]);
    }
    std::sort(footprint.begin(), footprint.end());
    footprint.erase(std::unique(footprint.begin(), footprint.end()), footprint.end());
    const int nbr = footprint[static_cast<size_t>(rng() % footprint.size())];
    const double before = node_value(c, u.values.data(), k, nullptr);
    u[nbr] += eps;
    const double after = node_value(c, u.values.data(), k, nullptr);
    u[nbr] -= eps;
    if (after < before - 1e-12 * (1.0 + std::abs(before)))
      rep.violations.push_back({id, nbr, before, after});
  }
  return rep;
}

}  // namespace pucci
