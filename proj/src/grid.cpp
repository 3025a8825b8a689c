#include "pucci/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pucci/errors.hpp"

namespace pucci {

namespace {

// Crossing of the segment from an inside point toward an outside lattice point
// with the boundary, by bisection on the signed distance. Returns the parameter
// t in (0, 1]: crossing = inside + t * (outside - inside).
double boundary_crossing(const Domain& dom, double ix_, double iy_, double ox_, double oy_) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double sd =
        dom.signed_boundary_distance(ix_ + mid * (ox_ - ix_), iy_ + mid * (oy_ - iy_));
    if (sd > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Grid build_grid(const Domain& domain, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw config_error("grid spacing must be positive");
  if (h > domain.min_extent() / 4.0)
    throw config_error("grid spacing " + std::to_string(h) + " too coarse: need h <= " +
                       std::to_string(domain.min_extent() / 4.0) + " (min extent / 4)");

  Grid g;
  g.domain = domain;
  g.h = h;

  const auto lo = domain.box_min();
  const auto hi = domain.box_max();
  g.ox = lo[0];
  g.oy = lo[1];
  const double wx = hi[0] - lo[0];
  const double wy = domain.dimension == 2 ? hi[1] - lo[1] : 0.0;
  g.nx = static_cast<int>(std::ceil(wx / h - 1e-9)) + 1;
  g.ny = domain.dimension == 2 ? static_cast<int>(std::ceil(wy / h - 1e-9)) + 1 : 1;

  const double snap_eps = 1e-12 * std::max(1.0, std::max(wx, wy));
  const size_t lattice_size = static_cast<size_t>(g.nx) * static_cast<size_t>(g.ny);
  g.lattice_class.assign(lattice_size, NodeClass::Exterior);
  g.node_of_lattice.assign(lattice_size, -1);

  // Pass 1: interior points (strictly inside, beyond the snap tolerance) and
  // points lying on the boundary itself.
  std::vector<double> sd_cache(lattice_size);
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const double sd = domain.signed_boundary_distance(g.lattice_x(ix), g.lattice_y(iy));
      sd_cache[static_cast<size_t>(g.lidx(ix, iy))] = sd;
      if (std::abs(sd) <= snap_eps)
        g.lattice_class[static_cast<size_t>(g.lidx(ix, iy))] = NodeClass::Boundary;
      else if (sd > 0.0)
        g.lattice_class[static_cast<size_t>(g.lidx(ix, iy))] = NodeClass::Interior;
    }
  }

  // Pass 2: exterior points with an interior axis neighbor become snapped
  // boundary nodes.
  static const int dir_dx[4] = {1, -1, 0, 0};
  static const int dir_dy[4] = {0, 0, 1, -1};
  const int dirs = domain.dimension == 2 ? 4 : 2;
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      if (g.cls(ix, iy) != NodeClass::Exterior) continue;
      for (int d = 0; d < dirs; ++d) {
        if (g.cls(ix + dir_dx[d], iy + dir_dy[d]) == NodeClass::Interior) {
          g.lattice_class[static_cast<size_t>(g.lidx(ix, iy))] = NodeClass::Boundary;
          break;
        }
      }
    }
  }

  // Compact nodes in lattice scan order; snapped positions for boundary nodes.
  g.node_x.clear();
  g.node_y.clear();
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const int l = g.lidx(ix, iy);
      const NodeClass c = g.lattice_class[static_cast<size_t>(l)];
      if (c == NodeClass::Exterior) continue;
      const int id = static_cast<int>(g.node_x.size());
      g.node_of_lattice[static_cast<size_t>(l)] = id;
      g.lattice_of_node.push_back(l);
      g.node_class.push_back(c);
      double px = g.lattice_x(ix), py = g.lattice_y(iy);
      if (c == NodeClass::Boundary && sd_cache[static_cast<size_t>(l)] < -snap_eps) {
        // Snap along the grid line toward the first interior axis neighbor.
        for (int d = 0; d < dirs; ++d) {
          const int jx = ix + dir_dx[d], jy = iy + dir_dy[d];
          if (g.cls(jx, jy) != NodeClass::Interior) continue;
          const double qx = g.lattice_x(jx), qy = g.lattice_y(jy);
          const double t = boundary_crossing(domain, qx, qy, px, py);
          px = qx + t * (px - qx);
          py = qy + t * (py - qy);
          break;
        }
      }
      g.node_x.push_back(px);
      g.node_y.push_back(py);
      if (c == NodeClass::Interior) {
        ++g.interior_count;
        g.interior_ids.push_back(id);
      } else {
        ++g.boundary_count;
      }
    }
  }

  // Axis arms for interior nodes.
  const size_t total = g.node_x.size();
  g.arm_len.assign(4 * total, 0.0);
  g.arm_nbr.assign(4 * total, -1);
  g.node_dist.assign(total, 0.0);
  for (size_t id = 0; id < total; ++id) {
    const int l = g.lattice_of_node[id];
    const int ix = l % g.nx, iy = l / g.nx;
    const double px = g.lattice_x(ix), py = g.lattice_y(iy);
    if (g.node_class[id] != NodeClass::Interior) continue;
    g.node_dist[id] = sd_cache[static_cast<size_t>(l)];
    for (int d = 0; d < dirs; ++d) {
      const int jx = ix + dir_dx[d], jy = iy + dir_dy[d];
      const NodeClass nc = g.cls(jx, jy);
      const int nid = g.node_at(jx, jy);
      if (nc == NodeClass::Exterior || nid < 0)
        throw config_error("grid construction: interior node with an exterior axis neighbor");
      g.arm_nbr[4 * id + static_cast<size_t>(d)] = nid;
      if (nc == NodeClass::Interior ||
          std::abs(sd_cache[static_cast<size_t>(g.lidx(jx, jy))]) <= snap_eps) {
        g.arm_len[4 * id + static_cast<size_t>(d)] = h;
      } else {
        // Exact crossing distance along this grid line (independent of the
        // neighbor's canonical snap direction).
        const double qx = g.lattice_x(jx), qy = g.lattice_y(jy);
        const double t = boundary_crossing(domain, px, py, qx, qy);
        g.arm_len[4 * id + static_cast<size_t>(d)] = std::max(t * h, 1e-6 * h);
      }
    }
  }
  return g;
}

double Field::sup_norm() const {
  double m = 0.0;
  for (const double v : values) m = std::max(m, std::abs(v));
  return m;
}

bool Field::finite() const {
  for (const double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

Field distance_field(const Grid& grid) {
  Field f(grid);
  for (int id = 0; id < grid.total_nodes(); ++id) f[id] = grid.node_dist[static_cast<size_t>(id)];
  return f;
}

CanonicalData canonical_initial_data(const Grid& grid, InitialDataKind kind, double power,
                                     double m, const Field* custom) {
  CanonicalData out;
  switch (kind) {
    case InitialDataKind::Distance:
      out.field = distance_field(grid);
      break;
    case InitialDataKind::DistancePower: {
      if (!(power > 0.0)) throw input_error("DistancePower needs power > 0");
      out.field = distance_field(grid);
      for (double& v : out.field.values) v = std::pow(v, power);
      break;
    }
    case InitialDataKind::EigenOfLaplacian: {
      out.field = Field(grid);
      for (int id = 0; id < grid.total_nodes(); ++id) {
        const double x = grid.node_x[static_cast<size_t>(id)];
        const double y = grid.node_y[static_cast<size_t>(id)];
        double v = 0.0;
        switch (grid.domain.shape) {
          case Domain::Shape::Interval: v = std::sin(M_PI * x / grid.domain.length); break;
          case Domain::Shape::Rectangle:
            v = std::sin(M_PI * x / grid.domain.extent_x) *
                std::sin(M_PI * y / grid.domain.extent_y);
            break;
          case Domain::Shape::Disk: {
            // First radial mode: J0(j01 r / R), j01 the first zero of J0.
            const double j01 = 2.404825557695773;
            v = std::cyl_bessel_j(0.0, j01 * std::hypot(x, y) / grid.domain.radius);
            break;
          }
          case Domain::Shape::Polygon:
            throw config_error("EigenOfLaplacian has no closed form on a polygon");
        }
        if (grid.node_class[static_cast<size_t>(id)] == NodeClass::Boundary) v = 0.0;
        out.field[id] = v;
      }
      break;
    }
    case InitialDataKind::Custom: {
      if (custom == nullptr || custom->grid != &grid)
        throw input_error("Custom initial data needs a field on this grid");
      for (const double v : custom->values)
        if (v < 0.0) throw input_error("Custom initial data must be nonnegative");
      out.field = *custom;
      break;
    }
  }

  // Comparability of u0^m with the distance function: fit the extreme ratios
  // u0^m / dist over interior nodes.
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const int id : grid.interior_ids) {
    const double dist = grid.node_dist[static_cast<size_t>(id)];
    if (dist <= 0.0) continue;
    const double um = std::pow(out.field[id], m);
    const double ratio = um / dist;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  out.comparable_low = std::isfinite(lo) ? lo : 0.0;
  out.comparable_high = hi;
  out.comparable = out.comparable_low > 0.0 && std::isfinite(hi);
  return out;
}

}  // namespace pucci
