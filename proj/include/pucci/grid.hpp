#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pucci/domain.hpp"

namespace pucci {

enum class NodeClass : unsigned char { Exterior = 0, Interior = 1, Boundary = 2 };

// Uniform lattice over the domain's bounding box with per-point classification.
// Boundary nodes are lattice points snapped onto the boundary along grid lines
// (cut cells), so Dirichlet data is imposed on the boundary itself. Interior
// nodes carry per-direction axis arms: the distance to the neighboring value
// location, which is h toward an interior neighbor and the exact crossing
// distance toward the boundary.
//
// Invariants (checked in build_grid):
//   - every Interior node's axis neighbors are Interior or Boundary;
//   - every Boundary node's snapped position satisfies the boundary equation
//     to 1e-12;
//   - axis arms are in (0, h].
struct Grid {
  Domain domain;
  double h = 0.0;

  // Lattice of the bounding box; x runs fastest. ny == 1 in one dimension.
  int nx = 0, ny = 0;
  double ox = 0.0, oy = 0.0;
  std::vector<NodeClass> lattice_class;  // size nx*ny
  std::vector<int32_t> node_of_lattice;  // size nx*ny, -1 for exterior points

  // Compact node storage (Interior and Boundary points, lattice scan order).
  std::vector<double> node_x, node_y;  // snapped coordinates for boundary nodes
  std::vector<NodeClass> node_class;
  std::vector<int32_t> lattice_of_node;
  std::vector<double> node_dist;  // exact distance to the boundary, 0 on Boundary
  std::vector<int32_t> interior_ids;
  int interior_count = 0, boundary_count = 0;

  // Axis arms per node (meaningful for Interior): direction order +x, -x, +y, -y.
  // arm_nbr is the compact id supplying the neighbor value; arm_len the distance.
  std::vector<double> arm_len;
  std::vector<int32_t> arm_nbr;

  int total_nodes() const { return interior_count + boundary_count; }
  int lidx(int ix, int iy) const { return iy * nx + ix; }
  bool lattice_valid(int ix, int iy) const { return ix >= 0 && ix < nx && iy >= 0 && iy < ny; }
  NodeClass cls(int ix, int iy) const {
    return lattice_valid(ix, iy) ? lattice_class[static_cast<size_t>(lidx(ix, iy))]
                                 : NodeClass::Exterior;
  }
  int node_at(int ix, int iy) const {
    return lattice_valid(ix, iy) ? node_of_lattice[static_cast<size_t>(lidx(ix, iy))] : -1;
  }
  double lattice_x(int ix) const { return ox + ix * h; }
  double lattice_y(int iy) const { return oy + iy * h; }
  std::array<int, 2> lattice_coords(int node) const {
    const int l = lattice_of_node[static_cast<size_t>(node)];
    return {l % nx, l / nx};
  }
};

// Builds the classified lattice. Requires h <= domain.min_extent() / 4.
Grid build_grid(const Domain& domain, double h);

// One value per Interior and Boundary node.
struct Field {
  const Grid* grid = nullptr;
  std::vector<double> values;

  Field() = default;
  explicit Field(const Grid& g, double fill = 0.0)
      : grid(&g), values(static_cast<size_t>(g.total_nodes()), fill) {}

  double& operator[](int id) { return values[static_cast<size_t>(id)]; }
  double operator[](int id) const { return values[static_cast<size_t>(id)]; }
  int size() const { return static_cast<int>(values.size()); }

  double sup_norm() const;
  bool finite() const;
};

// Exact Euclidean distance to the boundary at every node (zero on Boundary nodes).
Field distance_field(const Grid& grid);

enum class InitialDataKind { Distance, DistancePower, EigenOfLaplacian, Custom };

// Initial datum plus a record of its comparability with the distance function:
// comparable_low * dist <= u0^m <= comparable_high * dist over interior nodes.
struct CanonicalData {
  Field field;
  bool comparable = false;
  double comparable_low = 0.0;
  double comparable_high = 0.0;
};

// Canonical initial data. `power` applies to DistancePower (must be > 0);
// `custom` is required for Custom and must be nonnegative. For m > 1 callers
// normally pick DistancePower with power = 1/m so that u0^m is comparable to
// the distance function.
CanonicalData canonical_initial_data(const Grid& grid, InitialDataKind kind, double power,
                                     double m, const Field* custom = nullptr);

}  // namespace pucci
