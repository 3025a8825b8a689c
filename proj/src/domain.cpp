#include "pucci/domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pucci/errors.hpp"

namespace pucci {

Domain Domain::interval(double L) {
  if (!(L > 0.0) || !std::isfinite(L)) throw input_error("interval length must be positive");
  Domain d;
  d.shape = Shape::Interval;
  d.dimension = 1;
  d.length = L;
  d.convex_certified = true;
  return d;
}

Domain Domain::rectangle(double ex, double ey) {
  if (!(ex > 0.0) || !(ey > 0.0) || !std::isfinite(ex) || !std::isfinite(ey))
    throw input_error("rectangle extents must be positive");
  Domain d;
  d.shape = Shape::Rectangle;
  d.dimension = 2;
  d.extent_x = ex;
  d.extent_y = ey;
  d.convex_certified = true;
  return d;
}

Domain Domain::disk(double R) {
  if (!(R > 0.0) || !std::isfinite(R)) throw input_error("disk radius must be positive");
  Domain d;
  d.shape = Shape::Disk;
  d.dimension = 2;
  d.radius = R;
  d.convex_certified = true;
  return d;
}

Domain Domain::polygon(std::vector<std::array<double, 2>> verts) {
  if (verts.size() < 3) throw input_error("polygon needs at least 3 vertices");
  const size_t n = verts.size();
  for (size_t i = 0; i < n; ++i) {
    const auto& a = verts[i];
    const auto& b = verts[(i + 1) % n];
    const auto& c = verts[(i + 2) % n];
    const double cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
    if (!(cross > 0.0))
      throw input_error("polygon vertices must be strictly convex in counterclockwise order");
  }
  Domain d;
  d.shape = Shape::Polygon;
  d.dimension = 2;
  d.vertices = std::move(verts);
  d.convex_certified = true;
  return d;
}

std::array<double, 2> Domain::box_min() const {
  switch (shape) {
    case Shape::Interval: return {0.0, 0.0};
    case Shape::Rectangle: return {0.0, 0.0};
    case Shape::Disk: return {-radius, -radius};
    case Shape::Polygon: {
      double mx = std::numeric_limits<double>::infinity(), my = mx;
      for (const auto& v : vertices) {
        mx = std::min(mx, v[0]);
        my = std::min(my, v[1]);
      }
      return {mx, my};
    }
  }
  return {0.0, 0.0};
}

std::array<double, 2> Domain::box_max() const {
  switch (shape) {
    case Shape::Interval: return {length, 0.0};
    case Shape::Rectangle: return {extent_x, extent_y};
    case Shape::Disk: return {radius, radius};
    case Shape::Polygon: {
      double mx = -std::numeric_limits<double>::infinity(), my = mx;
      for (const auto& v : vertices) {
        mx = std::max(mx, v[0]);
        my = std::max(my, v[1]);
      }
      return {mx, my};
    }
  }
  return {0.0, 0.0};
}

double Domain::min_extent() const {
  const auto lo = box_min(), hi = box_max();
  if (dimension == 1) return hi[0] - lo[0];
  return std::min(hi[0] - lo[0], hi[1] - lo[1]);
}

double Domain::signed_boundary_distance(double x, double y) const {
  switch (shape) {
    case Shape::Interval: return std::min(x, length - x);
    case Shape::Rectangle: return std::min(std::min(x, extent_x - x), std::min(y, extent_y - y));
    case Shape::Disk: return radius - std::hypot(x, y);
    case Shape::Polygon: {
      // For a convex region the distance to the boundary equals the minimum of
      // the signed distances to the supporting lines of its edges.
      double best = std::numeric_limits<double>::infinity();
      const size_t n = vertices.size();
      for (size_t i = 0; i < n; ++i) {
        const auto& a = vertices[i];
        const auto& b = vertices[(i + 1) % n];
        const double ex = b[0] - a[0], ey = b[1] - a[1];
        const double len = std::hypot(ex, ey);
        const double d = (ex * (y - a[1]) - ey * (x - a[0])) / len;
        best = std::min(best, d);
      }
      return best;
    }
  }
  return 0.0;
}

bool Domain::inward_normal(double x, double y, double* nx, double* ny) const {
  switch (shape) {
    case Shape::Interval:
      *nx = (x < 0.5 * length) ? 1.0 : -1.0;
      *ny = 0.0;
      return true;
    case Shape::Rectangle: {
      // Nearest side decides; reject near corners where two sides tie.
      const double dists[4] = {x, extent_x - x, y, extent_y - y};
      int side = 0;
      for (int i = 1; i < 4; ++i)
        if (dists[i] < dists[side]) side = i;
      double second = std::numeric_limits<double>::infinity();
      for (int i = 0; i < 4; ++i)
        if (i != side) second = std::min(second, dists[i]);
      if (second - dists[side] < 1e-9 * min_extent()) return false;
      const double normals[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
      *nx = normals[side][0];
      *ny = normals[side][1];
      return true;
    }
    case Shape::Disk: {
      const double r = std::hypot(x, y);
      if (r < 1e-12 * radius) return false;
      *nx = -x / r;
      *ny = -y / r;
      return true;
    }
    case Shape::Polygon: {
      const size_t n = vertices.size();
      double best = std::numeric_limits<double>::infinity(), second = best;
      size_t best_i = 0;
      for (size_t i = 0; i < n; ++i) {
        const auto& a = vertices[i];
        const auto& b = vertices[(i + 1) % n];
        const double ex = b[0] - a[0], ey = b[1] - a[1];
        const double len = std::hypot(ex, ey);
        const double d = std::abs((ex * (y - a[1]) - ey * (x - a[0])) / len);
        if (d < best) {
          second = best;
          best = d;
          best_i = i;
        } else {
          second = std::min(second, d);
        }
      }
      if (second - best < 1e-9 * min_extent()) return false;  // corner
      const auto& a = vertices[best_i];
      const auto& b = vertices[(best_i + 1) % n];
      const double ex = b[0] - a[0], ey = b[1] - a[1];
      const double len = std::hypot(ex, ey);
      *nx = -ey / len;
      *ny = ex / len;
      return true;
    }
  }
  return false;
}

std::string Domain::describe() const {
  std::ostringstream os;
  switch (shape) {
    case Shape::Interval: os << "interval[0," << length << "]"; break;
    case Shape::Rectangle: os << "rectangle[0," << extent_x << "]x[0," << extent_y << "]"; break;
    case Shape::Disk: os << "disk(R=" << radius << ")"; break;
    case Shape::Polygon: os << "polygon(" << vertices.size() << " vertices)"; break;
  }
  return os.str();
}

}  // namespace pucci
