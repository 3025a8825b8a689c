#pragma once

#include <array>
#include <string>
#include <vector>

namespace pucci {

// Convex computational domain: interval [0,L], rectangle [0,ex]x[0,ey], disk of
// radius R centered at the origin, or a convex polygon with counterclockwise
// vertices. Convexity is certified at construction (polygon cross products all
// strictly positive).
struct Domain {
  enum class Shape { Interval, Rectangle, Disk, Polygon };

  Shape shape = Shape::Interval;
  int dimension = 1;
  double length = 1.0;                              // Interval
  double extent_x = 1.0, extent_y = 1.0;            // Rectangle
  double radius = 1.0;                              // Disk
  std::vector<std::array<double, 2>> vertices;      // Polygon, ccw
  bool convex_certified = false;

  static Domain interval(double L);
  static Domain rectangle(double ex, double ey);
  static Domain disk(double R);
  static Domain polygon(std::vector<std::array<double, 2>> verts);

  // Smallest bounding-box extent; grid spacing must stay below an eighth of it.
  double min_extent() const;
  std::array<double, 2> box_min() const;
  std::array<double, 2> box_max() const;

  // Signed distance to the boundary: positive strictly inside, zero on the
  // boundary, negative outside. Exact Euclidean distance for interior points.
  double signed_boundary_distance(double x, double y = 0.0) const;

  bool inside(double x, double y = 0.0) const { return signed_boundary_distance(x, y) > 0.0; }

  // Inward unit normal for a point on (or near) the boundary. Returns false at
  // polygon corners and other points where the normal is not well defined.
  bool inward_normal(double x, double y, double* nx, double* ny) const;

  std::string describe() const;
};

}  // namespace pucci
