#include <cmath>
#include <cstring>
#include <random>

#include "doctest.h"
#include "pucci/errors.hpp"
#include "pucci/field_io.hpp"
#include "pucci/grid.hpp"

using namespace pucci;

TEST_CASE("interval grid node counts") {
  const Grid g = build_grid(Domain::interval(M_PI), M_PI / 4.0);
  CHECK(g.interior_count == 3);
  CHECK(g.boundary_count == 2);
  CHECK(g.total_nodes() == 5);
}

TEST_CASE("unit square grid node counts") {
  const Grid g = build_grid(Domain::rectangle(1.0, 1.0), 0.25);
  CHECK(g.interior_count == 9);
  // 3 lattice points per side plus 4 corners
  CHECK(g.boundary_count == 16);
}

TEST_CASE("disk interior classification") {
  const Grid g = build_grid(Domain::disk(1.0), 0.5);
  int strict_inside = 0;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      const double x = g.lattice_x(ix), y = g.lattice_y(iy);
      const bool in = std::hypot(x, y) < 1.0 - 1e-12;
      if (in) ++strict_inside;
      if (g.cls(ix, iy) == NodeClass::Interior) CHECK(in);
      if (in) CHECK(g.cls(ix, iy) == NodeClass::Interior);
    }
  CHECK(g.interior_count == strict_inside);
  CHECK(g.boundary_count > 0);
}

TEST_CASE("boundary nodes satisfy the boundary equation") {
  const Domain domains[] = {Domain::interval(1.0), Domain::rectangle(1.0, 2.0),
                            Domain::disk(1.0),
                            Domain::polygon({{0, 0}, {2, 0}, {2.5, 1.5}, {1, 2.5}, {-0.5, 1}})};
  for (const auto& dom : domains) {
    const Grid g = build_grid(dom, dom.min_extent() / 16.0);
    for (int id = 0; id < g.total_nodes(); ++id) {
      if (g.node_class[static_cast<size_t>(id)] != NodeClass::Boundary) continue;
      const double sd = dom.signed_boundary_distance(g.node_x[static_cast<size_t>(id)],
                                                     g.node_y[static_cast<size_t>(id)]);
      CHECK(std::abs(sd) <= 1e-12);
    }
  }
}

TEST_CASE("interior axis neighbors are interior or boundary, arms in (0, h]") {
  const Grid g = build_grid(Domain::disk(1.0), 1.0 / 9.0);
  for (const int id : g.interior_ids) {
    for (int d = 0; d < 4; ++d) {
      const int nbr = g.arm_nbr[4 * static_cast<size_t>(id) + static_cast<size_t>(d)];
      const double len = g.arm_len[4 * static_cast<size_t>(id) + static_cast<size_t>(d)];
      REQUIRE(nbr >= 0);
      CHECK(g.node_class[static_cast<size_t>(nbr)] != NodeClass::Exterior);
      CHECK(len > 0.0);
      CHECK(len <= g.h + 1e-15);
    }
  }
}

TEST_CASE("cut-cell arm length is the exact crossing distance") {
  // L/h is not an integer: the last lattice point overhangs and snaps back to 1.
  const Grid g = build_grid(Domain::interval(1.0), 0.095);
  // find the interior node closest to the right end
  int right = -1;
  for (const int id : g.interior_ids)
    if (right < 0 || g.node_x[static_cast<size_t>(id)] > g.node_x[static_cast<size_t>(right)])
      right = id;
  const double x = g.node_x[static_cast<size_t>(right)];
  const double arm = g.arm_len[4 * static_cast<size_t>(right) + 0];  // +x direction
  CHECK(arm == doctest::Approx(1.0 - x).epsilon(1e-10));
  const int bnode = g.arm_nbr[4 * static_cast<size_t>(right) + 0];
  CHECK(g.node_x[static_cast<size_t>(bnode)] == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("grid spacing must resolve the domain") {
  CHECK_THROWS_AS(build_grid(Domain::interval(1.0), 0.3), config_error);
  CHECK_NOTHROW(build_grid(Domain::interval(1.0), 0.25));
  CHECK_NOTHROW(build_grid(Domain::interval(1.0), 0.1));
}

TEST_CASE("polygon construction validates convexity and orientation") {
  CHECK_THROWS_AS(Domain::polygon({{0, 0}, {0, 1}, {1, 0}}), input_error);  // clockwise
  CHECK_THROWS_AS(Domain::polygon({{0, 0}, {1, 0}, {2, 0}, {1, 1}}), input_error);  // collinear
  CHECK_THROWS_AS(Domain::polygon({{0, 0}, {2, 0}, {2, 2}, {1, 0.5}, {0, 2}}),
                  input_error);  // reflex vertex
  CHECK_NOTHROW(Domain::polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
}

TEST_CASE("distance field closed forms") {
  const Grid gi = build_grid(Domain::interval(M_PI), M_PI / 32.0);
  const Field di = distance_field(gi);
  for (int id = 0; id < gi.total_nodes(); ++id) {
    const double x = gi.node_x[static_cast<size_t>(id)];
    CHECK(di[id] == doctest::Approx(std::min(x, M_PI - x)).epsilon(1e-13));
  }

  const Grid gd = build_grid(Domain::disk(1.0), 1.0 / 10.0);
  const Field dd = distance_field(gd);
  for (const int id : gd.interior_ids) {
    const double r =
        std::hypot(gd.node_x[static_cast<size_t>(id)], gd.node_y[static_cast<size_t>(id)]);
    CHECK(dd[id] == doctest::Approx(1.0 - r).epsilon(1e-13));
  }

  const Grid gs = build_grid(Domain::rectangle(1.0, 1.0), 0.125);
  const Field ds = distance_field(gs);
  const int center = gs.node_at(4, 4);
  REQUIRE(center >= 0);
  CHECK(ds[center] == doctest::Approx(0.5).epsilon(1e-13));

  // Polygon square must agree with the rectangle closed form.
  const Grid gp = build_grid(Domain::polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}}), 0.125);
  const Field dp = distance_field(gp);
  for (const int id : gp.interior_ids) {
    const double x = gp.node_x[static_cast<size_t>(id)], y = gp.node_y[static_cast<size_t>(id)];
    CHECK(dp[id] ==
          doctest::Approx(std::min(std::min(x, 1.0 - x), std::min(y, 1.0 - y))).epsilon(1e-13));
  }
}

TEST_CASE("distance field is midpoint concave on lattice triples") {
  const Domain domains[] = {Domain::rectangle(1.0, 1.0), Domain::disk(1.0),
                            Domain::polygon({{0, 0}, {2, 0}, {2.5, 1.5}, {1, 2.5}, {-0.5, 1}})};
  for (const auto& dom : domains) {
    const Grid g = build_grid(dom, dom.min_extent() / 12.0);
    const Field d = distance_field(g);
    for (const int mid : g.interior_ids) {
      const auto [mx, my] = g.lattice_coords(mid);
      for (int dy = -3; dy <= 3; ++dy)
        for (int dx = -3; dx <= 3; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int a = g.node_at(mx - dx, my - dy);
          const int b = g.node_at(mx + dx, my + dy);
          if (a < 0 || b < 0) continue;
          if (g.node_class[static_cast<size_t>(a)] != NodeClass::Interior) continue;
          if (g.node_class[static_cast<size_t>(b)] != NodeClass::Interior) continue;
          CHECK(d[a] + d[b] - 2.0 * d[mid] <= 1e-12);
        }
    }
  }
}

TEST_CASE("refinement keeps coarse-node classification") {
  // Classification driven by the signed distance is resolution-independent:
  // interior stays interior, on-boundary lattice points stay boundary, and no
  // exterior point ever becomes interior.  Exterior points promoted to
  // boundary purely by adjacency may lose that promotion when the interior
  // neighbor moves closer, so those are only required not to turn interior.
  const Domain domains[] = {Domain::interval(M_PI), Domain::rectangle(1.0, 1.0),
                            Domain::disk(1.0)};
  const double hs[] = {M_PI / 16.0, 1.0 / 12.0, 1.0 / 4.0};
  for (size_t k = 0; k < 3; ++k) {
    const Grid coarse = build_grid(domains[k], hs[k]);
    const Grid fine = build_grid(domains[k], hs[k] / 2.0);
    const double snap = 1e-9 * domains[k].min_extent();
    for (int iy = 0; iy < coarse.ny; ++iy)
      for (int ix = 0; ix < coarse.nx; ++ix) {
        const NodeClass cc = coarse.cls(ix, iy);
        const NodeClass fc = fine.cls(2 * ix, 2 * iy);
        const double sd = domains[k].signed_boundary_distance(coarse.lattice_x(ix),
                                                              coarse.lattice_y(iy));
        if (cc == NodeClass::Interior) {
          CHECK(fc == NodeClass::Interior);
        } else if (std::abs(sd) <= snap) {
          CHECK(fc == NodeClass::Boundary);
        } else {
          CHECK(fc != NodeClass::Interior);
        }
      }
  }
}

TEST_CASE("canonical initial data") {
  const Grid g = build_grid(Domain::interval(M_PI), M_PI / 64.0);

  const CanonicalData tent = canonical_initial_data(g, InitialDataKind::Distance, 1.0, 1.0);
  double peak = 0.0;
  int peak_id = -1;
  for (int id = 0; id < g.total_nodes(); ++id)
    if (tent.field[id] > peak) {
      peak = tent.field[id];
      peak_id = id;
    }
  CHECK(peak == doctest::Approx(M_PI / 2.0).epsilon(1e-12));
  CHECK(g.node_x[static_cast<size_t>(peak_id)] == doctest::Approx(M_PI / 2.0).epsilon(1e-12));

  // u0 = dist^(1/2) with m = 2: u0^m is the distance itself, so the linear
  // comparability bounds are exactly 1.
  const CanonicalData root = canonical_initial_data(g, InitialDataKind::DistancePower, 0.5, 2.0);
  CHECK(root.comparable);
  CHECK(root.comparable_low == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(root.comparable_high == doctest::Approx(1.0).epsilon(1e-12));

  // Separation of variables on the interval: the first Laplacian eigenfunction
  // of [0, pi] is sin(x).
  const CanonicalData eig = canonical_initial_data(g, InitialDataKind::EigenOfLaplacian, 1.0, 1.0);
  for (int id = 0; id < g.total_nodes(); ++id)
    CHECK(eig.field[id] ==
          doctest::Approx(std::sin(g.node_x[static_cast<size_t>(id)])).epsilon(1e-13));

  Field bad(g, -1.0);
  CHECK_THROWS_AS(canonical_initial_data(g, InitialDataKind::Custom, 1.0, 1.0, &bad), input_error);
  CHECK_THROWS_AS(canonical_initial_data(g, InitialDataKind::DistancePower, -1.0, 1.0),
                  input_error);

  const Grid gp = build_grid(Domain::polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}}), 0.1);
  CHECK_THROWS_AS(canonical_initial_data(gp, InitialDataKind::EigenOfLaplacian, 1.0, 1.0),
                  config_error);
}

TEST_CASE("field CSV and JSON round trips are bit exact") {
  const Grid g2 = build_grid(Domain::disk(1.0), 1.0 / 9.0);
  Field f(g2);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (double& v : f.values) v = dist(rng) * std::pow(10.0, dist(rng) * 8.0);
  f[0] = M_PI;
  f[1] = 1.0 / 3.0;
  f[2] = 5e-324;  // smallest subnormal
  f[3] = -0.0;

  const Field back = field_from_csv(g2, field_to_csv(f));
  REQUIRE(back.size() == f.size());
  CHECK(std::memcmp(back.values.data(), f.values.data(),
                    f.values.size() * sizeof(double)) == 0);

  const nlohmann::json j = field_to_json(f);
  const nlohmann::json reparsed = nlohmann::json::parse(j.dump());
  const Field jback = field_from_json(g2, reparsed);
  CHECK(std::memcmp(jback.values.data(), f.values.data(),
                    f.values.size() * sizeof(double)) == 0);
  CHECK(reparsed.at("grid").at("interior_nodes").get<int>() == g2.interior_count);

  // Domain descriptors survive the JSON round trip.
  const Domain dp = Domain::polygon({{0, 0}, {2, 0}, {2.5, 1.5}, {1, 2.5}, {-0.5, 1}});
  const Domain dp2 = domain_from_json(nlohmann::json::parse(domain_to_json(dp).dump()));
  CHECK(dp2.shape == Domain::Shape::Polygon);
  REQUIRE(dp2.vertices.size() == dp.vertices.size());
  for (size_t i = 0; i < dp.vertices.size(); ++i) {
    CHECK(dp2.vertices[i][0] == dp.vertices[i][0]);
    CHECK(dp2.vertices[i][1] == dp.vertices[i][1]);
  }
}

TEST_CASE("csv parse errors carry row information") {
  const Grid g = build_grid(Domain::interval(1.0), 0.1);
  Field f(g, 1.0);
  std::string csv = field_to_csv(f);
  CHECK_THROWS_AS(field_from_csv(g, "bad header\n1,2\n"), input_error);
  csv += "0.5,1\n";  // extra row
  CHECK_THROWS_AS(field_from_csv(g, csv), input_error);
}
