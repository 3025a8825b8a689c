#include "pucci/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "pucci/errors.hpp"
#include "pucci/field_io.hpp"

namespace pucci {

namespace {

constexpr double kTolGeom = 1e-8;   // relative to sup|T(u)| over the band
constexpr int kTopTriples = 100;

// Total order on triples: larger value first, ties toward the smaller (a, b)
// pair. Distinct triples have distinct (a, b), so the order is strict and the
// parallel reduction lands on the same representative as the serial scan.
bool ranks_below(const Triple& x, const Triple& y) {
  if (x.value != y.value) return x.value < y.value;
  if (x.a != y.a) return x.a > y.a;
  return x.b > y.b;
}

std::string node_label(const Grid& g, int id) {
  const auto c = g.lattice_coords(id);
  std::ostringstream os;
  os << "node " << id << " at (" << g.lattice_x(c[0]);
  if (g.domain.dimension == 2) os << ", " << g.lattice_y(c[1]);
  os << ")";
  return os.str();
}

std::vector<int> band_nodes(const Grid& g, double band) {
  std::vector<int> out;
  for (int id : g.interior_ids) {
    if (g.node_dist[static_cast<size_t>(id)] >= band * g.h) out.push_back(id);
  }
  return out;
}

// Transformed samples at the given nodes; Log and Power refuse nonpositive
// values, naming the node. Entries not listed stay NaN and must not be read.
std::vector<double> transform_samples(const Field& u, const Transform& t,
                                      const std::vector<int>& nodes) {
  const Grid& g = *u.grid;
  std::vector<double> tv(static_cast<size_t>(u.size()),
                         std::numeric_limits<double>::quiet_NaN());
  for (int id : nodes) {
    const double v = u[id];
    if (!std::isfinite(v)) {
      throw input_error("field is not finite at " + node_label(g, id));
    }
    if (t.kind != Transform::Kind::Identity && !(v > 0.0)) {
      throw input_error(std::string(t.name()) +
                        " transform needs positive samples; " + node_label(g, id) +
                        " holds " + std::to_string(v));
    }
    tv[static_cast<size_t>(id)] = t.apply(v);
  }
  return tv;
}

// Bounded worst-first candidate list. Candidates below the current cutoff are
// dropped; the buffer is pruned back to kTopTriples when it grows past 4x.
struct TopList {
  std::vector<Triple> items;
  bool saturated = false;
  Triple cutoff;

  void prune() {
    std::sort(items.begin(), items.end(),
              [](const Triple& x, const Triple& y) { return ranks_below(y, x); });
    if (items.size() > static_cast<size_t>(kTopTriples)) {
      items.resize(static_cast<size_t>(kTopTriples));
    }
    if (items.size() == static_cast<size_t>(kTopTriples)) {
      saturated = true;
      cutoff = items.back();
    }
  }

  void push(const Triple& t) {
    if (saturated && ranks_below(t, cutoff)) return;
    items.push_back(t);
    if (items.size() >= static_cast<size_t>(4 * kTopTriples)) prune();
  }

  void absorb(const TopList& other) {
    for (const Triple& t : other.items) push(t);
  }
};

struct ScanResult {
  Triple best;
  std::int64_t count = 0;
  TopList top;
  bool any = false;
};

// One enumeration strip: pairs (band[i], band[j]) for j > i with a fixed i.
void scan_row(const Grid& g, const std::vector<int>& band, const std::vector<int>& bx,
              const std::vector<int>& by, const std::vector<char>& in_band,
              const std::vector<double>& tv, size_t i, ScanResult& acc) {
  const int a = band[i];
  const int ax = bx[i];
  const int ay = by[i];
  for (size_t j = i + 1; j < band.size(); ++j) {
    const int b = band[j];
    const int sx = ax + bx[j];
    const int sy = ay + by[j];
    if ((sx | sy) & 1) continue;
    const int mid = g.node_at(sx / 2, sy / 2);
    if (mid < 0 || !in_band[static_cast<size_t>(mid)]) continue;
    Triple t;
    t.a = a;
    t.b = b;
    t.mid = mid;
    t.value = tv[static_cast<size_t>(a)] + tv[static_cast<size_t>(b)] -
              2.0 * tv[static_cast<size_t>(mid)];
    acc.count += 1;
    if (!acc.any || ranks_below(acc.best, t)) {
      acc.best = t;
      acc.any = true;
    }
    acc.top.push(t);
  }
}

ConcavityReport run_midpoint(const Field& u, const Transform& transform,
                             double band, bool parallel) {
  if (u.grid == nullptr) throw input_error("field has no grid");
  const Grid& g = *u.grid;
  if (!(band >= 0.0) || !std::isfinite(band)) {
    throw config_error("band width must be a finite nonnegative multiple of h");
  }

  ConcavityReport rep;
  rep.transform = transform;
  rep.band = band;

  const std::vector<int> band_ids = band_nodes(g, band);
  std::vector<char> in_band(static_cast<size_t>(u.size()), 0);
  std::vector<int> bx(band_ids.size()), by(band_ids.size());
  for (size_t i = 0; i < band_ids.size(); ++i) {
    in_band[static_cast<size_t>(band_ids[i])] = 1;
    const auto c = g.lattice_coords(band_ids[i]);
    bx[i] = c[0];
    by[i] = c[1];
  }
  const std::vector<double> tv = transform_samples(u, transform, band_ids);

  for (int id : band_ids) {
    rep.sup_transform = std::max(rep.sup_transform, std::abs(tv[static_cast<size_t>(id)]));
  }

  ScanResult total;
  if (parallel) {
#pragma omp parallel
    {
      ScanResult local;
#pragma omp for schedule(dynamic, 16)
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(band_ids.size()); ++i) {
        scan_row(g, band_ids, bx, by, in_band, tv, static_cast<size_t>(i), local);
      }
#pragma omp critical(pucci_midpoint_merge)
      {
        total.count += local.count;
        if (local.any && (!total.any || ranks_below(total.best, local.best))) {
          total.best = local.best;
          total.any = true;
        }
        total.top.absorb(local.top);
      }
    }
  } else {
    for (size_t i = 0; i < band_ids.size(); ++i) {
      scan_row(g, band_ids, bx, by, in_band, tv, i, total);
    }
  }

  rep.triple_count = total.count;
  if (total.any) {
    rep.worst = total.best.value;
    rep.worst_triple = total.best;
  }
  total.top.prune();
  rep.top = std::move(total.top.items);

  const HessianBound hb = hessian_bound(u, transform, band);
  rep.max_hessian_eig = hb.max_eigenvalue;
  rep.c1 = hb.c1;
  rep.hessian_nodes = hb.nodes;
  return rep;
}

}  // namespace

Transform Transform::power(double q) {
  if (!std::isfinite(q) || q <= 0.0) {
    throw config_error("power transform exponent must be positive");
  }
  return {Kind::Power, q};
}

double Transform::apply(double v) const {
  switch (kind) {
    case Kind::Identity:
      return v;
    case Kind::Log:
      return std::log(v);
    case Kind::Power:
      return q == 1.0 ? v : std::pow(v, q);
  }
  return v;
}

const char* Transform::name() const {
  switch (kind) {
    case Kind::Identity:
      return "identity";
    case Kind::Log:
      return "log";
    case Kind::Power:
      return "power";
  }
  return "identity";
}

ConcavityReport midpoint_concavity(const Field& u, const Transform& transform,
                                   double band) {
  return run_midpoint(u, transform, band, true);
}

ConcavityReport midpoint_concavity_serial(const Field& u, const Transform& transform,
                                          double band) {
  return run_midpoint(u, transform, band, false);
}

HessianBound hessian_bound(const Field& u, const Transform& transform, double band) {
  if (u.grid == nullptr) throw input_error("field has no grid");
  const Grid& g = *u.grid;
  if (!(band >= 0.0) || !std::isfinite(band)) {
    throw config_error("band width must be a finite nonnegative multiple of h");
  }

  const std::vector<int> band_ids = band_nodes(g, band);
  // Band nodes are validated (and the error names the node); neighbors one
  // cell out are used when available and positive, otherwise the node is
  // skipped rather than rejected, since the precondition covers the band only.
  const std::vector<double> tv_band = transform_samples(u, transform, band_ids);

  const bool two_d = g.domain.dimension == 2;
  const double h2 = g.h * g.h;
  HessianBound out;
  bool any = false;

  auto neighbor_value = [&](int ix, int iy, double* value) {
    const int id = g.node_at(ix, iy);
    if (id < 0) return false;
    const double v = u[id];
    if (!std::isfinite(v)) return false;
    if (transform.kind != Transform::Kind::Identity && !(v > 0.0)) return false;
    const double cached = tv_band[static_cast<size_t>(id)];
    *value = std::isnan(cached) ? transform.apply(v) : cached;
    return true;
  };

  for (int id : band_ids) {
    const auto c = g.lattice_coords(id);
    const double t0 = tv_band[static_cast<size_t>(id)];
    double xl, xr;
    if (!neighbor_value(c[0] - 1, c[1], &xl) || !neighbor_value(c[0] + 1, c[1], &xr)) {
      continue;
    }
    const double d11 = (xl + xr - 2.0 * t0) / h2;
    double eig = d11;
    if (two_d) {
      double yl, yr, pp, pm, mp, mm;
      if (!neighbor_value(c[0], c[1] - 1, &yl) || !neighbor_value(c[0], c[1] + 1, &yr) ||
          !neighbor_value(c[0] + 1, c[1] + 1, &pp) ||
          !neighbor_value(c[0] - 1, c[1] - 1, &mm) ||
          !neighbor_value(c[0] + 1, c[1] - 1, &pm) ||
          !neighbor_value(c[0] - 1, c[1] + 1, &mp)) {
        continue;
      }
      const double d22 = (yl + yr - 2.0 * t0) / h2;
      // Mixed derivative from the two diagonal second differences; exact on
      // quadratics.
      const double diag_plus = (pp + mm - 2.0 * t0) / (2.0 * h2);
      const double diag_minus = (pm + mp - 2.0 * t0) / (2.0 * h2);
      const double d12 = (diag_plus - diag_minus) / 2.0;
      eig = 0.5 * (d11 + d22) + std::hypot(0.5 * (d11 - d22), d12);
    }
    if (!any || eig > out.max_eigenvalue) out.max_eigenvalue = eig;
    any = true;
    out.nodes += 1;
  }

  if (any && out.max_eigenvalue < 0.0) out.c1 = -out.max_eigenvalue;
  return out;
}

PreservationAudit preservation_audit(const FlowTrace& trace, const Transform& transform,
                                     double band, int stride) {
  if (trace.snapshots.empty()) throw input_error("flow trace has no snapshots");
  if (stride < 1) throw config_error("audit stride must be at least 1");

  PreservationAudit audit;
  audit.transform = transform;
  audit.band = band;

  std::vector<size_t> picks;
  for (size_t k = 0; k < trace.snapshots.size(); k += static_cast<size_t>(stride)) {
    picks.push_back(k);
  }
  if (picks.back() != trace.snapshots.size() - 1) {
    picks.push_back(trace.snapshots.size() - 1);
  }

  bool all_ok = true;
  for (size_t n = 0; n < picks.size(); ++n) {
    const Snapshot& snap = trace.snapshots[picks[n]];
    const ConcavityReport rep = midpoint_concavity(snap.u, transform, band);
    const double tol = kTolGeom * rep.sup_transform;
    if (n == 0 && rep.worst > tol) {
      throw input_error(
          "initial datum fails the concavity check the audit enforces (worst " +
          std::to_string(rep.worst) + " vs tolerance " + std::to_string(tol) + ")");
    }
    audit.times.push_back(snap.t);
    audit.worst.push_back(rep.worst);
    audit.tolerance.push_back(tol);
    if (rep.worst > tol && all_ok) {
      all_ok = false;
      audit.first_failure = static_cast<int>(n);
    }
  }
  audit.pass = all_ok;
  return audit;
}

EventualConcavityResult eventual_concavity_probe(const FlowTrace& trace,
                                                 const EigenResult& eigen,
                                                 double epsilon, double band) {
  if (trace.snapshots.empty()) throw input_error("flow trace has no snapshots");
  if (!std::isfinite(epsilon) || epsilon < 0.0) {
    throw config_error("epsilon must be finite and nonnegative");
  }

  const bool linear = eigen.mode == EigenResult::Mode::Linear;
  const Transform t =
      linear ? Transform::log() : Transform::power((eigen.m - 1.0) / 2.0);
  // Sublinear states are compared through sqrt(t m/(m-1)) u^((m-1)/2), the
  // square root of t times the pressure; its limit is the same root of the
  // stationary profile, which supplies c1.
  const double root_scale =
      linear ? 1.0 : std::sqrt(eigen.m / (eigen.m - 1.0));

  EventualConcavityResult out;
  out.epsilon = epsilon;
  out.c1 = root_scale * hessian_bound(eigen.profile, t, band).c1;
  out.bound = -(out.c1 - epsilon);

  for (const Snapshot& snap : trace.snapshots) {
    double eig;
    try {
      const double scale = linear ? 1.0 : root_scale * std::sqrt(snap.t);
      eig = scale * hessian_bound(snap.u, t, band).max_eigenvalue;
    } catch (const input_error&) {
      eig = std::numeric_limits<double>::infinity();
    }
    out.times.push_back(snap.t);
    out.max_eig.push_back(eig);
  }

  size_t first_good = out.max_eig.size();
  for (size_t k = out.max_eig.size(); k-- > 0;) {
    if (out.max_eig[k] <= out.bound) {
      first_good = k;
    } else {
      break;
    }
  }
  if (first_good < out.max_eig.size()) {
    out.reached = true;
    out.index = static_cast<int>(first_good);
    out.t0 = out.times[first_good];
  }
  out.final_margin = out.max_eig.back() - out.bound;
  return out;
}

void write_concavity_report(const ConcavityReport& report, const Grid& grid,
                            const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);

  nlohmann::json man;
  man["transform"] = report.transform.name();
  if (report.transform.kind == Transform::Kind::Power) {
    man["power_exponent"] = report.transform.q;
  }
  man["band"] = report.band;
  man["worst"] = report.worst;
  man["triple_count"] = report.triple_count;
  man["sup_transform"] = report.sup_transform;
  man["max_hessian_eig"] = report.max_hessian_eig;
  man["c1"] = report.c1;
  man["hessian_nodes"] = report.hessian_nodes;
  man["pass"] = report.passes();
  if (report.worst_triple.a >= 0) {
    auto coords = [&grid](int id) {
      const auto c = grid.lattice_coords(id);
      return nlohmann::json{grid.lattice_x(c[0]), grid.lattice_y(c[1])};
    };
    man["worst_triple"] = {{"a", coords(report.worst_triple.a)},
                           {"b", coords(report.worst_triple.b)},
                           {"mid", coords(report.worst_triple.mid)}};
  }
  man["triples_csv"] = "triples.csv";
  write_text_file((fs::path(directory) / "report.json").string(), man.dump(2) + "\n");

  std::ostringstream csv;
  csv.precision(17);
  csv << "a_x,a_y,b_x,b_y,mid_x,mid_y,value\n";
  for (const Triple& t : report.top) {
    for (int id : {t.a, t.b, t.mid}) {
      const auto c = grid.lattice_coords(id);
      csv << grid.lattice_x(c[0]) << "," << grid.lattice_y(c[1]) << ",";
    }
    csv << t.value << "\n";
  }
  write_text_file((fs::path(directory) / "triples.csv").string(), csv.str());
}

}  // namespace pucci
