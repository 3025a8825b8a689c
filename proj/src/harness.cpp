#include "pucci/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"
#include "pucci/barriers.hpp"
#include "pucci/eigen.hpp"
#include "pucci/errors.hpp"
#include "pucci/experiments.hpp"
#include "pucci/field_io.hpp"

namespace pucci {
namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// key table

// The single source of truth for the config surface: parsing rejects keys not
// listed here, `config_defaults` renders it, and the resolved echo follows its
// order. Default strings must parse to the RunConfig member defaults.
struct KeyDoc {
  const char* key;
  const char* def;
  const char* doc;
};

constexpr KeyDoc kKeys[] = {
    {"domain.kind", "interval", "interval | rectangle | disk"},
    {"domain.length", "pi", "interval length"},
    {"domain.width", "1", "rectangle x extent"},
    {"domain.height", "1", "rectangle y extent"},
    {"domain.radius", "1", "disk radius"},
    {"operator.kind", "laplacian", "laplacian | pucci-minus | pucci-plus"},
    {"operator.lambda_low", "1", "lower ellipticity bound, positive"},
    {"operator.lambda_high", "1", "upper ellipticity bound, >= lambda_low"},
    {"m", "1", "diffusion exponent; 1 is the linear flow"},
    {"grid.h", "pi/64", "grid spacing, or a comma ladder coarse to fine"},
    {"data.kind", "distance", "distance | distance-power | eigen-of-laplacian"},
    {"data.power", "0.5", "exponent for data.kind = distance-power"},
    {"flow.t_end", "1", "final time of evolve / check runs"},
    {"flow.eta", "0", "boundary level; must be 0 when m = 1"},
    {"flow.cfl_safety", "0.5", "explicit step as a fraction of the stable step"},
    {"snapshots.kind", "uniform", "uniform | geometric"},
    {"snapshots.dt", "0", "uniform spacing; 0 selects t_end/16"},
    {"snapshots.t_first", "0", "geometric first time; 0 selects t_end/1024"},
    {"snapshots.ratio", "2", "geometric growth factor, > 1"},
    {"snapshots.frames", "8", "frames retained by flow summaries"},
    {"eigen.tol_mu", "1e-5", "rate convergence tolerance"},
    {"eigen.tol_profile", "1e-4", "profile convergence tolerance"},
    {"check.transform", "log", "identity | log | sqrt | power"},
    {"check.power", "0.5", "exponent for check.transform = power"},
    {"check.band", "4", "band width in multiples of h"},
    {"check.t_min", "0", "first trace time used by check ab"},
    {"check.bound", "2.5", "upper bound asserted by check ab"},
    {"check.pairs", "100", "ordered data pairs for check comparison"},
    {"check.tol", "1e-12", "violation tolerance for check comparison"},
    {"output.dir", "", "run directory; empty selects <output root>/<command>"},
    {"seed", "1", "random seed for check comparison"},
};

bool known_key(const std::string& key) {
  for (const KeyDoc& k : kKeys) {
    if (key == k.key) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// numeric expressions

// Numeric fields take +, -, *, /, parentheses, decimal literals, and the
// symbol pi. The parse is total: failures land in `message`, never in
// exceptions or undefined behavior.
struct ExprParser {
  const char* p;
  const char* end;
  std::string message;

  explicit ExprParser(const std::string& s) : p(s.data()), end(s.data() + s.size()) {}

  std::optional<double> run() {
    const double v = expr();
    skip_ws();
    if (!message.empty()) return std::nullopt;
    if (p != end) {
      message = "unexpected text '" + std::string(p, end) + "'";
      return std::nullopt;
    }
    return v;
  }

 private:
  void skip_ws() {
    while (p != end && (*p == ' ' || *p == '\t')) ++p;
  }
  bool eat(char c) {
    skip_ws();
    if (p != end && *p == c) {
      ++p;
      return true;
    }
    return false;
  }
  double expr() {
    double v = term();
    for (;;) {
      if (eat('+')) {
        v += term();
      } else if (eat('-')) {
        v -= term();
      } else {
        return v;
      }
    }
  }
  double term() {
    double v = unary();
    for (;;) {
      if (eat('*')) {
        v *= unary();
      } else if (eat('/')) {
        v /= unary();
      } else {
        return v;
      }
    }
  }
  double unary() {
    if (eat('-')) return -unary();
    return primary();
  }
  double primary() {
    skip_ws();
    if (p == end) {
      if (message.empty()) message = "missing value";
      return 0.0;
    }
    if (*p == '(') {
      ++p;
      const double v = expr();
      if (!eat(')')) {
        if (message.empty()) message = "missing ')'";
      }
      return v;
    }
    if ((*p >= '0' && *p <= '9') || *p == '.') {
      char* after = nullptr;
      const double v = std::strtod(p, &after);
      p = after;
      return v;
    }
    if (std::isalpha(static_cast<unsigned char>(*p))) {
      const char* start = p;
      while (p != end && (std::isalnum(static_cast<unsigned char>(*p)) || *p == '_')) ++p;
      const std::string word(start, p);
      if (word == "pi") return M_PI;
      if (message.empty()) message = "unknown symbol '" + word + "'";
      return 0.0;
    }
    if (message.empty()) message = std::string("unexpected character '") + *p + "'";
    return 0.0;
  }
};

// ---------------------------------------------------------------------------
// raw entries

struct RawEntry {
  std::string value;
  int line = 0;
};

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

using RawMap = std::map<std::string, RawEntry>;

RawMap scan_lines(const std::string& text) {
  RawMap map;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw config_error("config line " + std::to_string(line_no) +
                         ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw config_error("config line " + std::to_string(line_no) + ": empty key");
    }
    if (!known_key(key)) {
      throw config_error("config line " + std::to_string(line_no) + ": unknown key '" + key +
                         "'");
    }
    const auto [it, inserted] = map.emplace(key, RawEntry{value, line_no});
    if (!inserted) {
      throw config_error("config line " + std::to_string(line_no) + ": duplicate key '" + key +
                         "' (already set on line " + std::to_string(it->second.line) + ")");
    }
  }
  return map;
}

// Readers pull typed values out of the raw map, falling back to the caller's
// default. Type mismatches name the key and the line.

[[noreturn]] void fail_key(const RawEntry& e, const std::string& key, const std::string& what) {
  throw config_error("config line " + std::to_string(e.line) + ": key '" + key + "' " + what);
}

double read_number(const RawMap& map, const std::string& key, double def) {
  const auto it = map.find(key);
  if (it == map.end()) return def;
  ExprParser parser(it->second.value);
  const auto v = parser.run();
  if (!v) {
    fail_key(it->second, key,
             "expects a number, got '" + it->second.value + "' (" + parser.message + ")");
  }
  if (!std::isfinite(*v)) fail_key(it->second, key, "evaluates to a non-finite value");
  return *v;
}

std::vector<double> read_number_list(const RawMap& map, const std::string& key,
                                     std::vector<double> def) {
  const auto it = map.find(key);
  if (it == map.end()) return def;
  std::vector<double> out;
  const std::string& s = it->second.value;
  size_t pos = 0;
  while (pos <= s.size()) {
    const size_t comma = s.find(',', pos);
    const std::string piece =
        trim(s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    ExprParser parser(piece);
    const auto v = parser.run();
    if (!v || !std::isfinite(*v)) {
      fail_key(it->second, key, "expects numbers, got '" + piece + "'");
    }
    out.push_back(*v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

long read_integer(const RawMap& map, const std::string& key, long def) {
  const auto it = map.find(key);
  if (it == map.end()) return def;
  const std::string& s = it->second.value;
  char* after = nullptr;
  const long v = std::strtol(s.c_str(), &after, 10);
  if (s.empty() || after != s.c_str() + s.size()) {
    fail_key(it->second, key, "expects an integer, got '" + s + "'");
  }
  return v;
}

std::uint64_t read_unsigned(const RawMap& map, const std::string& key, std::uint64_t def) {
  const auto it = map.find(key);
  if (it == map.end()) return def;
  const std::string& s = it->second.value;
  char* after = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &after, 10);
  if (s.empty() || s[0] == '-' || after != s.c_str() + s.size()) {
    fail_key(it->second, key, "expects a nonnegative integer, got '" + s + "'");
  }
  return v;
}

std::string read_word(const RawMap& map, const std::string& key, const std::string& def,
                      std::initializer_list<const char*> allowed) {
  const auto it = map.find(key);
  const std::string v = it == map.end() ? def : it->second.value;
  for (const char* a : allowed) {
    if (v == a) return v;
  }
  std::string options;
  for (const char* a : allowed) {
    if (!options.empty()) options += " | ";
    options += a;
  }
  fail_key(it->second, key, "must be one of " + options + ", got '" + v + "'");
}

std::string read_text(const RawMap& map, const std::string& key, const std::string& def) {
  const auto it = map.find(key);
  return it == map.end() ? def : it->second.value;
}

// Validation failure for a value that parsed but violates a precondition.
[[noreturn]] void reject(const RawMap& map, const std::string& key, const std::string& what) {
  const auto it = map.find(key);
  const std::string at =
      it == map.end() ? "" : " (config line " + std::to_string(it->second.line) + ")";
  throw config_error("key '" + key + "' " + what + at);
}

void require(bool ok, const RawMap& map, const std::string& key, const std::string& what) {
  if (!ok) reject(map, key, what);
}

// ---------------------------------------------------------------------------
// serialization back to config text

std::vector<std::pair<std::string, std::string>> resolved_pairs(const RunConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  const auto add = [&out](const char* k, std::string v) { out.emplace_back(k, std::move(v)); };

  const char* domain_kind = "interval";
  if (c.domain.shape == Domain::Shape::Rectangle) domain_kind = "rectangle";
  if (c.domain.shape == Domain::Shape::Disk) domain_kind = "disk";
  add("domain.kind", domain_kind);
  add("domain.length", format_double(c.domain.length));
  add("domain.width", format_double(c.domain.extent_x));
  add("domain.height", format_double(c.domain.extent_y));
  add("domain.radius", format_double(c.domain.radius));

  const char* op_kind = "laplacian";
  if (c.operator_kind.variant == OperatorKind::Variant::PucciMinus) op_kind = "pucci-minus";
  if (c.operator_kind.variant == OperatorKind::Variant::PucciPlus) op_kind = "pucci-plus";
  add("operator.kind", op_kind);
  add("operator.lambda_low", format_double(c.operator_kind.spec.lambda_low));
  add("operator.lambda_high", format_double(c.operator_kind.spec.lambda_high));

  add("m", format_double(c.m));
  std::string ladder;
  for (double h : c.h_ladder) {
    if (!ladder.empty()) ladder += ", ";
    ladder += format_double(h);
  }
  add("grid.h", ladder);

  const char* data_kind = "distance";
  if (c.data_kind == InitialDataKind::DistancePower) data_kind = "distance-power";
  if (c.data_kind == InitialDataKind::EigenOfLaplacian) data_kind = "eigen-of-laplacian";
  add("data.kind", data_kind);
  add("data.power", format_double(c.data_power));

  add("flow.t_end", format_double(c.t_end));
  add("flow.eta", format_double(c.eta));
  add("flow.cfl_safety", format_double(c.cfl_safety));
  add("snapshots.kind",
      c.schedule.kind == SnapshotSchedule::Kind::Uniform ? "uniform" : "geometric");
  add("snapshots.dt", format_double(c.schedule.dt_snap));
  add("snapshots.t_first", format_double(c.schedule.t_first));
  add("snapshots.ratio", format_double(c.schedule.ratio));
  add("snapshots.frames", std::to_string(c.frames));
  add("eigen.tol_mu", format_double(c.tol_mu));
  add("eigen.tol_profile", format_double(c.tol_profile));

  const char* transform = "identity";
  if (c.check_transform.kind == Transform::Kind::Log) transform = "log";
  if (c.check_transform.kind == Transform::Kind::Power) transform = "power";
  add("check.transform", transform);
  add("check.power",
      format_double(c.check_transform.kind == Transform::Kind::Power ? c.check_transform.q
                                                                     : 0.5));
  add("check.band", format_double(c.check_band));
  add("check.t_min", format_double(c.check_t_min));
  add("check.bound", format_double(c.check_bound));
  add("check.pairs", std::to_string(c.check_pairs));
  add("check.tol", format_double(c.check_tol));
  add("output.dir", c.output_dir);
  add("seed", std::to_string(c.seed));
  return out;
}

// ---------------------------------------------------------------------------
// artifact plumbing

void guarded_write(const fs::path& path, const std::string& text, bool force) {
  if (fs::exists(path) && !force) {
    throw config_error("refusing to overwrite " + path.string() + "; pass --force");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text_file(path.string(), text);
}

void guard_directory(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    throw config_error("refusing to overwrite contents of " + dir.string() + "; pass --force");
  }
}

fs::path pick_run_dir(const std::string& flag_override, const std::string& config_dir,
                      const std::string& default_name) {
  if (!flag_override.empty()) return flag_override;
  if (!config_dir.empty()) return config_dir;
  return fs::path(output_root()) / default_name;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

nlohmann::json run_manifest(const std::string& command, double wall_seconds) {
  nlohmann::json j;
  j["tool"] = "puccilab";
  j["version"] = PUCCILAB_VERSION;
  j["command"] = command;
  j["wall_seconds"] = wall_seconds;
  return j;
}

nlohmann::json config_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, value] : resolved_pairs(cfg)) j[key] = value;
  return j;
}

void write_run_manifest(const fs::path& dir, nlohmann::json manifest, const RunConfig* cfg,
                        bool force) {
  if (cfg != nullptr) manifest["resolved"] = config_json(*cfg);
  guarded_write(dir / "manifest.json", manifest.dump(2) + "\n", force);
}

std::string node_position(const Grid& g, int node) {
  if (node < 0) return "(none)";
  std::string s = "(" + format_double(g.node_x[node]);
  if (g.ny > 1) s += ", " + format_double(g.node_y[node]);
  return s + ")";
}

// ---------------------------------------------------------------------------
// subcommands

struct CliState {
  std::string config_path;
  std::string out_override;
  std::string field_csv;
  std::string check_what;
  std::string experiment_name;
  std::string report_dir;
  int coarsen = 0;
  bool force = false;
  bool list_experiments = false;
};

RunConfig load_config(const CliState& st) { return config_parse(read_text_file(st.config_path)); }

int cmd_evolve(const CliState& st) {
  const auto start = Clock::now();
  const RunConfig cfg = load_config(st);
  const Grid grid = cfg.make_grid();
  const Field u0 = cfg.initial_data(grid);
  const FlowTrace trace = evolve(cfg.flow_config(), u0);

  const fs::path dir = pick_run_dir(st.out_override, cfg.output_dir, "evolve");
  guard_directory(dir / "trace", st.force);
  write_trace(trace, (dir / "trace").string());

  std::string csv = "t,sup_u,slope_min,slope_max,steps\n";
  for (const Snapshot& s : trace.snapshots) {
    csv += format_double(s.t) + "," + format_double(s.sup_u) + "," + format_double(s.slope_min) +
           "," + format_double(s.slope_max) + "," + std::to_string(s.steps) + "\n";
  }
  guarded_write(dir / "trace_summary.csv", csv, st.force);
  guarded_write(dir / "resolved.cfg", resolved_config_text(cfg), st.force);

  nlohmann::json man = run_manifest("evolve", seconds_since(start));
  man["grid"] = grid_metadata(grid);
  man["total_steps"] = trace.total_steps;
  write_run_manifest(dir, std::move(man), &cfg, st.force);

  const Snapshot& last = trace.snapshots.back();
  std::printf("evolved to t = %g in %lld steps; %zu snapshots; final sup = %.6g\n", last.t,
              static_cast<long long>(trace.total_steps), trace.snapshots.size(), last.sup_u);
  std::printf("wrote %s\n", dir.string().c_str());
  return 0;
}

int cmd_eigen(const CliState& st) {
  const auto start = Clock::now();
  const RunConfig cfg = load_config(st);
  const Grid grid = cfg.make_grid();
  const Field u0 = cfg.initial_data(grid);
  const EigenResult res =
      cfg.m == 1.0
          ? solve_linear(cfg.operator_kind, grid, u0, cfg.tol_mu, cfg.tol_profile)
          : solve_sublinear(cfg.operator_kind, grid, cfg.m, u0, cfg.tol_profile);

  nlohmann::json j;
  j["mode"] = res.mode == EigenResult::Mode::Linear ? "linear" : "sublinear";
  j["m"] = res.m;
  j["mu"] = res.mu;
  j["gamma_star"] = res.gamma_star;
  j["slopes"] = {{"min", res.slopes.min_slope},
                 {"max", res.slopes.max_slope},
                 {"used", res.slopes.used},
                 {"skipped", res.slopes.skipped}};
  j["residual"] = res.residual;
  j["residual_bound"] = res.residual_bound;
  j["total_steps"] = res.total_steps;
  j["warnings"] = res.warnings;
  if (res.mode == EigenResult::Mode::Sublinear) {
    j["data_lower_ratio"] = res.data_lower_ratio;
    j["data_upper_ratio"] = res.data_upper_ratio;
  }
  nlohmann::json log = nlohmann::json::array();
  for (const ConvergenceEntry& e : res.log) {
    log.push_back({{"iteration", e.iteration},
                   {"t", e.t},
                   {"rate", e.rate},
                   {"delta", e.delta},
                   {"sup_state", e.sup_state}});
  }
  j["log"] = std::move(log);

  const fs::path dir = pick_run_dir(st.out_override, cfg.output_dir, "eigen");
  guarded_write(dir / "eigen.json", j.dump(2) + "\n", st.force);
  guarded_write(dir / "profile.csv", field_to_csv(res.profile), st.force);
  guarded_write(dir / "resolved.cfg", resolved_config_text(cfg), st.force);
  nlohmann::json man = run_manifest("eigen", seconds_since(start));
  man["grid"] = grid_metadata(grid);
  write_run_manifest(dir, std::move(man), &cfg, st.force);

  std::printf("mu = %.10g  gamma* = %.6g  residual = %.3g (bound %.3g)  steps = %lld\n", res.mu,
              res.gamma_star, res.residual, res.residual_bound,
              static_cast<long long>(res.total_steps));
  for (const std::string& w : res.warnings) std::printf("warning: %s\n", w.c_str());
  std::printf("wrote %s\n", dir.string().c_str());
  return 0;
}

int cmd_check_concavity(const CliState& st, const RunConfig& cfg, const fs::path& dir,
                        Clock::time_point start) {
  const Grid grid = cfg.make_grid();
  Field field;
  if (!st.field_csv.empty()) {
    field = read_field_csv(grid, st.field_csv);
  } else {
    const FlowTrace trace = evolve(cfg.flow_config(), cfg.initial_data(grid));
    field = trace.snapshots.back().u;
  }

  const ConcavityReport rep = midpoint_concavity(field, cfg.check_transform, cfg.check_band);
  guard_directory(dir, st.force);
  write_concavity_report(rep, grid, dir.string());
  guarded_write(dir / "resolved.cfg", resolved_config_text(cfg), st.force);
  write_run_manifest(dir, run_manifest("check concavity", seconds_since(start)), &cfg, st.force);

  const bool pass = rep.passes();
  std::printf("%s midpoint concavity over %lld triples: worst = %.6g%s\n",
              cfg.check_transform.name(), static_cast<long long>(rep.triple_count), rep.worst,
              pass ? " (pass)" : " (FAIL)");
  if (!pass) {
    std::printf("worst triple: a = %s  b = %s  mid = %s  value = %.6g\n",
                node_position(grid, rep.worst_triple.a).c_str(),
                node_position(grid, rep.worst_triple.b).c_str(),
                node_position(grid, rep.worst_triple.mid).c_str(), rep.worst_triple.value);
  }
  std::printf("wrote %s\n", dir.string().c_str());
  return pass ? 0 : 1;
}

int cmd_check_ab(const CliState& st, const RunConfig& cfg, const fs::path& dir,
                 Clock::time_point start) {
  const Grid grid = cfg.make_grid();
  const FlowTrace trace = evolve(cfg.flow_config(), cfg.initial_data(grid));
  const AbReport rep = ab_constant(trace, cfg.check_band, cfg.check_t_min);
  const bool pass = rep.c_star_w <= cfg.check_bound;

  nlohmann::json j;
  j["c_star_w"] = rep.c_star_w;
  j["c_star_v"] = rep.c_star_v;
  j["bound"] = cfg.check_bound;
  j["band"] = rep.band;
  j["t_min"] = rep.t_min;
  j["evaluations"] = rep.evaluations;
  j["excluded"] = rep.excluded;
  j["times"] = rep.times;
  j["per_time_w"] = rep.per_time_w;
  j["pass"] = pass;
  guarded_write(dir / "ab.json", j.dump(2) + "\n", st.force);
  guarded_write(dir / "resolved.cfg", resolved_config_text(cfg), st.force);
  write_run_manifest(dir, run_manifest("check ab", seconds_since(start)), &cfg, st.force);

  std::printf("C*_w = %.6g (bound %.6g)  C*_v = %.6g  evaluations = %lld%s\n", rep.c_star_w,
              cfg.check_bound, rep.c_star_v, static_cast<long long>(rep.evaluations),
              pass ? " (pass)" : " (FAIL)");
  std::printf("wrote %s\n", dir.string().c_str());
  return pass ? 0 : 1;
}

int cmd_check_comparison(const CliState& st, const RunConfig& cfg, const fs::path& dir,
                         Clock::time_point start) {
  const Grid grid = cfg.make_grid();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double worst = 0.0;
  for (int pair = 0; pair < cfg.check_pairs; ++pair) {
    Field lo(grid, 0.0), hi(grid, 0.0);
    for (int i = 0; i < grid.total_nodes(); ++i) {
      if (grid.node_class[i] != NodeClass::Interior) continue;
      const double base = uni(rng);
      lo[i] = base;
      hi[i] = base + uni(rng);
    }
    const ComparisonReport rep = comparison_harness(cfg.flow_config(), lo, hi, cfg.t_end);
    worst = std::max(worst, rep.max_violation);
  }
  const bool pass = worst <= cfg.check_tol;

  nlohmann::json j;
  j["pairs"] = cfg.check_pairs;
  j["seed"] = cfg.seed;
  j["worst_violation"] = worst;
  j["tolerance"] = cfg.check_tol;
  j["pass"] = pass;
  guarded_write(dir / "comparison.json", j.dump(2) + "\n", st.force);
  guarded_write(dir / "resolved.cfg", resolved_config_text(cfg), st.force);
  write_run_manifest(dir, run_manifest("check comparison", seconds_since(start)), &cfg, st.force);

  std::printf("%d ordered pairs: worst violation = %.3g (tolerance %.3g)%s\n", cfg.check_pairs,
              worst, cfg.check_tol, pass ? " (pass)" : " (FAIL)");
  std::printf("wrote %s\n", dir.string().c_str());
  return pass ? 0 : 1;
}

int cmd_check_barriers(const CliState& st, const RunConfig& cfg, const fs::path& dir,
                       Clock::time_point start) {
  const Grid grid = cfg.make_grid();
  const EllipticitySpec ell = cfg.operator_kind.spec;
  const auto lo = cfg.domain.box_min();
  const auto hi = cfg.domain.box_max();
  const std::array<double, 2> center{0.5 * (lo[0] + hi[0]),
                                     cfg.domain.dimension == 1 ? 0.0 : 0.5 * (lo[1] + hi[1])};
  const BarrierSpec spec = BarrierSpec::heat_kernel_sub(ell, cfg.domain.dimension, center);
  const ResidualReport rep =
      residual_check(spec, grid, TimeWindow{}, ResidualSign::Sub, &cfg.operator_kind);

  const double m_eff = cfg.m > 1.0 ? cfg.m : 2.0;
  const int dim = cfg.domain.dimension;
  const BarenblattExponents e = barenblatt_exponents(ell, dim, m_eff);
  double identity_worst = std::abs(e.alpha + e.beta - 1.0);
  identity_worst = std::max(identity_worst, std::abs(2.0 * e.k * e.denom - 1.0));
  identity_worst = std::max(
      identity_worst, std::abs(e.alpha * e.denom - dim * (m_eff - 1.0) * ell.lambda_high));
  identity_worst = std::max(identity_worst, std::abs(e.beta * e.denom - 2.0 * ell.lambda_low));

  nlohmann::json j;
  j["barrier"] = "heat-kernel-sub";
  j["operator"] = cfg.operator_kind.name();
  j["worst"] = rep.worst;
  j["worst_abs"] = rep.worst_abs;
  j["tolerance"] = rep.tolerance;
  j["worst_time"] = rep.worst_time;
  j["evaluations"] = rep.evaluations;
  j["times"] = rep.times;
  j["extremes"] = rep.extremes;
  j["exponents"] = {{"m", m_eff},
                    {"alpha", e.alpha},
                    {"beta", e.beta},
                    {"k", e.k},
                    {"denom", e.denom},
                    {"identity_worst", identity_worst}};
  const bool pass = rep.pass && identity_worst == 0.0;
  j["pass"] = pass;
  guarded_write(dir / "barriers.json", j.dump(2) + "\n", st.force);
  guarded_write(dir / "resolved.cfg", resolved_config_text(cfg), st.force);
  write_run_manifest(dir, run_manifest("check barriers", seconds_since(start)), &cfg, st.force);

  std::printf(
      "heat-kernel residual under %s: worst = %.3g (tolerance %.3g), exponent identities off "
      "by %.3g%s\n",
      cfg.operator_kind.name(), rep.worst, rep.tolerance, identity_worst,
      pass ? " (pass)" : " (FAIL)");
  std::printf("wrote %s\n", dir.string().c_str());
  return pass ? 0 : 1;
}

int cmd_check(const CliState& st) {
  const auto start = Clock::now();
  const RunConfig cfg = load_config(st);
  if (st.check_what == "ab" && cfg.m <= 1.0) {
    throw config_error("check ab needs a degenerate flow; set m > 1 in the config");
  }
  const fs::path dir = pick_run_dir(st.out_override, cfg.output_dir, "check-" + st.check_what);
  if (st.check_what == "concavity") return cmd_check_concavity(st, cfg, dir, start);
  if (st.check_what == "ab") return cmd_check_ab(st, cfg, dir, start);
  if (st.check_what == "comparison") return cmd_check_comparison(st, cfg, dir, start);
  return cmd_check_barriers(st, cfg, dir, start);
}

int cmd_experiment(const CliState& st) {
  if (st.list_experiments) {
    for (const std::string& name : experiment_names()) {
      std::printf("%-24s %s\n", name.c_str(), experiment_description(name).c_str());
    }
    return 0;
  }
  if (st.experiment_name.empty()) {
    std::fprintf(stderr, "error: experiment name required (or --list)\n");
    return 2;
  }

  const auto start = Clock::now();
  ExperimentOptions opts;
  opts.coarsen = st.coarsen;
  std::vector<ExperimentOutcome> outcomes;
  if (st.experiment_name == "all") {
    outcomes = run_all_experiments(opts);
  } else {
    outcomes.push_back(run_experiment(st.experiment_name, opts));
  }

  const fs::path dir =
      pick_run_dir(st.out_override, "", "experiment-" + st.experiment_name);
  for (const ExperimentOutcome& out : outcomes) {
    guarded_write(dir / (out.name + ".json"), outcome_to_json(out), st.force);
  }
  guarded_write(dir / "summary.csv", summary_csv_text(outcomes), st.force);
  nlohmann::json man = run_manifest("experiment", seconds_since(start));
  man["experiment"] = st.experiment_name;
  man["coarsen"] = st.coarsen;
  write_run_manifest(dir, std::move(man), nullptr, st.force);

  bool all_pass = true;
  for (const ExperimentOutcome& out : outcomes) {
    std::fputs(format_outcome(out).c_str(), stdout);
    all_pass = all_pass && out.pass;
  }
  std::printf("wrote %s\n", dir.string().c_str());
  return all_pass ? 0 : 1;
}

int cmd_report(const CliState& st) {
  const fs::path root(st.report_dir);
  if (!fs::is_directory(root)) {
    throw config_error("report needs an existing directory, got '" + st.report_dir + "'");
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const fs::path& p = entry.path();
    if (p.extension() != ".json" || p.filename() == "summary.json") continue;
    files.push_back(p);
  }
  std::sort(files.begin(), files.end());

  nlohmann::json experiments = nlohmann::json::array();
  nlohmann::json runs = nlohmann::json::array();
  nlohmann::json eigenpairs = nlohmann::json::array();
  std::vector<ExperimentOutcome> outcomes;
  bool all_pass = true;
  for (const fs::path& p : files) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text_file(p.string()));
    } catch (const nlohmann::json::exception&) {
      continue;  // not a JSON artifact of ours
    }
    const std::string rel = fs::relative(p, root).string();
    if (j.contains("checks") && j.contains("name") && j.contains("pass")) {
      outcomes.push_back(outcome_from_json(j.dump()));
      j["path"] = rel;
      experiments.push_back(std::move(j));
      all_pass = all_pass && outcomes.back().pass;
    } else if (j.value("tool", "") == "puccilab") {
      runs.push_back({{"path", rel},
                      {"command", j.value("command", "")},
                      {"version", j.value("version", "")},
                      {"wall_seconds", j.value("wall_seconds", 0.0)}});
    } else if (j.contains("mu") && j.contains("mode")) {
      eigenpairs.push_back({{"path", rel},
                            {"mode", j["mode"]},
                            {"mu", j["mu"]},
                            {"residual", j.value("residual", 0.0)}});
    }
  }
  if (experiments.empty() && runs.empty() && eigenpairs.empty()) {
    throw config_error("nothing to aggregate under " + root.string());
  }

  nlohmann::json summary;
  summary["experiments"] = std::move(experiments);
  summary["runs"] = std::move(runs);
  summary["eigenpairs"] = std::move(eigenpairs);
  guarded_write(root / "summary.json", summary.dump(2) + "\n", st.force);
  guarded_write(root / "summary.csv", summary_csv_text(outcomes), st.force);

  std::printf("aggregated %zu experiment outcomes, %zu run manifests, %zu eigenpairs\n",
              outcomes.size(), summary["runs"].size(), summary["eigenpairs"].size());
  std::printf("wrote %s and summary.csv\n", (root / "summary.json").string().c_str());
  return all_pass ? 0 : 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// public surface

Grid RunConfig::make_grid(size_t level) const {
  return build_grid(domain, h_ladder.at(level));
}

FlowConfig RunConfig::flow_config() const {
  FlowConfig fc;
  fc.m = m;
  fc.operator_kind = operator_kind;
  fc.eta = eta;
  fc.cfl_safety = cfl_safety;
  fc.t_end = t_end;
  fc.schedule = schedule;
  fc.frames = frames;
  return fc;
}

Field RunConfig::initial_data(const Grid& grid) const {
  return canonical_initial_data(grid, data_kind, data_power, m).field;
}

RunConfig config_parse(const std::string& text) {
  const RawMap map = scan_lines(text);
  RunConfig cfg;

  const std::string domain_kind =
      read_word(map, "domain.kind", "interval", {"interval", "rectangle", "disk"});
  const double length = read_number(map, "domain.length", M_PI);
  const double width = read_number(map, "domain.width", 1.0);
  const double height = read_number(map, "domain.height", 1.0);
  const double radius = read_number(map, "domain.radius", 1.0);
  require(length > 0.0, map, "domain.length", "must be positive");
  require(width > 0.0, map, "domain.width", "must be positive");
  require(height > 0.0, map, "domain.height", "must be positive");
  require(radius > 0.0, map, "domain.radius", "must be positive");
  if (domain_kind == "interval") {
    cfg.domain = Domain::interval(length);
  } else if (domain_kind == "rectangle") {
    cfg.domain = Domain::rectangle(width, height);
  } else {
    cfg.domain = Domain::disk(radius);
  }

  const std::string op_kind = read_word(map, "operator.kind", "laplacian",
                                        {"laplacian", "pucci-minus", "pucci-plus"});
  EllipticitySpec ell;
  ell.lambda_low = read_number(map, "operator.lambda_low", 1.0);
  ell.lambda_high = read_number(map, "operator.lambda_high", 1.0);
  require(ell.lambda_low > 0.0, map, "operator.lambda_low", "must be positive");
  if (ell.lambda_high < ell.lambda_low) {
    reject(map, "operator.lambda_high",
           "= " + format_double(ell.lambda_high) + " is below operator.lambda_low = " +
               format_double(ell.lambda_low));
  }
  if (op_kind == "laplacian") {
    cfg.operator_kind = OperatorKind::make_laplacian(ell);
  } else if (op_kind == "pucci-minus") {
    cfg.operator_kind = OperatorKind::make_pucci_minus(ell);
  } else {
    cfg.operator_kind = OperatorKind::make_pucci_plus(ell);
  }

  cfg.m = read_number(map, "m", 1.0);
  require(cfg.m >= 1.0, map, "m", "must be at least 1");

  cfg.h_ladder = read_number_list(map, "grid.h", {M_PI / 64.0});
  require(!cfg.h_ladder.empty(), map, "grid.h", "needs at least one spacing");
  const double h_limit = cfg.domain.min_extent() / 4.0;
  for (double h : cfg.h_ladder) {
    require(h > 0.0, map, "grid.h", "spacings must be positive");
    if (h > h_limit) {
      reject(map, "grid.h",
             "= " + format_double(h) + " exceeds the grid limit min_extent/4 = " +
                 format_double(h_limit) + " for this domain");
    }
  }

  const std::string data_kind = read_word(map, "data.kind", "distance",
                                          {"distance", "distance-power", "eigen-of-laplacian"});
  cfg.data_kind = InitialDataKind::Distance;
  if (data_kind == "distance-power") cfg.data_kind = InitialDataKind::DistancePower;
  if (data_kind == "eigen-of-laplacian") cfg.data_kind = InitialDataKind::EigenOfLaplacian;
  cfg.data_power = read_number(map, "data.power", 0.5);
  require(cfg.data_power > 0.0, map, "data.power", "must be positive");

  cfg.t_end = read_number(map, "flow.t_end", 1.0);
  require(cfg.t_end > 0.0, map, "flow.t_end", "must be positive");
  cfg.eta = read_number(map, "flow.eta", 0.0);
  require(cfg.eta >= 0.0, map, "flow.eta", "must be nonnegative");
  if (cfg.m == 1.0 && cfg.eta != 0.0) {
    reject(map, "flow.eta", "must be 0 when m = 1");
  }
  cfg.cfl_safety = read_number(map, "flow.cfl_safety", 0.5);
  require(cfg.cfl_safety > 0.0 && cfg.cfl_safety <= 1.0, map, "flow.cfl_safety",
          "must lie in (0, 1]");

  const std::string snap_kind =
      read_word(map, "snapshots.kind", "uniform", {"uniform", "geometric"});
  cfg.schedule.kind = snap_kind == "uniform" ? SnapshotSchedule::Kind::Uniform
                                             : SnapshotSchedule::Kind::Geometric;
  cfg.schedule.dt_snap = read_number(map, "snapshots.dt", 0.0);
  require(cfg.schedule.dt_snap >= 0.0, map, "snapshots.dt", "must be nonnegative");
  cfg.schedule.t_first = read_number(map, "snapshots.t_first", 0.0);
  require(cfg.schedule.t_first >= 0.0, map, "snapshots.t_first", "must be nonnegative");
  cfg.schedule.ratio = read_number(map, "snapshots.ratio", 2.0);
  require(cfg.schedule.ratio > 1.0, map, "snapshots.ratio", "must exceed 1");
  cfg.frames = static_cast<int>(read_integer(map, "snapshots.frames", 8));
  require(cfg.frames >= 1, map, "snapshots.frames", "must be at least 1");

  cfg.tol_mu = read_number(map, "eigen.tol_mu", 1e-5);
  require(cfg.tol_mu > 0.0, map, "eigen.tol_mu", "must be positive");
  cfg.tol_profile = read_number(map, "eigen.tol_profile", 1e-4);
  require(cfg.tol_profile > 0.0, map, "eigen.tol_profile", "must be positive");

  const std::string transform = read_word(map, "check.transform", "log",
                                          {"identity", "log", "sqrt", "power"});
  const double check_power = read_number(map, "check.power", 0.5);
  require(check_power > 0.0, map, "check.power", "must be positive");
  if (transform == "identity") {
    cfg.check_transform = Transform::identity();
  } else if (transform == "log") {
    cfg.check_transform = Transform::log();
  } else if (transform == "sqrt") {
    cfg.check_transform = Transform::power(0.5);
  } else {
    cfg.check_transform = Transform::power(check_power);
  }
  cfg.check_band = read_number(map, "check.band", 4.0);
  require(cfg.check_band >= 0.0, map, "check.band", "must be nonnegative");
  cfg.check_t_min = read_number(map, "check.t_min", 0.0);
  require(cfg.check_t_min >= 0.0, map, "check.t_min", "must be nonnegative");
  cfg.check_bound = read_number(map, "check.bound", 2.5);
  cfg.check_pairs = static_cast<int>(read_integer(map, "check.pairs", 100));
  require(cfg.check_pairs >= 1, map, "check.pairs", "must be at least 1");
  cfg.check_tol = read_number(map, "check.tol", 1e-12);
  require(cfg.check_tol >= 0.0, map, "check.tol", "must be nonnegative");

  cfg.output_dir = read_text(map, "output.dir", "");
  cfg.seed = read_unsigned(map, "seed", 1);
  return cfg;
}

std::string config_defaults() {
  std::string out;
  for (const KeyDoc& k : kKeys) {
    std::string line = std::string(k.key) + " = " + k.def;
    if (line.size() < 28) line.resize(28, ' ');
    out += line + "  # " + k.doc + "\n";
  }
  return out;
}

std::string resolved_config_text(const RunConfig& config) {
  std::string out;
  for (const auto& [key, value] : resolved_pairs(config)) {
    out += key + " = " + value + "\n";
  }
  return out;
}

std::string output_root() {
  const char* env = std::getenv("PUCCILAB_OUT");
  return env != nullptr && *env != '\0' ? env : "runs";
}

int cli(int argc, const char* const* argv) {
  CLI::App app{"numerical laboratory for extremal diffusion flows"};
  app.set_version_flag("--version", std::string(PUCCILAB_VERSION));
  app.require_subcommand(0, 1);

  CliState st;
  bool show_defaults = false;
  int threads = 0;
  app.add_flag("--help-defaults", show_defaults,
               "print every config key with its default and exit");
  app.add_flag("--force", st.force, "allow overwriting existing output files");
  app.add_option("--threads", threads, "cap the OpenMP worker count")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", st.out_override, "output directory (overrides output.dir)");

  CLI::App* evolve_cmd = app.add_subcommand("evolve", "run the diffusion flow, emit its trace");
  evolve_cmd->add_option("config", st.config_path, "config file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* eigen_cmd =
      app.add_subcommand("eigen", "extract the principal eigenpair by renormalized flow");
  eigen_cmd->add_option("config", st.config_path, "config file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* check_cmd = app.add_subcommand("check", "run one certification check");
  check_cmd->add_option("what", st.check_what, "concavity | ab | comparison | barriers")
      ->required()
      ->check(CLI::IsMember({"concavity", "ab", "comparison", "barriers"}));
  check_cmd->add_option("config", st.config_path, "config file")
      ->required()
      ->check(CLI::ExistingFile);
  check_cmd
      ->add_option("--field", st.field_csv,
                   "field CSV to check instead of the evolved state (concavity only)")
      ->check(CLI::ExistingFile);

  CLI::App* exp_cmd = app.add_subcommand("experiment", "run registered experiments");
  exp_cmd->add_option("name", st.experiment_name, "experiment name, or 'all'");
  exp_cmd->add_option("--coarsen", st.coarsen, "halve registered resolutions this many times")
      ->check(CLI::NonNegativeNumber);
  exp_cmd->add_flag("--list", st.list_experiments, "list experiment names and exit");

  CLI::App* report_cmd = app.add_subcommand("report", "aggregate a directory of runs");
  report_cmd->add_option("dir", st.report_dir, "directory holding run artifacts")->required();

  // Global flags are accepted on either side of the subcommand.
  for (CLI::App* sub : {evolve_cmd, eigen_cmd, check_cmd, exp_cmd, report_cmd}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
  if (show_defaults) {
    std::fputs(config_defaults().c_str(), stdout);
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::fputs(app.help().c_str(), stdout);
    return 2;
  }

  try {
    if (evolve_cmd->parsed()) return cmd_evolve(st);
    if (eigen_cmd->parsed()) return cmd_eigen(st);
    if (check_cmd->parsed()) return cmd_check(st);
    if (exp_cmd->parsed()) return cmd_experiment(st);
    if (report_cmd->parsed()) return cmd_report(st);
  } catch (const input_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const config_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const numeric_error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    if (!e.diagnostics.empty()) {
      std::fprintf(stderr, "diagnostics:");
      for (double d : e.diagnostics) std::fprintf(stderr, " %g", d);
      std::fprintf(stderr, "\n");
    }
    return 3;
  }
  return 2;
}

}  // namespace pucci
