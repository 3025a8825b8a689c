#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "pucci/errors.hpp"
#include "pucci/experiments.hpp"
#include "pucci/field_io.hpp"
#include "pucci/grid.hpp"
#include "pucci/harness.hpp"

using namespace pucci;
using doctest::Approx;

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("puccilab-harness-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_config(const fs::path& dir, const std::string& text) {
  const fs::path path = dir / "run.cfg";
  write_text_file(path.string(), text);
  return path.string();
}

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

// Runs the CLI in process with stdout and stderr redirected to files, so
// assertions can inspect what a user would see on each stream.
CliRun run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("puccilab");
  for (const std::string& a : args) argv.push_back(a.c_str());

  const fs::path out_path = fs::temp_directory_path() / "puccilab-harness-stdout.txt";
  const fs::path err_path = fs::temp_directory_path() / "puccilab-harness-stderr.txt";
  std::fflush(stdout);
  std::fflush(stderr);
  const int saved_out = dup(1);
  const int saved_err = dup(2);
  const int out_fd = open(out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  const int err_fd = open(err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  dup2(out_fd, 1);
  dup2(err_fd, 2);
  close(out_fd);
  close(err_fd);

  CliRun run;
  run.code = cli(static_cast<int>(argv.size()), argv.data());

  std::fflush(stdout);
  std::fflush(stderr);
  dup2(saved_out, 1);
  dup2(saved_err, 2);
  close(saved_out);
  close(saved_err);
  run.out = read_text_file(out_path.string());
  run.err = read_text_file(err_path.string());
  return run;
}

nlohmann::json read_json(const fs::path& path) {
  return nlohmann::json::parse(read_text_file(path.string()));
}

}  // namespace

TEST_CASE("numeric expressions evaluate inside config values") {
  CHECK(config_parse("grid.h = pi/256").h_ladder.front() == Approx(M_PI / 256.0).epsilon(1e-15));
  CHECK(config_parse("domain.length = 2*pi").domain.length == Approx(2.0 * M_PI));
  CHECK(config_parse("flow.t_end = (1+3)/8").t_end == Approx(0.5));
  CHECK(config_parse("flow.t_end = -(-2)").t_end == Approx(2.0));
  CHECK(config_parse("flow.t_end = 1.5e-1*2").t_end == Approx(0.3));

  CHECK_THROWS_WITH_AS(config_parse("flow.t_end = pi pi"), doctest::Contains("unexpected text"),
                       config_error);
  CHECK_THROWS_WITH_AS(config_parse("flow.t_end = tau"), doctest::Contains("unknown symbol"),
                       config_error);
  CHECK_THROWS_WITH_AS(config_parse("flow.t_end = 1/0"), doctest::Contains("non-finite"),
                       config_error);
  CHECK_THROWS_WITH_AS(config_parse("flow.t_end = (2"), doctest::Contains("missing ')'"),
                       config_error);
}

TEST_CASE("defaults parse, round-trip, and match the documented table") {
  const RunConfig empty = config_parse("");
  const RunConfig documented = config_parse(config_defaults());
  CHECK(resolved_config_text(empty) == resolved_config_text(documented));

  const RunConfig reparsed = config_parse(resolved_config_text(empty));
  CHECK(resolved_config_text(reparsed) == resolved_config_text(empty));

  CHECK(empty.m == 1.0);
  CHECK(empty.h_ladder.size() == 1);
  CHECK(empty.h_ladder.front() == Approx(M_PI / 64.0));
  CHECK(empty.domain.shape == Domain::Shape::Interval);
  CHECK(empty.schedule.ratio == 2.0);
  CHECK(empty.check_bound == 2.5);
  CHECK(empty.seed == 1);
}

TEST_CASE("config errors name the key and the line") {
  CHECK_THROWS_WITH_AS(config_parse("m = 1\nm = 2\n"),
                       doctest::Contains("line 2: duplicate key 'm' (already set on line 1)"),
                       config_error);
  CHECK_THROWS_WITH_AS(config_parse("grid.spacing = 1\n"),
                       doctest::Contains("unknown key 'grid.spacing'"), config_error);
  CHECK_THROWS_WITH_AS(config_parse("just words\n"), doctest::Contains("expected 'key = value'"),
                       config_error);
  CHECK_THROWS_WITH_AS(config_parse("snapshots.frames = soon\n"),
                       doctest::Contains("expects an integer"), config_error);
  CHECK_THROWS_WITH_AS(config_parse("operator.kind = heat\n"),
                       doctest::Contains("must be one of"), config_error);
  CHECK_THROWS_WITH_AS(config_parse("m = 0.5\n"), doctest::Contains("at least 1"), config_error);
  CHECK_THROWS_WITH_AS(config_parse("flow.eta = 0.1\n"),
                       doctest::Contains("must be 0 when m = 1"), config_error);
  CHECK_THROWS_WITH_AS(config_parse("seed = -4\n"),
                       doctest::Contains("nonnegative integer"), config_error);

  // Both ellipticity constants appear in the rejection, not just the bad one.
  try {
    config_parse("operator.lambda_low = 2\noperator.lambda_high = 0.5\n");
    CHECK(false);
  } catch (const config_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("lambda_high") != std::string::npos);
    CHECK(msg.find("lambda_low") != std::string::npos);
    CHECK(msg.find("0.5") != std::string::npos);
    CHECK(msg.find("2") != std::string::npos);
  }

  // Spacing limit names the offending value and the domain bound.
  CHECK_THROWS_WITH_AS(config_parse("grid.h = 1\n"), doctest::Contains("exceeds the grid limit"),
                       config_error);
}

TEST_CASE("grid ladders parse coarse to fine") {
  const RunConfig cfg = config_parse("grid.h = pi/64, pi/128, pi/256\n");
  REQUIRE(cfg.h_ladder.size() == 3);
  CHECK(cfg.h_ladder[0] == Approx(M_PI / 64.0));
  CHECK(cfg.h_ladder[1] == Approx(M_PI / 128.0));
  CHECK(cfg.h_ladder[2] == Approx(M_PI / 256.0));
  CHECK(cfg.make_grid().h == Approx(M_PI / 256.0));
  CHECK(cfg.make_grid(0).h == Approx(M_PI / 64.0));
}

TEST_CASE("cli handles help, version, and usage errors") {
  CHECK(run_cli({"--version"}).code == 0);
  CHECK(run_cli({"--version"}).out.find("1.0.0") != std::string::npos);

  const CliRun help = run_cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("evolve") != std::string::npos);
  CHECK(help.out.find("report") != std::string::npos);

  const CliRun defaults = run_cli({"--help-defaults"});
  CHECK(defaults.code == 0);
  CHECK(defaults.out.find("grid.h") != std::string::npos);
  CHECK(defaults.out.find("pi/64") != std::string::npos);

  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"frobnicate"}).code == 2);
  CHECK(run_cli({"eigen"}).code == 2);
  CHECK(run_cli({"eigen", "/no/such/file.cfg"}).code == 2);
  CHECK(run_cli({"check", "entropy", "configs/linear-1d.cfg"}).code == 2);
}

TEST_CASE("config errors from the cli land on stderr with exit 2") {
  const fs::path dir = fresh_dir("badcfg");
  const std::string cfg = write_config(dir, "grid.h = 1\n");
  const CliRun run = run_cli({"eigen", cfg});
  CHECK(run.code == 2);
  CHECK(run.err.find("grid.h") != std::string::npos);
  CHECK(run.err.find("exceeds the grid limit") != std::string::npos);
}

TEST_CASE("eigen run writes artifacts and reproduces bit for bit from its manifest") {
  const fs::path dir = fresh_dir("eigen");
  const std::string cfg = write_config(dir,
                                       "domain.kind = interval\n"
                                       "domain.length = pi\n"
                                       "grid.h = pi/32\n");
  const fs::path run1 = dir / "run1";
  const CliRun first = run_cli({"--out", run1.string(), "eigen", cfg});
  CHECK(first.code == 0);
  CHECK(first.out.find("mu = ") != std::string::npos);

  const nlohmann::json eig = read_json(run1 / "eigen.json");
  CHECK(eig["mode"] == "linear");
  CHECK(eig["mu"].get<double>() == Approx(1.0).epsilon(0.01));
  CHECK(fs::exists(run1 / "profile.csv"));

  const nlohmann::json man = read_json(run1 / "manifest.json");
  CHECK(man["tool"] == "puccilab");
  CHECK(man["command"] == "eigen");
  CHECK(man["version"] == PUCCILAB_VERSION);
  CHECK(man["resolved"]["grid.h"].get<std::string>() ==
        format_double(M_PI / 32.0));

  // The resolved config is a complete restatement of the run; replaying it
  // reproduces the measured eigenvalue exactly.
  const fs::path run2 = dir / "run2";
  const CliRun second = run_cli({"--out", run2.string(), "eigen", (run1 / "resolved.cfg").string()});
  CHECK(second.code == 0);
  const nlohmann::json replay = read_json(run2 / "eigen.json");
  CHECK(replay["mu"].get<double>() == eig["mu"].get<double>());
  CHECK(replay["total_steps"] == eig["total_steps"]);

  // Existing artifacts are never overwritten silently. Global flags are
  // accepted after the subcommand as well as before it.
  const CliRun clobber = run_cli({"eigen", cfg, "--out", run1.string()});
  CHECK(clobber.code == 2);
  CHECK(clobber.err.find("--force") != std::string::npos);
  CHECK(run_cli({"eigen", cfg, "--out", run1.string(), "--force"}).code == 0);
}

TEST_CASE("evolve run writes a trace directory and summary") {
  const fs::path dir = fresh_dir("evolve");
  const std::string cfg = write_config(dir,
                                       "grid.h = pi/32\n"
                                       "flow.t_end = 1/4\n"
                                       "snapshots.dt = 1/16\n");
  const fs::path out = dir / "out";
  const CliRun run = run_cli({"--out", out.string(), "evolve", cfg});
  CHECK(run.code == 0);
  CHECK(fs::exists(out / "trace" / "u_0000.csv"));
  CHECK(fs::exists(out / "trace" / "manifest.json"));
  CHECK(fs::exists(out / "manifest.json"));

  const std::string summary = read_text_file((out / "trace_summary.csv").string());
  CHECK(summary.rfind("t,sup_u,slope_min,slope_max,steps\n", 0) == 0);
  CHECK(std::count(summary.begin(), summary.end(), '\n') >= 4);
}

TEST_CASE("check concavity separates log-concave from log-convex fields") {
  const fs::path dir = fresh_dir("concavity");
  const std::string cfg = write_config(dir,
                                       "domain.kind = interval\n"
                                       "domain.length = 1\n"
                                       "grid.h = 1/32\n"
                                       "check.transform = log\n");
  const RunConfig parsed = config_parse(read_text_file(cfg));
  const Grid grid = parsed.make_grid();

  Field concave(grid, 0.0);
  Field convex(grid, 0.0);
  for (int i = 0; i < grid.total_nodes(); ++i) {
    if (grid.node_class[i] == NodeClass::Exterior) continue;
    const double x = grid.node_x[i];
    concave[i] = std::exp(-(x - 0.5) * (x - 0.5));
    convex[i] = std::exp((x - 0.5) * (x - 0.5));
  }
  write_field_csv(concave, (dir / "concave.csv").string());
  write_field_csv(convex, (dir / "convex.csv").string());

  const fs::path good = dir / "good";
  const CliRun pass_run =
      run_cli({"--out", good.string(), "check", "concavity", cfg, "--field",
               (dir / "concave.csv").string()});
  CHECK(pass_run.code == 0);
  CHECK(pass_run.out.find("pass") != std::string::npos);
  CHECK(fs::exists(good / "report.json"));

  const fs::path bad = dir / "bad";
  const CliRun fail_run = run_cli({"--out", bad.string(), "check", "concavity", cfg, "--field",
                                   (dir / "convex.csv").string()});
  CHECK(fail_run.code == 1);
  CHECK(fail_run.out.find("FAIL") != std::string::npos);
  CHECK(fail_run.out.find("worst triple") != std::string::npos);
}

TEST_CASE("check comparison certifies order preservation on random pairs") {
  const fs::path dir = fresh_dir("comparison");
  const std::string cfg = write_config(dir,
                                       "domain.kind = interval\n"
                                       "domain.length = 1\n"
                                       "grid.h = 1/16\n"
                                       "flow.t_end = 1/20\n"
                                       "check.pairs = 3\n"
                                       "seed = 7\n");
  const fs::path out = dir / "out";
  const CliRun run = run_cli({"--out", out.string(), "check", "comparison", cfg});
  CHECK(run.code == 0);
  const nlohmann::json j = read_json(out / "comparison.json");
  CHECK(j["pairs"] == 3);
  CHECK(j["seed"] == 7);
  CHECK(j["worst_violation"].get<double>() <= 1e-12);
  CHECK(j["pass"] == true);
}

TEST_CASE("check ab needs a degenerate flow and then certifies the bound") {
  const fs::path dir = fresh_dir("ab");
  const std::string linear = write_config(dir, "grid.h = pi/32\n");
  const CliRun rejected = run_cli({"check", "ab", linear});
  CHECK(rejected.code == 2);
  CHECK(rejected.err.find("m > 1") != std::string::npos);

  const fs::path cfg_dir = fresh_dir("ab-deg");
  const std::string cfg = write_config(cfg_dir,
                                       "domain.kind = interval\n"
                                       "domain.length = 1\n"
                                       "grid.h = 1/32\n"
                                       "m = 2\n"
                                       "flow.t_end = 2\n"
                                       "snapshots.kind = uniform\n"
                                       "snapshots.dt = 1/8\n"
                                       "check.t_min = 1/2\n"
                                       "check.bound = 2.5\n");
  const fs::path out = cfg_dir / "out";
  const CliRun run = run_cli({"--out", out.string(), "check", "ab", cfg});
  CHECK(run.code == 0);
  const nlohmann::json j = read_json(out / "ab.json");
  CHECK(j["c_star_w"].get<double>() <= 2.5);
  CHECK(j["pass"] == true);
  CHECK(j["t_min"].get<double>() == Approx(0.5));
}

TEST_CASE("check barriers certifies the residual and the exponent identities") {
  const fs::path dir = fresh_dir("barriers");
  const std::string cfg = write_config(dir,
                                       "domain.kind = rectangle\n"
                                       "domain.width = 1\n"
                                       "domain.height = 1\n"
                                       "grid.h = 1/24\n"
                                       "operator.kind = pucci-minus\n"
                                       "operator.lambda_low = 1\n"
                                       "operator.lambda_high = 2\n");
  const fs::path out = dir / "out";
  const CliRun run = run_cli({"--out", out.string(), "check", "barriers", cfg});
  CHECK(run.code == 0);
  const nlohmann::json j = read_json(out / "barriers.json");
  CHECK(j["pass"] == true);
  CHECK(j["exponents"]["identity_worst"].get<double>() == 0.0);
  CHECK(j["worst"].get<double>() >= -j["tolerance"].get<double>());
}

TEST_CASE("experiment subcommand runs the registry and refuses to clobber") {
  const CliRun listing = run_cli({"experiment", "--list"});
  CHECK(listing.code == 0);
  CHECK(listing.out.find("linear-1d-laplacian") != std::string::npos);

  const CliRun unknown = run_cli({"experiment", "no-such-thing"});
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("registered: linear-1d-laplacian") != std::string::npos);

  CHECK(run_cli({"experiment"}).code == 2);

  const fs::path dir = fresh_dir("experiment");
  const fs::path out = dir / "out";
  const CliRun run =
      run_cli({"--out", out.string(), "experiment", "linear-1d-laplacian", "--coarsen", "2"});
  CHECK(run.code == 0);
  CHECK(run.out.find("[PASS]") != std::string::npos);
  CHECK(fs::exists(out / "linear-1d-laplacian.json"));
  CHECK(fs::exists(out / "summary.csv"));

  const CliRun clobber =
      run_cli({"--out", out.string(), "experiment", "linear-1d-laplacian", "--coarsen", "2"});
  CHECK(clobber.code == 2);
  CHECK(clobber.err.find("--force") != std::string::npos);
}

TEST_CASE("default output root honors the environment override") {
  const fs::path dir = fresh_dir("outroot");
  setenv("PUCCILAB_OUT", dir.c_str(), 1);
  CHECK(output_root() == dir.string());
  const CliRun run = run_cli({"experiment", "domain-scaling", "--coarsen", "2"});
  unsetenv("PUCCILAB_OUT");
  CHECK(run.code == 0);
  CHECK(fs::exists(dir / "experiment-domain-scaling" / "summary.csv"));
  CHECK(output_root() == "runs");
}

TEST_CASE("report aggregates experiments, runs, and eigenpairs") {
  const fs::path dir = fresh_dir("report");

  const std::string cfg = write_config(dir, "grid.h = pi/16\n");
  CHECK(run_cli({"--out", (dir / "eig").string(), "eigen", cfg}).code == 0);
  CHECK(run_cli({"--out", (dir / "exp").string(), "experiment", "domain-scaling", "--coarsen",
                 "2"})
            .code == 0);

  const CliRun run = run_cli({"report", dir.string()});
  CHECK(run.code == 0);
  const nlohmann::json summary = read_json(dir / "summary.json");
  REQUIRE(summary["experiments"].size() == 1);
  CHECK(summary["experiments"][0]["name"] == "domain-scaling");
  CHECK(summary["eigenpairs"].size() == 1);
  CHECK(summary["eigenpairs"][0]["mu"].get<double>() == Approx(1.0).epsilon(0.05));
  bool saw_eigen_manifest = false;
  for (const auto& r : summary["runs"]) {
    saw_eigen_manifest = saw_eigen_manifest || r["command"] == "eigen";
  }
  CHECK(saw_eigen_manifest);

  const std::string csv = read_text_file((dir / "summary.csv").string());
  CHECK(csv.rfind("experiment,check,measured", 0) == 0);
  CHECK(csv.find("domain-scaling") != std::string::npos);

  const fs::path empty = fresh_dir("report-empty");
  CHECK(run_cli({"report", empty.string()}).code == 2);
  CHECK(run_cli({"report", (empty / "missing").string()}).code == 2);
}

TEST_CASE("outcome JSON round-trips through the inverse parser") {
  ExperimentOutcome out;
  out.name = "sample";
  out.description = "round trip probe";
  out.coarsen = 1;
  out.pass = false;
  out.wall_seconds = 0.25;
  CheckOutcome c;
  c.name = "bound";
  c.claim = "measured stays below the bound";
  c.measured = 0.125;
  c.relation = CheckRelation::LessEq;
  c.bound = 0.1;
  c.margin = -0.025;
  c.pass = false;
  c.ladder = {0.5, 0.25, 0.125};
  out.checks.push_back(c);
  c.name = "floor";
  c.relation = CheckRelation::GreaterEq;
  c.ladder.clear();
  c.pass = true;
  out.checks.push_back(c);

  const ExperimentOutcome back = outcome_from_json(outcome_to_json(out));
  CHECK(back.name == out.name);
  CHECK(back.description == out.description);
  CHECK(back.coarsen == out.coarsen);
  CHECK(back.pass == out.pass);
  CHECK(back.wall_seconds == out.wall_seconds);
  REQUIRE(back.checks.size() == 2);
  CHECK(back.checks[0].name == "bound");
  CHECK(back.checks[0].measured == 0.125);
  CHECK(back.checks[0].relation == CheckRelation::LessEq);
  CHECK(back.checks[0].ladder == std::vector<double>{0.5, 0.25, 0.125});
  CHECK(back.checks[1].relation == CheckRelation::GreaterEq);
  CHECK(back.checks[1].ladder.empty());

  CHECK_THROWS_WITH_AS(outcome_from_json("not json"), doctest::Contains("does not parse"),
                       input_error);
  CHECK_THROWS_WITH_AS(outcome_from_json("{\"name\": \"x\"}"), doctest::Contains("missing"),
                       input_error);

  const std::string csv = summary_csv_text({out});
  CHECK(csv.rfind("experiment,check,measured,relation,bound,margin,pass\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("sample,bound,") != std::string::npos);
  CHECK(csv.find(">=") != std::string::npos);
}
