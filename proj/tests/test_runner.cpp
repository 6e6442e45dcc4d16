#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ksflow/runner.hpp"

using namespace ksflow;
namespace fsys = std::filesystem;

namespace {

const char* kTinyScenario = R"(
# tiny radial run for the runner tests
grid.mode = radial
grid.dim = 3
grid.points = 64
grid.half_width = 8
model.chi_rel = 0.5
model.alpha = 1
model.tau = 1
model.h = 1e-3
model.c_hls = 3.0
init.family = gaussian
init.sigma = 0.5
init.v = bessel
solver = jko
run.t_final = 0.02
run.stride = 5
run.seed = 7
)";

std::string slurp(const fsys::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fsys::path fresh_dir(const std::string& name) {
  const auto dir = fsys::temp_directory_path() / name;
  fsys::remove_all(dir);
  fsys::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("scenario parsing: defaults, errors with line numbers") {
  const auto s = parse_scenario(kTinyScenario);
  CHECK(s.grid.points == 64);
  CHECK(s.chi_rel == 0.5);
  CHECK(s.c_hls == 3.0);
  CHECK(s.seed == 7);

  CHECK_THROWS_WITH_AS(parse_scenario("model.chi = -2\n"),
                       doctest::Contains("line 1"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_scenario("\nfoo.bar = 1\n"),
                       doctest::Contains("line 2"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_scenario("model.h = abc\n"),
                       doctest::Contains("expected a number"), std::invalid_argument);
  CHECK_THROWS_AS(parse_scenario("model.chi = 1\nmodel.chi_rel = 0.5\n"),
                  std::invalid_argument);
  // grid invariant breach reported as config error
  CHECK_THROWS_AS(parse_scenario("grid.mode = full_box\ngrid.points = 48\n"),
                  std::invalid_argument);
}

TEST_CASE("scenario hash: stable, sensitive to content and seed") {
  auto a = parse_scenario(kTinyScenario);
  auto b = parse_scenario(kTinyScenario);
  CHECK(scenario_hash(a) == scenario_hash(b));
  b.seed = 8;
  CHECK(scenario_hash(a) != scenario_hash(b));
  auto c = parse_scenario(std::string(kTinyScenario) + "model.alpha = 2\n");
  CHECK(scenario_hash(a) != scenario_hash(c));
}

TEST_CASE("run_scenario produces the artifact set; reruns are byte-identical") {
  const auto s = parse_scenario(kTinyScenario);
  const auto dir1 = fresh_dir("ksflow_run_a");
  const auto dir2 = fresh_dir("ksflow_run_b");
  const auto sum1 = run_scenario(s, dir1.string());
  const auto sum2 = run_scenario(s, dir2.string());
  CHECK(sum1.exit_code == kExitOk);
  CHECK(fsys::exists(dir1 / "config_echo.json"));
  CHECK(fsys::exists(dir1 / "diagnostics.csv"));
  CHECK(fsys::exists(dir1 / "summary.json"));
  CHECK(fsys::exists(dir1 / "ckpt_000000_u.kfld"));
  CHECK(fsys::exists(dir1 / "ckpt_000020_u.kfld"));

  // determinism contract: identical config + seed => byte-identical CSV
  CHECK(slurp(dir1 / "diagnostics.csv") == slurp(dir2 / "diagnostics.csv"));

  // every row carries the scenario hash
  std::ifstream csv(dir1 / "diagnostics.csv");
  std::string line;
  std::getline(csv, line);  // header
  const std::string hash = std::to_string(scenario_hash(s));
  int rows = 0;
  while (std::getline(csv, line)) {
    CHECK(line.substr(0, hash.size()) == hash);
    ++rows;
  }
  CHECK(rows == 20);

  fsys::remove_all(dir1);
  fsys::remove_all(dir2);
}

TEST_CASE("resume reproduces the original continuation bit-exactly") {
  const auto s = parse_scenario(kTinyScenario);
  const auto full_dir = fresh_dir("ksflow_full");
  const auto part_dir = fresh_dir("ksflow_part");
  const auto sum = run_scenario(s, full_dir.string());
  REQUIRE(sum.exit_code == kExitOk);

  const auto resumed =
      resume_run((full_dir / "ckpt_000010").string(), part_dir.string());
  CHECK(resumed.exit_code == kExitOk);

  // rows for steps > 10 must match byte for byte
  auto tail_rows = [&](const fsys::path& p, int from_step) {
    std::ifstream f(p);
    std::string line;
    std::getline(f, line);
    std::vector<std::string> rows;
    while (std::getline(f, line)) {
      std::stringstream ss(line);
      std::string hash, solver, step;
      std::getline(ss, hash, ',');
      std::getline(ss, solver, ',');
      std::getline(ss, step, ',');
      if (std::stoi(step) >= from_step) rows.push_back(line);
    }
    return rows;
  };
  const auto orig = tail_rows(full_dir / "diagnostics.csv", 10);
  const auto cont = tail_rows(part_dir / "diagnostics.csv", 10);
  REQUIRE(orig.size() == cont.size());
  for (std::size_t i = 0; i < orig.size(); ++i) CHECK(orig[i] == cont[i]);

  fsys::remove_all(full_dir);
  fsys::remove_all(part_dir);
}

TEST_CASE("config errors exit with code 3 and name the problem") {
  Scenario s;
  bool threw = false;
  try {
    s = parse_scenario("model.chi = -1\n");
  } catch (const std::invalid_argument& e) {
    threw = true;
    CHECK(std::string(e.what()).find("model.chi") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("sweep: member isolation and the comparative report") {
  auto s = parse_scenario(kTinyScenario);
  s.t_final = 0.005;
  s.source_text += "run.t_final = 0.005\n";
  const auto dir = fresh_dir("ksflow_sweep");
  const auto res = run_sweep(s, "chi", {0.25, 0.5}, 2, dir.string());
  CHECK(res.members.size() == 2);
  CHECK(res.exit_code == kExitOk);
  CHECK(fsys::exists(res.report_path));
  const auto report = slurp(res.report_path);
  CHECK(report.find("chi,0.25") != std::string::npos);
  CHECK(report.find("chi,0.5") != std::string::npos);
  CHECK_THROWS_AS(run_sweep(s, "bogus", {1.0}, 1, dir.string()), std::invalid_argument);
  fsys::remove_all(dir);
}

TEST_CASE("chi-c artifact round-trips and recomputes consistently") {
  const auto dir = fresh_dir("ksflow_chic");
  HlsSearchConfig cfg;
  cfg.points = 64;
  cfg.levels = 2;
  cfg.half_width = 10;
  cfg.ascent_iterations = 60;
  const auto rep = run_chi_c(3, cfg, dir.string());
  CHECK(rep.exit_code == kExitOk);
  const auto loaded = hls_estimate_from_json(slurp(rep.json_path));
  CHECK(loaded.c_hls == rep.estimate.c_hls);
  const double m = 2.0 - 2.0 / 3.0;
  CHECK(loaded.chi_c == doctest::Approx(2.0 / ((m - 1) * loaded.c_hls)).epsilon(1e-14));
  fsys::remove_all(dir);
}

TEST_CASE("exploratory runs are labelled") {
  auto s = parse_scenario(kTinyScenario);
  s.chi_rel = 1.2;  // beyond chi_c: permitted, marked exploratory
  s.t_final = 0.003;
  s.source_text += "model.chi_rel = 1.2\nrun.t_final = 0.003\n";
  const auto dir = fresh_dir("ksflow_expl");
  const auto sum = run_scenario(s, dir.string());
  CHECK(sum.exploratory);
  const auto echo = slurp(dir / "summary.json");
  CHECK(echo.find("\"exploratory\": true") != std::string::npos);
  fsys::remove_all(dir);
}

TEST_CASE("every initial family discretises to unit mass") {
  for (const char* fam : {"gaussian", "shell", "two_bump"}) {
    auto s = parse_scenario(std::string(kTinyScenario) + "init.family = " + fam + "\n");
    double raw = 0;
    const auto u = build_initial_density(s, &raw);
    CHECK(std::abs(total_mass(u) - 1.0) < 1e-12);
    CHECK(raw > 0);
  }
  // full-box two-bump as well
  auto s = parse_scenario(
      "grid.mode = full_box\ngrid.dim = 2\ngrid.points = 32\ngrid.half_width = 4\n"
      "model.c_hls = 3\ninit.family = two_bump\ninit.separation = 2\ninit.sigma = 0.4\n");
  const auto u = build_initial_density(s);
  CHECK(std::abs(total_mass(u) - 1.0) < 1e-12);
}

TEST_CASE("tau ladder converges to the quasi-steady chemical profile") {
  const char* base = R"(
grid.mode = radial
grid.dim = 3
grid.points = 64
grid.half_width = 8
model.chi_rel = 0.5
model.alpha = 0
model.h = 1e-3
model.c_hls = 0.1738
init.family = gaussian
init.sigma = 0.5
init.v = bessel
solver = jko
run.t_final = 0.03
run.stride = 10
run.seed = 1
)";
  auto s = parse_scenario(base);
  const auto dir = fresh_dir("ksflow_tau_ladder");
  const auto res = run_sweep(s, "tau", {1.0, 0.01, 0.001}, 1, dir.string());
  REQUIRE(res.members.size() == 3);
  for (const auto& m : res.members) CHECK(m.exit_code == kExitOk);
  CHECK(res.members[0].final_v_gap > res.members[1].final_v_gap);
  CHECK(res.members[1].final_v_gap > res.members[2].final_v_gap);
  fsys::remove_all(dir);
}
