#include <CLI11.hpp>
#include <chrono>
#include <iostream>
#include <sstream>

#include "ksflow/runner.hpp"

using namespace ksflow;

namespace {

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  if (out.empty()) throw CLI::ValidationError("--values", "expected a comma-separated list");
  return out;
}

void print_summary(const RunSummary& sum) {
  std::cout << "out: " << sum.out_dir << "\n";
  if (sum.exploratory) std::cout << "exploratory: chi >= chi_c (all outputs so marked)\n";
  for (const auto& [name, ok] : sum.checks)
    std::cout << (ok ? "  [pass] " : "  [FAIL] ") << name << "\n";
  if (!sum.halt_reason.empty()) std::cout << "halt: " << sum.halt_reason << "\n";
  std::cout << "exit code " << sum.exit_code << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variational chemotaxis solver (minimising-movement scheme)"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = "artifacts", resume_prefix, axis, values_csv;
  int workers = 1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int dim = 3, points = 256, levels = 2;

  auto add_common = [&](CLI::App* cmd, bool needs_scenario) {
    if (needs_scenario)
      cmd->add_option("--scenario", scenario_path, "scenario config file")->required(false);
    cmd->add_option("--out", out_dir, "artifacts directory");
    cmd->add_option("--seed", seed, "override run.seed")->each([&](const std::string&) {
      seed_set = true;
    });
  };

  auto* run_cmd = app.add_subcommand("run", "run one scenario");
  add_common(run_cmd, true);
  run_cmd->add_option("--resume", resume_prefix, "checkpoint prefix to continue from");

  auto* sweep_cmd = app.add_subcommand("sweep", "run a parameter sweep");
  add_common(sweep_cmd, true);
  sweep_cmd->add_option("--axis", axis, "chi | h | N | tau | alpha")->required();
  sweep_cmd->add_option("--values", values_csv, "comma-separated values")->required();
  sweep_cmd->add_option("--workers", workers, "concurrent member runs");

  auto* chi_cmd = app.add_subcommand("chi-c", "estimate C_HLS and the critical sensitivity");
  add_common(chi_cmd, false);
  chi_cmd->add_option("--dim", dim, "space dimension (>= 3)");
  chi_cmd->add_option("--points", points, "finest radial resolution");
  chi_cmd->add_option("--levels", levels, "refinement ladder depth");

  auto* compare_cmd = app.add_subcommand("compare", "run jko and fd on one scenario");
  add_common(compare_cmd, true);

  auto* validate_cmd = app.add_subcommand("validate", "toy-grid invariant battery");
  (void)validate_cmd;

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      if (!resume_prefix.empty()) {
        const auto sum = resume_run(resume_prefix, out_dir);
        print_summary(sum);
        return sum.exit_code;
      }
      if (scenario_path.empty()) {
        std::cerr << "run: --scenario or --resume required\n";
        return kExitConfigError;
      }
      auto s = load_scenario(scenario_path);
      if (seed_set) s.seed = seed;
      const auto sum = run_scenario(s, out_dir);
      print_summary(sum);
      return sum.exit_code;
    }
    if (sweep_cmd->parsed()) {
      auto s = load_scenario(scenario_path);
      if (seed_set) s.seed = seed;
      const auto values = parse_values(values_csv);
      const auto res = run_sweep(s, axis, values, workers, out_dir);
      std::cout << "report: " << res.report_path << "\n";
      for (std::size_t i = 0; i < res.members.size(); ++i)
        std::cout << "  " << axis << " = " << values[i] << " -> exit "
                  << res.members[i].exit_code << "\n";
      return res.exit_code;
    }
    if (chi_cmd->parsed()) {
      HlsSearchConfig cfg;
      cfg.points = points;
      cfg.levels = levels;
      if (seed_set) cfg.seed = seed;
      const auto rep = run_chi_c(dim, cfg, out_dir);
      std::cout << "c_hls = " << rep.estimate.c_hls << "\n";
      std::cout << "chi_c = " << rep.estimate.chi_c << " (d = " << dim << ")\n";
      std::cout << "refinement:\n";
      for (const auto& row : rep.estimate.history)
        std::cout << "  N = " << row.points << ": " << row.estimate
                  << " (rel change " << row.rel_change << ")\n";
      std::cout << (rep.estimate.converged ? "converged" : "NOT converged") << "; wrote "
                << rep.json_path << "\n";
      return rep.exit_code;
    }
    if (compare_cmd->parsed()) {
      auto s = load_scenario(scenario_path);
      if (seed_set) s.seed = seed;
      s.solver = SolverKind::both;
      const auto sum = run_compare(s, out_dir);
      print_summary(sum);
      return sum.exit_code;
    }
    // validate
    const auto t0 = std::chrono::steady_clock::now();
    const auto items = run_validation_suite();
    bool all = true;
    for (const auto& it : items) {
      std::cout << (it.pass ? "[pass] " : "[FAIL] ") << it.name << " — " << it.detail << "\n";
      all = all && it.pass;
    }
    const auto dt = std::chrono::duration_cast<std::chrono::seconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    std::cout << items.size() << " checks in " << dt << " s\n";
    return all ? kExitOk : kExitInvariantBreach;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariantBreach;
  }
}
