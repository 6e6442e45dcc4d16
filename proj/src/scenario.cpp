#include "ksflow/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "ksflow/bessel.hpp"
#include "ksflow/field_io.hpp"
#include "ksflow/hls.hpp"

namespace ksflow {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw std::invalid_argument("line " + std::to_string(line) + ": " + what);
}

double parse_number(int line, const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double x = std::stod(value, &used);
    if (used != value.size()) fail(line, key + ": trailing characters in '" + value + "'");
    return x;
  } catch (const std::invalid_argument&) {
    fail(line, key + ": expected a number, got '" + value + "'");
  } catch (const std::out_of_range&) {
    fail(line, key + ": number out of range '" + value + "'");
  }
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  Scenario s;
  s.source_text = text;
  GridMode mode = GridMode::radial;
  int dim = 3, points = 256;
  double half_width = 8.0;
  bool chi_set = false, chi_rel_set = false;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) fail(line_no, "empty key or value");

    if (key == "grid.mode") {
      if (value == "radial")
        mode = GridMode::radial;
      else if (value == "full_box" || value == "full-box")
        mode = GridMode::full_box;
      else
        fail(line_no, "grid.mode: 'radial' or 'full_box', got '" + value + "'");
    } else if (key == "grid.dim") {
      dim = static_cast<int>(parse_number(line_no, key, value));
    } else if (key == "grid.points") {
      points = static_cast<int>(parse_number(line_no, key, value));
    } else if (key == "grid.half_width") {
      half_width = parse_number(line_no, key, value);
    } else if (key == "model.chi") {
      s.chi = parse_number(line_no, key, value);
      chi_set = true;
      if (s.chi <= 0) fail(line_no, "model.chi must be positive");
    } else if (key == "model.chi_rel") {
      s.chi_rel = parse_number(line_no, key, value);
      chi_rel_set = true;
      if (s.chi_rel <= 0) fail(line_no, "model.chi_rel must be positive");
    } else if (key == "model.alpha") {
      s.alpha = parse_number(line_no, key, value);
      if (s.alpha < 0) fail(line_no, "model.alpha must be nonnegative");
    } else if (key == "model.tau") {
      s.tau = parse_number(line_no, key, value);
      if (s.tau <= 0) fail(line_no, "model.tau must be positive");
    } else if (key == "model.h") {
      s.h = parse_number(line_no, key, value);
      if (s.h <= 0) fail(line_no, "model.h must be positive");
    } else if (key == "model.c_hls") {
      if (value == "estimate")
        s.c_hls = 0;
      else {
        s.c_hls = parse_number(line_no, key, value);
        if (s.c_hls <= 0) fail(line_no, "model.c_hls must be positive or 'estimate'");
      }
    } else if (key == "init.family") {
      if (value == "gaussian")
        s.family = InitFamily::gaussian;
      else if (value == "shell")
        s.family = InitFamily::shell;
      else if (value == "two_bump" || value == "two-bump")
        s.family = InitFamily::two_bump;
      else if (value == "from_file")
        s.family = InitFamily::from_file;
      else
        fail(line_no, "init.family: unknown family '" + value + "'");
    } else if (key == "init.sigma") {
      s.sigma = parse_number(line_no, key, value);
    } else if (key == "init.center") {
      s.center = parse_number(line_no, key, value);
    } else if (key == "init.radius") {
      s.radius = parse_number(line_no, key, value);
    } else if (key == "init.width") {
      s.width = parse_number(line_no, key, value);
    } else if (key == "init.separation") {
      s.separation = parse_number(line_no, key, value);
    } else if (key == "init.path") {
      s.density_path = value;
    } else if (key == "init.v") {
      if (value == "bessel")
        s.chem = InitChem::bessel;
      else if (value == "zero")
        s.chem = InitChem::zero;
      else if (value == "from_file")
        s.chem = InitChem::from_file;
      else
        fail(line_no, "init.v: 'bessel', 'zero' or 'from_file', got '" + value + "'");
    } else if (key == "init.v_path") {
      s.chem_path = value;
    } else if (key == "solver") {
      if (value == "jko")
        s.solver = SolverKind::jko;
      else if (value == "fd")
        s.solver = SolverKind::fd;
      else if (value == "both")
        s.solver = SolverKind::both;
      else
        fail(line_no, "solver: 'jko', 'fd' or 'both', got '" + value + "'");
    } else if (key == "run.t_final") {
      s.t_final = parse_number(line_no, key, value);
      if (s.t_final <= 0) fail(line_no, "run.t_final must be positive");
    } else if (key == "run.stride") {
      s.stride = static_cast<int>(parse_number(line_no, key, value));
      if (s.stride <= 0) fail(line_no, "run.stride must be positive");
    } else if (key == "run.seed") {
      s.seed = static_cast<std::uint64_t>(parse_number(line_no, key, value));
    } else if (key == "ot.epsilon") {
      s.ot_epsilon = parse_number(line_no, key, value);
      if (s.ot_epsilon < 0) fail(line_no, "ot.epsilon must be nonnegative");
    } else if (key == "fd.dt") {
      s.fd_dt = parse_number(line_no, key, value);
      if (s.fd_dt <= 0) fail(line_no, "fd.dt must be positive");
    } else if (key == "jko.entropic") {
      s.jko_entropic = value == "true" || value == "1";
    } else if (key == "jko.regularity_every") {
      s.regularity_every = static_cast<int>(parse_number(line_no, key, value));
    } else if (key == "tol.energy_slack") {
      s.energy_slack = parse_number(line_no, key, value);
      if (s.energy_slack <= 0) fail(line_no, "tol.energy_slack must be positive");
    } else {
      fail(line_no, "unknown key '" + key + "'");
    }
  }
  if (chi_set && chi_rel_set) throw std::invalid_argument("set model.chi or model.chi_rel, not both");
  if (!chi_set && !chi_rel_set) s.chi_rel = 0.5;
  try {
    s.grid = GridSpec{mode, dim, points, half_width};
    s.grid.validate();
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("grid: ") + e.what());
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open scenario file " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_scenario(buf.str());
}

std::uint64_t scenario_hash(const Scenario& s) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const std::string& str) {
    for (unsigned char c : str) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  mix(s.source_text);
  mix(std::to_string(s.seed));
  return h;
}

std::string scenario_to_json(const Scenario& s, double resolved_chi, double resolved_c_hls) {
  nlohmann::json j;
  j["grid"] = {{"mode", s.grid.mode == GridMode::radial ? "radial" : "full_box"},
               {"dim", s.grid.dim},
               {"points", s.grid.points},
               {"half_width", s.grid.half_width}};
  j["model"] = {{"chi", resolved_chi}, {"chi_rel", s.chi_rel}, {"alpha", s.alpha},
                {"tau", s.tau},        {"h", s.h},             {"c_hls", resolved_c_hls}};
  j["init"] = {{"family", static_cast<int>(s.family)},
               {"sigma", s.sigma},
               {"center", s.center},
               {"radius", s.radius},
               {"width", s.width},
               {"separation", s.separation}};
  j["run"] = {{"solver", static_cast<int>(s.solver)},
              {"t_final", s.t_final},
              {"stride", s.stride},
              {"seed", s.seed}};
  j["ot"] = {{"epsilon", s.ot_epsilon}};
  j["fd"] = {{"dt", s.fd_dt}};
  j["scenario_hash"] = scenario_hash(s);
  return j.dump(2);
}

DensityField build_initial_density(const Scenario& s, double* raw_mass) {
  DensityField u{s.grid, {}};
  switch (s.family) {
    case InitFamily::gaussian:
      u = make_density(s.grid, [&](std::array<double, 3> x) {
        double rsq = 0;
        if (s.grid.mode == GridMode::radial) {
          const double dr = x[0] - s.center;
          rsq = dr * dr;
        } else {
          for (int ax = 0; ax < s.grid.dim; ++ax) {
            const double dx = x[static_cast<std::size_t>(ax)] - (ax == 0 ? s.center : 0.0);
            rsq += dx * dx;
          }
        }
        return std::exp(-0.5 * rsq / (s.sigma * s.sigma));
      });
      break;
    case InitFamily::shell:
      u = make_density(s.grid, [&](std::array<double, 3> x) {
        const double r = s.grid.mode == GridMode::radial
                             ? x[0]
                             : std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        const double d = (r - s.radius) / s.width;
        return std::exp(-0.5 * d * d);
      });
      break;
    case InitFamily::two_bump: {
      const double sep = 0.5 * s.separation;
      u = make_density(s.grid, [&](std::array<double, 3> x) {
        if (s.grid.mode == GridMode::radial) {
          const double r = x[0];
          const double a = (r - (s.radius - sep)) / s.width;
          const double b = (r - (s.radius + sep)) / s.width;
          return std::exp(-0.5 * a * a) + std::exp(-0.5 * b * b);
        }
        double da = 0, db = 0;
        for (int ax = 0; ax < s.grid.dim; ++ax) {
          const double c = ax == 0 ? sep : 0.0;
          da += (x[static_cast<std::size_t>(ax)] - c) * (x[static_cast<std::size_t>(ax)] - c);
          db += (x[static_cast<std::size_t>(ax)] + c) * (x[static_cast<std::size_t>(ax)] + c);
        }
        const double s2 = s.sigma * s.sigma;
        return std::exp(-0.5 * da / s2) + std::exp(-0.5 * db / s2);
      });
      break;
    }
    case InitFamily::from_file: {
      auto blob = read_field_blob(s.density_path);
      if (!(blob.grid == s.grid))
        throw std::invalid_argument("init.path: field grid does not match scenario grid");
      u = DensityField{blob.grid, std::move(blob.values)};
      for (auto& x : u.values) x = std::max(x, 0.0);
      break;
    }
  }
  const double mass = normalize_mass(u);  // once, at setup
  if (raw_mass) *raw_mass = mass;
  assert_unit_mass(u, "build_initial_density");
  return u;
}

ChemField build_initial_chem(const Scenario& s, const DensityField& u0) {
  switch (s.chem) {
    case InitChem::bessel:
      return apply_bessel(u0, s.alpha);
    case InitChem::zero:
      return ChemField{s.grid, std::vector<double>(s.grid.cell_count(), 0.0)};
    case InitChem::from_file: {
      auto blob = read_field_blob(s.chem_path);
      if (!(blob.grid == s.grid))
        throw std::invalid_argument("init.v_path: field grid does not match scenario grid");
      return ChemField{blob.grid, std::move(blob.values)};
    }
  }
  throw std::logic_error("build_initial_chem: unreachable");
}

ModelParams resolve_params(const Scenario& s, double* out_c_hls) {
  ModelParams p;
  p.dim = s.grid.dim;
  p.alpha = s.alpha;
  p.tau = s.tau;
  p.step = s.h;
  if (s.c_hls > 0) {
    p.c_hls = s.c_hls;
  } else {
    HlsSearchConfig cfg;
    cfg.seed = s.seed;
    p.c_hls = estimate_c_hls(s.grid.dim, cfg).c_hls;
  }
  p.chi = s.chi > 0 ? s.chi : s.chi_rel * p.chi_c();
  p.validate();
  if (out_c_hls) *out_c_hls = p.c_hls;
  return p;
}

}  // namespace ksflow
