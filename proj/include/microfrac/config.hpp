#ifndef MICROFRAC_CONFIG_HPP
#define MICROFRAC_CONFIG_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "microfrac/errors.hpp"
#include "microfrac/lookup.hpp"
#include "microfrac/macro.hpp"
#include "microfrac/mesh.hpp"

namespace microfrac {

enum class Scenario { homogenize, solve, downscale, sweep };

/// Fully validated run configuration; flat `key = value` text with
/// [section] headers (materials, cell, macro, solver, output).
struct RunConfig {
  // [materials]
  PhaseParams phases;

  // [cell]
  InclusionSpec inclusion;
  int cell_n = 0;
  int n_samples = 101;
  std::vector<InclusionShape> shape_list; // sweep cross product; default singleton
  std::vector<double> f_list;

  // [macro]
  int nx = 20;
  int ny = 40;
  double L = 1.0;
  bool notched = false;
  SolverConfig::Grip grip = SolverConfig::Grip::free;
  std::vector<int> notch_list; // 0/1, sweep cross product

  // [solver]
  double G_C = 0.0;
  double ell = 0.0;
  double delta_max = 0.0;
  int n_steps = 0;
  double newton_tol = 1e-8;
  int max_newton_iters = 25;
  int bisection_depth = 6;
  double eta = 0.0;
  SolverConfig::Irreversibility irreversibility = SolverConfig::Irreversibility::clamp;
  SolverConfig::Coupling coupling = SolverConfig::Coupling::monolithic;
  double epsilon = 0.05; // micro cell size for down-scaling, mm
  std::vector<double> ell_list;

  // [output]
  std::string out_dir = "out";
  std::string table_path; // empty: <out>/table.csv
  std::string curve_name = "curve.csv";
  std::string field_prefix = "field";
  std::vector<double> snapshot_strains;
  std::optional<Point2> downscale_point;
  std::string sweep_summary = "sweep.csv";
  std::string cache_dir = "tables"; // relative to out_dir

  NotchSpec notch_spec() const {
    NotchSpec n;
    n.present = notched;
    n.x2_position = L;
    n.tip_x1 = 0.5 * L;
    return n;
  }

  TableMetadata table_metadata() const {
    TableMetadata m;
    m.shape = inclusion.shape;
    m.f = inclusion.f;
    m.phases = phases;
    m.cell_n = cell_n;
    return m;
  }

  SolverConfig solver_config() const {
    SolverConfig s;
    s.G_C = G_C;
    s.ell = ell;
    s.newton_tol = newton_tol;
    s.max_newton_iters = max_newton_iters;
    s.bisection_depth = bisection_depth;
    s.eta = eta;
    s.irreversibility = irreversibility;
    s.coupling = coupling;
    s.grip = grip;
    s.load_schedule.resize(n_steps);
    for (int k = 1; k <= n_steps; ++k)
      s.load_schedule[k - 1] = delta_max * static_cast<double>(k) / n_steps;
    return s;
  }

  std::filesystem::path resolved_table_path() const {
    if (!table_path.empty()) return table_path;
    return std::filesystem::path(out_dir) / "table.csv";
  }

  /// Scenario-dependent completeness checks (the parser validates syntax and
  /// physical ranges; requirements differ per subcommand).
  void validate_for(Scenario scenario) const {
    if (scenario == Scenario::solve || scenario == Scenario::downscale ||
        scenario == Scenario::sweep) {
      if (!(G_C > 0.0)) throw ConfigError("config: [solver] G_C must be set and positive");
      if (!(ell > 0.0)) throw ConfigError("config: [solver] ell must be set and positive");
      if (!(delta_max > 0.0)) throw ConfigError("config: [solver] delta_max must be positive");
      if (n_steps < 1) throw ConfigError("config: [solver] n_steps must be at least 1");
    }
    if (scenario == Scenario::solve || scenario == Scenario::downscale) {
      const auto path = resolved_table_path();
      if (!std::filesystem::exists(path))
        throw ConfigError("config: look-up table '" + path.string() +
                          "' does not exist (run the homogenize scenario first)");
    }
    if (scenario == Scenario::downscale && !downscale_point)
      throw ConfigError("config: [output] downscale_point is required for the downscale scenario");
  }
};

namespace detail {

struct ConfigParser {
  std::string path;
  int line_no = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(path + ":" + std::to_string(line_no) + ": " + msg);
  }

  double to_double(const std::string& v) const {
    // Accepts plain decimals and p/q rationals (e.g. f = 1/4).
    const auto slash = v.find('/');
    try {
      size_t used = 0;
      if (slash != std::string::npos) {
        const double num = std::stod(v.substr(0, slash), &used);
        if (used != slash) throw std::invalid_argument("junk");
        const double den = std::stod(v.substr(slash + 1), &used);
        if (used != v.size() - slash - 1) throw std::invalid_argument("junk");
        if (den == 0.0) fail("division by zero in rational value '" + v + "'");
        return num / den;
      }
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("junk");
      return x;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      fail("expected a number, got '" + v + "'");
    }
  }

  int to_int(const std::string& v) const {
    try {
      size_t used = 0;
      const int x = std::stoi(v, &used);
      if (used != v.size()) throw std::invalid_argument("junk");
      return x;
    } catch (const std::exception&) {
      fail("expected an integer, got '" + v + "'");
    }
  }

  bool to_bool(const std::string& v) const {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    fail("expected a boolean (true/false), got '" + v + "'");
  }

  std::vector<std::string> split_list(const std::string& v) const {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      if (item.empty()) fail("empty entry in list '" + v + "'");
      out.push_back(item);
    }
    if (out.empty()) fail("empty list");
    return out;
  }

  InclusionShape to_shape(const std::string& v) const {
    if (v == "circle") return InclusionShape::circle;
    if (v == "square") return InclusionShape::square;
    fail("expected circle or square, got '" + v + "'");
  }
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

} // namespace detail

/// Parse and validate a configuration file. Unknown sections or keys are
/// rejected with their line number; physical-range violations surface the
/// offending value.
inline RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("parse_config: cannot open '" + path.string() + "'");

  RunConfig cfg;
  detail::ConfigParser p{path.string()};
  std::string line, section;
  std::set<std::string> seen;
  bool have_f = false, have_shape = false, have_cell_n = false;
  bool have_em = false, have_num = false, have_ei = false, have_nui = false;

  static const std::map<std::string, std::set<std::string>> known = {
      {"materials", {"E_m", "nu_m", "E_i", "nu_i", "K", "g_variant"}},
      {"cell", {"shape", "f", "n", "n_samples", "shape_list", "f_list"}},
      {"macro", {"nx", "ny", "L", "notch", "grip", "notch_list"}},
      {"solver",
       {"G_C", "ell", "delta_max", "n_steps", "newton_tol", "max_newton_iters", "bisection_depth",
        "eta", "irreversibility", "mode", "epsilon", "ell_list"}},
      {"output",
       {"dir", "table", "curve", "field_prefix", "snapshot_strains", "downscale_point",
        "sweep_summary", "cache_dir"}}};

  while (std::getline(in, line)) {
    ++p.line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') p.fail("malformed section header '" + line + "'");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (!known.count(section)) p.fail("unknown section '" + section + "'");
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) p.fail("expected 'key = value', got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (section.empty()) p.fail("key '" + key + "' appears before any [section]");
    if (!known.at(section).count(key))
      p.fail("unknown key '" + key + "' in section [" + section + "]");
    if (!seen.insert(section + "." + key).second)
      p.fail("duplicate key '" + key + "' in section [" + section + "]");
    if (value.empty()) p.fail("empty value for key '" + key + "'");

    if (section == "materials") {
      if (key == "E_m") cfg.phases.E_m = p.to_double(value), have_em = true;
      else if (key == "nu_m") cfg.phases.nu_m = p.to_double(value), have_num = true;
      else if (key == "E_i") cfg.phases.E_i = p.to_double(value), have_ei = true;
      else if (key == "nu_i") cfg.phases.nu_i = p.to_double(value), have_nui = true;
      else if (key == "K") cfg.phases.K = p.to_double(value);
      else if (key == "g_variant") {
        if (value == "literal") cfg.phases.g_variant = GVariant::literal;
        else if (value == "normalized") cfg.phases.g_variant = GVariant::normalized;
        else p.fail("g_variant must be literal or normalized");
      }
    } else if (section == "cell") {
      if (key == "shape") cfg.inclusion.shape = p.to_shape(value), have_shape = true;
      else if (key == "f") cfg.inclusion.f = p.to_double(value), have_f = true;
      else if (key == "n") cfg.cell_n = p.to_int(value), have_cell_n = true;
      else if (key == "n_samples") cfg.n_samples = p.to_int(value);
      else if (key == "shape_list") {
        for (const auto& s : p.split_list(value)) cfg.shape_list.push_back(p.to_shape(s));
      } else if (key == "f_list") {
        for (const auto& s : p.split_list(value)) cfg.f_list.push_back(p.to_double(s));
      }
    } else if (section == "macro") {
      if (key == "nx") cfg.nx = p.to_int(value);
      else if (key == "ny") cfg.ny = p.to_int(value);
      else if (key == "L") cfg.L = p.to_double(value);
      else if (key == "notch") cfg.notched = p.to_bool(value);
      else if (key == "grip") {
        if (value == "free") cfg.grip = SolverConfig::Grip::free;
        else if (value == "clamped") cfg.grip = SolverConfig::Grip::clamped;
        else p.fail("grip must be free or clamped");
      } else if (key == "notch_list") {
        for (const auto& s : p.split_list(value)) cfg.notch_list.push_back(p.to_bool(s) ? 1 : 0);
      }
    } else if (section == "solver") {
      if (key == "G_C") cfg.G_C = p.to_double(value);
      else if (key == "ell") cfg.ell = p.to_double(value);
      else if (key == "delta_max") cfg.delta_max = p.to_double(value);
      else if (key == "n_steps") cfg.n_steps = p.to_int(value);
      else if (key == "newton_tol") cfg.newton_tol = p.to_double(value);
      else if (key == "max_newton_iters") cfg.max_newton_iters = p.to_int(value);
      else if (key == "bisection_depth") cfg.bisection_depth = p.to_int(value);
      else if (key == "eta") cfg.eta = p.to_double(value);
      else if (key == "irreversibility") {
        if (value == "clamp") cfg.irreversibility = SolverConfig::Irreversibility::clamp;
        else if (value == "off") cfg.irreversibility = SolverConfig::Irreversibility::off;
        else p.fail("irreversibility must be clamp or off");
      } else if (key == "mode") {
        if (value == "monolithic") cfg.coupling = SolverConfig::Coupling::monolithic;
        else if (value == "staggered") cfg.coupling = SolverConfig::Coupling::staggered;
        else p.fail("mode must be monolithic or staggered");
      } else if (key == "epsilon") cfg.epsilon = p.to_double(value);
      else if (key == "ell_list") {
        for (const auto& s : p.split_list(value)) cfg.ell_list.push_back(p.to_double(s));
      }
    } else if (section == "output") {
      if (key == "dir") cfg.out_dir = value;
      else if (key == "table") cfg.table_path = value;
      else if (key == "curve") cfg.curve_name = value;
      else if (key == "field_prefix") cfg.field_prefix = value;
      else if (key == "snapshot_strains") {
        for (const auto& s : p.split_list(value)) cfg.snapshot_strains.push_back(p.to_double(s));
      } else if (key == "downscale_point") {
        const auto parts = p.split_list(value);
        if (parts.size() != 2) p.fail("downscale_point must be 'x1,x2'");
        cfg.downscale_point = Point2{p.to_double(parts[0]), p.to_double(parts[1])};
      } else if (key == "sweep_summary") cfg.sweep_summary = value;
      else if (key == "cache_dir") cfg.cache_dir = value;
    }
  }

  // Required keys (all scenarios need the microstructure definition).
  p.line_no = 0;
  if (!have_em || !have_num || !have_ei || !have_nui)
    throw ConfigError(p.path + ": [materials] requires E_m, nu_m, E_i, nu_i");
  if (!have_shape || !have_f || !have_cell_n)
    throw ConfigError(p.path + ": [cell] requires shape, f, n");

  // Physical validity.
  cfg.inclusion.validate();
  for (double f : cfg.f_list) {
    InclusionSpec probe{cfg.inclusion.shape, f};
    probe.validate();
  }
  plane_strain_tensor(cfg.phases.E_m, cfg.phases.nu_m);
  plane_strain_tensor(cfg.phases.E_i, cfg.phases.nu_i);
  if (!(cfg.phases.K > 0.0)) throw ConfigError("config: [materials] K must be positive");
  if (cfg.cell_n < 4 || cfg.cell_n % 2 != 0)
    throw ConfigError("config: [cell] n must be even and at least 4");
  if (cfg.n_samples < 21) throw ConfigError("config: [cell] n_samples must be at least 21");
  if (!(cfg.L > 0.0)) throw ConfigError("config: [macro] L must be positive");
  if (!(cfg.epsilon > 0.0)) throw ConfigError("config: [solver] epsilon must be positive");
  if (cfg.eta < 0.0) throw ConfigError("config: [solver] eta must be nonnegative");

  // Sweep lists default to the scalar configuration.
  if (cfg.shape_list.empty()) cfg.shape_list = {cfg.inclusion.shape};
  if (cfg.f_list.empty()) cfg.f_list = {cfg.inclusion.f};
  if (cfg.ell_list.empty() && cfg.ell > 0.0) cfg.ell_list = {cfg.ell};
  if (cfg.notch_list.empty()) cfg.notch_list = {cfg.notched ? 1 : 0};

  return cfg;
}

} // namespace microfrac

#endif
