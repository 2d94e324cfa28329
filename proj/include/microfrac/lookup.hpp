#ifndef MICROFRAC_LOOKUP_HPP
#define MICROFRAC_LOOKUP_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "microfrac/cell.hpp"
#include "microfrac/elastic_tensor.hpp"
#include "microfrac/errors.hpp"
#include "microfrac/mesh.hpp"
#include "microfrac/spline.hpp"

namespace microfrac {

/// Constituent parameters of the two-phase cell (moduli in MPa).
struct PhaseParams {
  double E_m = 0.0, nu_m = 0.0;
  double E_i = 0.0, nu_i = 0.0;
  double K = 0.005;
  GVariant g_variant = GVariant::literal;

  MicroMaterials at_damage(double d) const {
    MicroMaterials m;
    m.matrix_undamaged = plane_strain_tensor(E_m, nu_m);
    m.inclusion = plane_strain_tensor(E_i, nu_i);
    m.residual_stiffness = K;
    m.damage = d;
    m.g_variant = g_variant;
    return m;
  }
};

inline const char* to_string(GVariant v) {
  return v == GVariant::literal ? "literal" : "normalized";
}
inline const char* to_string(InclusionShape s) {
  return s == InclusionShape::circle ? "circle" : "square";
}

/// Provenance of a look-up table; two tables are interchangeable only if all
/// fields match.
struct TableMetadata {
  InclusionShape shape = InclusionShape::circle;
  double f = 0.0;
  PhaseParams phases;
  int cell_n = 0;

  bool matches(const TableMetadata& o) const {
    return shape == o.shape && f == o.f && phases.E_m == o.phases.E_m &&
           phases.nu_m == o.phases.nu_m && phases.E_i == o.phases.E_i &&
           phases.nu_i == o.phases.nu_i && phases.K == o.phases.K &&
           phases.g_variant == o.phases.g_variant && cell_n == o.cell_n;
  }

  std::string describe() const {
    std::ostringstream os;
    os << "shape=" << to_string(shape) << " f=" << f << " E_m=" << phases.E_m
       << " nu_m=" << phases.nu_m << " E_i=" << phases.E_i << " nu_i=" << phases.nu_i
       << " K=" << phases.K << " cell_n=" << cell_n << " g_variant=" << to_string(phases.g_variant);
    return os.str();
  }
};

namespace detail {

inline std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace detail

/// Off-line sampled map d -> (C, dC/dd, d2C/dd2) of the homogenized tensor,
/// fitted per Voigt component with an interpolating cubic spline so the macro
/// tangent gets analytic first and second derivatives.
class DamageLookup {
public:
  // Independent Voigt components stored per sample, in file column order.
  static constexpr int n_components = 6;
  static constexpr std::array<std::pair<int, int>, n_components> component_index = {
      {{0, 0}, {0, 1}, {1, 1}, {0, 2}, {1, 2}, {2, 2}}};
  static constexpr std::array<const char*, n_components> component_names = {
      "C1111", "C1122", "C2222", "C1112", "C2212", "C1212"};

  struct EvalResult {
    ElasticTensor C;
    ElasticTensor dC;
    ElasticTensor d2C;
    bool clamped = false; // the queried damage was outside [0, 1]
  };

  /// Sweep the homogenizer over a uniform damage grid d_k = k/(n_samples-1).
  static DamageLookup build(const InclusionSpec& inc, int cell_n, const PhaseParams& phases,
                            int n_samples = 101) {
    if (n_samples < 21) throw ConfigError("DamageLookup: need at least 21 samples");
    DamageLookup table;
    table.meta_.shape = inc.shape;
    table.meta_.f = inc.f;
    table.meta_.phases = phases;
    table.meta_.cell_n = cell_n;
    table.grid_.resize(n_samples);
    table.samples_.resize(n_samples);

    const Quad4Mesh mesh = build_unit_cell_mesh(cell_n, inc);
    CellProblem problem(mesh);
    for (int k = 0; k < n_samples; ++k) {
      const double d = static_cast<double>(k) / (n_samples - 1);
      table.grid_[k] = d;
      const MicroMaterials mats = phases.at_damage(d);
      const CorrectorSet correctors = problem.solve(mats);
      const ElasticTensor c = problem.homogenize(mats, correctors);
      for (int q = 0; q < n_components; ++q)
        table.samples_[k][q] = c(component_index[q].first, component_index[q].second);
    }
    table.fit();
    return table;
  }

  EvalResult eval(double d) const {
    if (!std::isfinite(d)) throw NumericError("DamageLookup::eval: non-finite damage value");
    EvalResult r;
    double dc = d;
    if (d < 0.0 || d > 1.0) {
      r.clamped = true;
      dc = std::clamp(d, 0.0, 1.0);
    }
    for (int q = 0; q < n_components; ++q) {
      const auto e = splines_[q](dc);
      const auto [i, j] = component_index[q];
      r.C(i, j) = r.C(j, i) = e.value;
      r.dC(i, j) = r.dC(j, i) = e.d1;
      r.d2C(i, j) = r.d2C(j, i) = e.d2;
    }
    return r;
  }

  const TableMetadata& metadata() const { return meta_; }
  const std::vector<double>& damage_grid() const { return grid_; }
  const std::vector<std::array<double, n_components>>& samples() const { return samples_; }
  int n_samples() const { return static_cast<int>(grid_.size()); }

  /// UTF-8 CSV with a metadata header line; samples at full double precision
  /// so a load-refit reproduces the splines bit-identically.
  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("save_table: cannot open '" + path.string() + "' for writing");
    out << "# microfrac-table v1; shape=" << to_string(meta_.shape)
        << "; f=" << detail::full_precision(meta_.f)
        << "; E_m=" << detail::full_precision(meta_.phases.E_m)
        << "; nu_m=" << detail::full_precision(meta_.phases.nu_m)
        << "; E_i=" << detail::full_precision(meta_.phases.E_i)
        << "; nu_i=" << detail::full_precision(meta_.phases.nu_i)
        << "; K=" << detail::full_precision(meta_.phases.K) << "; cell_n=" << meta_.cell_n
        << "; g_variant=" << to_string(meta_.phases.g_variant) << "\n";
    out << "d";
    for (const char* name : component_names) out << "," << name;
    out << "\n";
    for (int k = 0; k < n_samples(); ++k) {
      out << detail::full_precision(grid_[k]);
      for (int q = 0; q < n_components; ++q)
        out << "," << detail::full_precision(samples_[k][q]);
      out << "\n";
    }
    if (!out) throw IoError("save_table: write failed for '" + path.string() + "'");
  }

  static DamageLookup load(const std::filesystem::path& path,
                           const std::optional<TableMetadata>& expected = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw IoError("load_table: cannot open '" + path.string() + "'");
    std::string line;
    int line_no = 0;

    auto next_line = [&]() {
      if (!std::getline(in, line))
        throw IoError("load_table: '" + path.string() + "' truncated at line " +
                      std::to_string(line_no + 1));
      ++line_no;
    };

    next_line();
    DamageLookup table;
    table.meta_ = parse_header(line, path.string());
    next_line();
    {
      std::string expected_cols = "d";
      for (const char* name : component_names) expected_cols += std::string(",") + name;
      if (line != expected_cols)
        throw IoError("load_table: unexpected column header at line 2 of '" + path.string() +
                      "'");
    }
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::array<double, n_components + 1> row{};
      std::stringstream ss(line);
      std::string cellv;
      for (int q = 0; q <= n_components; ++q) {
        if (!std::getline(ss, cellv, ','))
          throw IoError("load_table: short row at line " + std::to_string(line_no) + " of '" +
                        path.string() + "'");
        try {
          size_t used = 0;
          row[q] = std::stod(cellv, &used);
          if (used != cellv.size()) throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
          throw IoError("load_table: bad numeric field at line " + std::to_string(line_no) +
                        " of '" + path.string() + "'");
        }
      }
      table.grid_.push_back(row[0]);
      std::array<double, n_components> s;
      std::copy(row.begin() + 1, row.end(), s.begin());
      table.samples_.push_back(s);
    }
    if (table.n_samples() < 21)
      throw IoError("load_table: '" + path.string() + "' holds fewer than 21 samples");
    if (expected && !table.meta_.matches(*expected))
      throw ConfigError("load_table: metadata mismatch for '" + path.string() + "': file has [" +
                        table.meta_.describe() + "], requested [" + expected->describe() + "]");
    table.fit();
    return table;
  }

private:
  void fit() {
    for (int q = 0; q < n_components; ++q) {
      std::vector<double> y(n_samples());
      for (int k = 0; k < n_samples(); ++k) y[k] = samples_[k][q];
      splines_[q] = CubicSpline(grid_, y, SplineEnd::not_a_knot);
    }
  }

  static TableMetadata parse_header(const std::string& line, const std::string& path) {
    const std::string magic = "# microfrac-table ";
    if (line.rfind(magic, 0) != 0)
      throw IoError("load_table: '" + path + "' is not a microfrac table (bad magic at line 1)");
    std::stringstream ss(line.substr(magic.size()));
    std::string field;
    if (!std::getline(ss, field, ';') || field != "v1")
      throw IoError("load_table: incompatible table version '" + field + "' in '" + path +
                    "' (expected v1)");
    TableMetadata meta;
    bool have_shape = false, have_variant = false;
    int numeric_fields = 0;
    while (std::getline(ss, field, ';')) {
      const auto eq = field.find('=');
      if (eq == std::string::npos)
        throw IoError("load_table: malformed header field '" + field + "' in '" + path + "'");
      std::string key = field.substr(0, eq);
      key.erase(0, key.find_first_not_of(' '));
      const std::string value = field.substr(eq + 1);
      if (key == "shape") {
        if (value == "circle")
          meta.shape = InclusionShape::circle;
        else if (value == "square")
          meta.shape = InclusionShape::square;
        else
          throw IoError("load_table: unknown shape '" + value + "' in '" + path + "'");
        have_shape = true;
        continue;
      }
      if (key == "g_variant") {
        if (value == "literal")
          meta.phases.g_variant = GVariant::literal;
        else if (value == "normalized")
          meta.phases.g_variant = GVariant::normalized;
        else
          throw IoError("load_table: unknown g_variant '" + value + "' in '" + path + "'");
        have_variant = true;
        continue;
      }
      double num = 0.0;
      try {
        num = std::stod(value);
      } catch (const std::exception&) {
        throw IoError("load_table: bad numeric header field '" + key + "' in '" + path + "'");
      }
      ++numeric_fields;
      if (key == "f")
        meta.f = num;
      else if (key == "E_m")
        meta.phases.E_m = num;
      else if (key == "nu_m")
        meta.phases.nu_m = num;
      else if (key == "E_i")
        meta.phases.E_i = num;
      else if (key == "nu_i")
        meta.phases.nu_i = num;
      else if (key == "K")
        meta.phases.K = num;
      else if (key == "cell_n")
        meta.cell_n = static_cast<int>(num);
      else
        throw IoError("load_table: unknown header field '" + key + "' in '" + path + "'");
    }
    if (!have_shape || !have_variant || numeric_fields != 7)
      throw IoError("load_table: incomplete metadata header in '" + path + "'");
    return meta;
  }

  DamageLookup() = default;

  TableMetadata meta_;
  std::vector<double> grid_;
  std::vector<std::array<double, n_components>> samples_;
  std::array<CubicSpline, n_components> splines_;
};

/// Spec-level convenience wrappers.
inline DamageLookup build_table(const InclusionSpec& inc, int cell_n, const PhaseParams& phases,
                                int n_samples = 101) {
  return DamageLookup::build(inc, cell_n, phases, n_samples);
}

inline void save_table(const DamageLookup& table, const std::filesystem::path& path) {
  table.save(path);
}

inline DamageLookup load_table(const std::filesystem::path& path,
                               const std::optional<TableMetadata>& expected = std::nullopt) {
  return DamageLookup::load(path, expected);
}

} // namespace microfrac

#endif
