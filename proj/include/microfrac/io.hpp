#ifndef MICROFRAC_IO_HPP
#define MICROFRAC_IO_HPP

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "microfrac/downscale.hpp"
#include "microfrac/errors.hpp"
#include "microfrac/lookup.hpp"
#include "microfrac/macro.hpp"
#include "microfrac/mesh.hpp"

namespace microfrac {

/// Stress-strain history as CSV, one row per converged step, full double
/// precision so reruns are byte-comparable.
inline void write_curve(const std::vector<StepRecord>& records,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_curve: cannot open '" + path.string() + "'");
  out << "step,delta_mm,H22_avg,T22_avg_MPa,max_d,newton_iters\n";
  for (const auto& r : records) {
    if (!r.converged) continue;
    out << r.step << ',' << detail::full_precision(r.delta) << ','
        << detail::full_precision(r.h22) << ',' << detail::full_precision(r.t22) << ','
        << detail::full_precision(r.max_d) << ',' << r.newton_iters << "\n";
  }
  if (!out) throw IoError("write_curve: write failed for '" + path.string() + "'");
}

struct VtkPointData {
  // 2-component nodal vectors (padded to 3 in the file) and nodal scalars.
  std::vector<std::pair<std::string, const Eigen::VectorXd*>> vectors;
  std::vector<std::pair<std::string, const Eigen::VectorXd*>> scalars;
};

/// Legacy-VTK ASCII unstructured grid with quad cells and named point-data
/// arrays; node and cell ordering follow the mesh, so output is deterministic.
inline void write_vtk_field(const Quad4Mesh& mesh, const VtkPointData& data,
                            const std::string& comment, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_field: cannot open '" + path.string() + "'");
  const int n = mesh.n_nodes();
  out << "# vtk DataFile Version 3.0\n";
  out << (comment.empty() ? "microfrac field" : comment) << "\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << n << " double\n";
  for (const auto& p : mesh.nodes)
    out << detail::full_precision(p.x1) << ' ' << detail::full_precision(p.x2) << " 0\n";
  out << "CELLS " << mesh.n_elements() << ' ' << 5 * mesh.n_elements() << "\n";
  for (const auto& conn : mesh.elements)
    out << "4 " << conn[0] << ' ' << conn[1] << ' ' << conn[2] << ' ' << conn[3] << "\n";
  out << "CELL_TYPES " << mesh.n_elements() << "\n";
  for (int e = 0; e < mesh.n_elements(); ++e) out << "9\n";
  out << "POINT_DATA " << n << "\n";
  for (const auto& [name, values] : data.vectors) {
    if (values->size() != 2 * n)
      throw IoError("write_field: vector array '" + name + "' has wrong size");
    out << "VECTORS " << name << " double\n";
    for (int a = 0; a < n; ++a)
      out << detail::full_precision((*values)[2 * a]) << ' '
          << detail::full_precision((*values)[2 * a + 1]) << " 0\n";
  }
  for (const auto& [name, values] : data.scalars) {
    if (values->size() != n)
      throw IoError("write_field: scalar array '" + name + "' has wrong size");
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (int a = 0; a < n; ++a) out << detail::full_precision((*values)[a]) << "\n";
  }
  if (!out) throw IoError("write_field: write failed for '" + path.string() + "'");
}

/// Macro snapshot: displacement vector array `U` and phase-field scalar `d`.
inline void write_field(const Quad4Mesh& mesh, const Eigen::VectorXd& u, const Eigen::VectorXd& d,
                        const std::filesystem::path& path, const std::string& comment = {}) {
  VtkPointData data;
  data.vectors.emplace_back("U", &u);
  data.scalars.emplace_back("d", &d);
  write_vtk_field(mesh, data, comment, path);
}

/// Cell-mesh micro field with provenance (macro point, cell size, damage,
/// macro displacement and gradient) recorded in the comment line.
inline void microfield_export(const MicroField& field, const std::filesystem::path& path) {
  // The legacy-VTK title line is capped at 256 characters; provenance uses a
  // shorter numeric format than the data arrays.
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };
  std::ostringstream comment;
  comment << "microfrac micro field; x=(" << num(field.x.x1) << "," << num(field.x.x2)
          << "); eps=" << num(field.epsilon) << "; d=" << num(field.damage) << "; U=("
          << num(field.U[0]) << "," << num(field.U[1]) << "); gradU=(" << num(field.grad_U(0, 0))
          << "," << num(field.grad_U(0, 1)) << "," << num(field.grad_U(1, 0)) << ","
          << num(field.grad_U(1, 1)) << "); utilde_valid=(" << (field.u_tilde_valid[0] ? 1 : 0)
          << "," << (field.u_tilde_valid[1] ? 1 : 0) << ")";
  VtkPointData data;
  data.vectors.emplace_back("u", &field.u);
  data.vectors.emplace_back("utilde", &field.u_tilde);
  write_vtk_field(field.cell_mesh, data, comment.str(), path);
}

} // namespace microfrac

#endif
