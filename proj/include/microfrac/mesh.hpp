#ifndef MICROFRAC_MESH_HPP
#define MICROFRAC_MESH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "microfrac/errors.hpp"

namespace microfrac {

struct Point2 {
  double x1 = 0.0;
  double x2 = 0.0;
};

enum class MaterialId { matrix, inclusion };

enum class InclusionShape { circle, square };

/// Inclusion centered at (1/2, 1/2) of the unit cell with volume fraction f.
struct InclusionSpec {
  InclusionShape shape = InclusionShape::circle;
  double f = 0.25;

  void validate() const {
    if (!(f > 0.0 && f < 1.0))
      throw ConfigError("InclusionSpec: volume fraction out of range (0, 1)");
    if (shape == InclusionShape::circle && radius() > 0.5)
      throw ConfigError("InclusionSpec: circular inclusion not contained in cell (r > 1/2)");
    if (shape == InclusionShape::square && side() > 1.0)
      throw ConfigError("InclusionSpec: square inclusion not contained in cell (a > 1)");
  }

  double radius() const { return std::sqrt(f / std::numbers::pi); }
  double side() const { return std::sqrt(f); }

  bool contains(const Point2& p) const {
    const double dx = p.x1 - 0.5;
    const double dy = p.x2 - 0.5;
    if (shape == InclusionShape::circle)
      return dx * dx + dy * dy < radius() * radius();
    const double h = 0.5 * side();
    return std::abs(dx) < h && std::abs(dy) < h;
  }
};

/// Horizontal edge crack: mouth on the left boundary at x2 = x2_position,
/// tip at x1 = tip_x1. Modeled as a topological seam of duplicated nodes.
struct NotchSpec {
  bool present = false;
  double x2_position = 0.0;
  double tip_x1 = 0.0;
};

/// Structured 4-node quadrilateral mesh. Element nodes are listed
/// counter-clockwise. Node sets: "top"/"bottom" contain the full loaded
/// edges including corners; "left"/"right" exclude corners so the four sets
/// cover the outer boundary without overlap. Notched meshes additionally
/// carry "crack_upper"/"crack_lower": geometrically coincident but
/// topologically distinct seam nodes.
struct Quad4Mesh {
  std::vector<Point2> nodes;
  std::vector<std::array<int, 4>> elements;
  std::vector<MaterialId> material;
  std::map<std::string, std::vector<int>> node_sets;

  // Structured-grid metadata (all meshes here are built on a regular grid).
  int nx = 0;
  int ny = 0;
  double x1_min = 0.0, x2_min = 0.0;
  double dx1 = 0.0, dx2 = 0.0;

  NotchSpec notch; // degenerate (present = false) for unnotched meshes

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_elements() const { return static_cast<int>(elements.size()); }

  const std::vector<int>& node_set(const std::string& name) const {
    auto it = node_sets.find(name);
    if (it == node_sets.end()) throw ConfigError("Quad4Mesh: missing node set '" + name + "'");
    return it->second;
  }

  std::array<Point2, 4> element_coords(int e) const {
    const auto& conn = elements[e];
    return {nodes[conn[0]], nodes[conn[1]], nodes[conn[2]], nodes[conn[3]]};
  }

  /// Index of the base-grid node (i, j); valid for the pre-duplication grid.
  int grid_node(int i, int j) const { return i + j * (nx + 1); }
};

namespace detail {

inline Quad4Mesh build_grid(int nx, int ny, double x1_min, double x2_min, double len1,
                            double len2) {
  Quad4Mesh mesh;
  mesh.nx = nx;
  mesh.ny = ny;
  mesh.x1_min = x1_min;
  mesh.x2_min = x2_min;
  mesh.dx1 = len1 / nx;
  mesh.dx2 = len2 / ny;
  mesh.nodes.reserve((nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      mesh.nodes.push_back({x1_min + i * mesh.dx1, x2_min + j * mesh.dx2});
  mesh.elements.reserve(nx * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      mesh.elements.push_back({mesh.grid_node(i, j), mesh.grid_node(i + 1, j),
                               mesh.grid_node(i + 1, j + 1), mesh.grid_node(i, j + 1)});
  mesh.material.assign(mesh.elements.size(), MaterialId::matrix);
  return mesh;
}

inline void build_boundary_sets(Quad4Mesh& mesh) {
  std::vector<int> top, bottom, left, right;
  const int nx = mesh.nx, ny = mesh.ny;
  for (int i = 0; i <= nx; ++i) {
    bottom.push_back(mesh.grid_node(i, 0));
    top.push_back(mesh.grid_node(i, ny));
  }
  for (int j = 1; j < ny; ++j) {
    left.push_back(mesh.grid_node(0, j));
    right.push_back(mesh.grid_node(nx, j));
  }
  mesh.node_sets["top"] = top;
  mesh.node_sets["bottom"] = bottom;
  mesh.node_sets["left"] = left;
  mesh.node_sets["right"] = right;
}

} // namespace detail

/// n-by-n uniform grid on the unit cell [0,1]^2. An element is flagged as
/// inclusion iff its centroid lies inside the inclusion region; the staircase
/// boundary error vanishes under refinement.
inline Quad4Mesh build_unit_cell_mesh(int n, const InclusionSpec& inc) {
  if (n < 4 || n % 2 != 0)
    throw ConfigError("build_unit_cell_mesh: n must be even and at least 4");
  inc.validate();
  Quad4Mesh mesh = detail::build_grid(n, n, 0.0, 0.0, 1.0, 1.0);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto c = mesh.element_coords(e);
    const Point2 centroid{0.25 * (c[0].x1 + c[1].x1 + c[2].x1 + c[3].x1),
                          0.25 * (c[0].x2 + c[1].x2 + c[2].x2 + c[3].x2)};
    if (inc.contains(centroid)) mesh.material[e] = MaterialId::inclusion;
  }
  detail::build_boundary_sets(mesh);
  return mesh;
}

/// Rectangle [0,L] x [0,2L], all elements matrix (the specimen is the
/// homogenized medium). A present notch duplicates the seam nodes on
/// {x2 = x2_position, 0 <= x1 <= tip_x1} so the crack faces are disconnected
/// strictly left of the tip while the tip node itself stays shared by the
/// elements at and right of it.
inline Quad4Mesh build_specimen_mesh(int nx, int ny, double L, const NotchSpec& notch) {
  if (nx < 2) throw ConfigError("build_specimen_mesh: nx must be at least 2");
  if (ny < 4 || ny % 2 != 0)
    throw ConfigError("build_specimen_mesh: ny must be even and at least 4");
  if (!(L > 0.0)) throw ConfigError("build_specimen_mesh: L must be positive");
  Quad4Mesh mesh = detail::build_grid(nx, ny, 0.0, 0.0, L, 2.0 * L);
  detail::build_boundary_sets(mesh);
  if (!notch.present) return mesh;

  if (!(notch.tip_x1 > 0.0 && notch.tip_x1 < L))
    throw ConfigError("build_specimen_mesh: notch tip must satisfy 0 < tip_x1 < L");
  const double tol = 1e-9 * L;
  const double jf = notch.x2_position / mesh.dx2;
  const int j_seam = static_cast<int>(std::lround(jf));
  if (std::abs(jf - j_seam) > 1e-9 || j_seam <= 0 || j_seam >= ny)
    throw ConfigError("build_specimen_mesh: notch position not on an interior mesh line");
  const double ifr = notch.tip_x1 / mesh.dx1;
  const int i_tip = static_cast<int>(std::lround(ifr));
  if (std::abs(notch.tip_x1 - i_tip * mesh.dx1) > tol)
    throw ConfigError("build_specimen_mesh: notch tip not on a mesh vertical line");

  // Duplicate seam nodes x1 in [0, tip_x1] and remap the elements whose
  // bottom edge lies on the open crack (strictly left of the tip).
  std::vector<int> lower, upper;
  std::map<int, int> duplicate;
  for (int i = 0; i <= i_tip; ++i) {
    const int orig = mesh.grid_node(i, j_seam);
    const int dup = mesh.n_nodes();
    mesh.nodes.push_back(mesh.nodes[orig]);
    duplicate[orig] = dup;
    lower.push_back(orig);
    upper.push_back(dup);
  }
  for (int i = 0; i < i_tip; ++i) {
    auto& conn = mesh.elements[i + j_seam * nx]; // element just above the seam
    for (int& node : conn) {
      auto it = duplicate.find(node);
      if (it != duplicate.end()) node = it->second;
    }
  }
  mesh.node_sets["crack_lower"] = lower;
  mesh.node_sets["crack_upper"] = upper;
  // The crack mouth sits on the left boundary; both copies belong to it.
  mesh.node_sets["left"].push_back(duplicate.at(mesh.grid_node(0, j_seam)));
  mesh.notch = notch;
  return mesh;
}

struct PointLocation {
  int element = -1;
  double xi = 0.0;
  double eta = 0.0;
};

/// Locate a physical point in the structured mesh and return its element and
/// local coordinates. Throws for points outside the domain and for points
/// exactly on an open notch seam (the side is ambiguous; offset the query).
inline PointLocation locate_point(const Quad4Mesh& mesh, const Point2& p) {
  const double len1 = mesh.nx * mesh.dx1, len2 = mesh.ny * mesh.dx2;
  const double tol = 1e-12 * std::max(len1, len2);
  if (p.x1 < mesh.x1_min - tol || p.x1 > mesh.x1_min + len1 + tol || p.x2 < mesh.x2_min - tol ||
      p.x2 > mesh.x2_min + len2 + tol)
    throw ConfigError("locate_point: point outside mesh domain");
  if (mesh.notch.present && std::abs(p.x2 - mesh.notch.x2_position) <= tol &&
      p.x1 <= mesh.notch.tip_x1 - tol)
    throw ConfigError("locate_point: point lies on the notch seam; offset it to pick a side");

  auto cell_index = [](double v, double vmin, double dv, int n) {
    int i = static_cast<int>(std::floor((v - vmin) / dv));
    return std::max(0, std::min(n - 1, i));
  };
  const int i = cell_index(p.x1, mesh.x1_min, mesh.dx1, mesh.nx);
  const int j = cell_index(p.x2, mesh.x2_min, mesh.dx2, mesh.ny);
  const int e = i + j * mesh.nx;

  // Inverse bilinear map by Newton iteration (one step suffices on the
  // axis-aligned rectangles built here, but the loop keeps it general).
  const auto c = mesh.element_coords(e);
  double xi = 0.0, eta = 0.0;
  for (int it = 0; it < 30; ++it) {
    const double n0 = 0.25 * (1 - xi) * (1 - eta), n1 = 0.25 * (1 + xi) * (1 - eta);
    const double n2 = 0.25 * (1 + xi) * (1 + eta), n3 = 0.25 * (1 - xi) * (1 + eta);
    const double rx = n0 * c[0].x1 + n1 * c[1].x1 + n2 * c[2].x1 + n3 * c[3].x1 - p.x1;
    const double ry = n0 * c[0].x2 + n1 * c[1].x2 + n2 * c[2].x2 + n3 * c[3].x2 - p.x2;
    if (std::abs(rx) + std::abs(ry) < 1e-14 * std::max(1.0, std::max(len1, len2))) break;
    const double j11 = 0.25 * (-(1 - eta) * c[0].x1 + (1 - eta) * c[1].x1 + (1 + eta) * c[2].x1 -
                               (1 + eta) * c[3].x1);
    const double j12 = 0.25 * (-(1 - xi) * c[0].x1 - (1 + xi) * c[1].x1 + (1 + xi) * c[2].x1 +
                               (1 - xi) * c[3].x1);
    const double j21 = 0.25 * (-(1 - eta) * c[0].x2 + (1 - eta) * c[1].x2 + (1 + eta) * c[2].x2 -
                               (1 + eta) * c[3].x2);
    const double j22 = 0.25 * (-(1 - xi) * c[0].x2 - (1 + xi) * c[1].x2 + (1 + xi) * c[2].x2 +
                               (1 - xi) * c[3].x2);
    const double det = j11 * j22 - j12 * j21;
    xi -= (j22 * rx - j12 * ry) / det;
    eta -= (-j21 * rx + j11 * ry) / det;
  }
  const double clip = 1.0 + 1e-9;
  if (std::abs(xi) > clip || std::abs(eta) > clip)
    throw NumericError("locate_point: inverse map left the reference element");
  return {e, std::clamp(xi, -1.0, 1.0), std::clamp(eta, -1.0, 1.0)};
}

} // namespace microfrac

#endif
