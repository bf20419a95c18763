#pragma once

#include "raouu/common.hpp"

#include <algorithm>
#include <array>
#include <initializer_list>
#include <memory>
#include <set>

namespace raouu {

enum class Side { Left, Right, Bottom, Top };

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct BoundaryEdge {
  int a = 0;  // node indices, ordered along the side
  int b = 0;
  Side side = Side::Bottom;
};

/// Structured grid of axis-aligned bilinear quadrilaterals on (0,lx)x(0,ly).
/// Node (i,j) has index j*(nx+1)+i; element (i,j) has index j*nx+i and local
/// nodes ordered counter-clockwise from the lower-left corner.
class Mesh {
 public:
  Mesh(int nx, int ny, double lx, double ly, std::set<Side> dirichlet_sides)
      : nx_(nx), ny_(ny), lx_(lx), ly_(ly), dirichlet_sides_(std::move(dirichlet_sides)) {
    require(nx >= 1 && ny >= 1, "mesh needs at least one element per axis");
    require(lx > 0.0 && ly > 0.0 && std::isfinite(lx) && std::isfinite(ly),
            "mesh extents must be positive");
    hx_ = lx_ / nx_;
    hy_ = ly_ / ny_;
    coords_.reserve(num_nodes());
    for (int j = 0; j <= ny_; ++j)
      for (int i = 0; i <= nx_; ++i) coords_.push_back({i * hx_, j * hy_});

    is_dirichlet_.assign(num_nodes(), false);
    auto tag_side = [&](Side s) {
      for (int n : side_nodes(s)) is_dirichlet_[n] = true;
    };
    for (Side s : dirichlet_sides_) tag_side(s);
    for (int n = 0; n < num_nodes(); ++n) {
      if (is_dirichlet_[n])
        dirichlet_nodes_.push_back(n);
      else
        free_nodes_.push_back(n);
    }
    for (Side s : {Side::Bottom, Side::Top, Side::Left, Side::Right}) {
      if (dirichlet_sides_.count(s)) continue;
      auto nodes = side_nodes(s);
      for (std::size_t k = 0; k + 1 < nodes.size(); ++k)
        neumann_edges_.push_back({nodes[k], nodes[k + 1], s});
    }
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  int num_nodes() const { return (nx_ + 1) * (ny_ + 1); }
  int num_elements() const { return nx_ * ny_; }
  int node(int i, int j) const { return j * (nx_ + 1) + i; }
  const Point& coord(int n) const { return coords_[n]; }
  const std::vector<Point>& coords() const { return coords_; }

  std::array<int, 4> element_nodes(int e) const {
    const int i = e % nx_;
    const int j = e / nx_;
    return {node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)};
  }
  Point element_origin(int e) const { return {(e % nx_) * hx_, (e / nx_) * hy_}; }

  const std::set<Side>& dirichlet_sides() const { return dirichlet_sides_; }
  bool is_dirichlet(int n) const { return is_dirichlet_[n]; }
  const std::vector<int>& dirichlet_nodes() const { return dirichlet_nodes_; }
  const std::vector<int>& free_nodes() const { return free_nodes_; }
  const std::vector<BoundaryEdge>& neumann_edges() const { return neumann_edges_; }

  bool is_boundary(int n) const {
    const int i = n % (nx_ + 1);
    const int j = n / (nx_ + 1);
    return i == 0 || j == 0 || i == nx_ || j == ny_;
  }

  /// Boundary nodes that are not Dirichlet.
  std::vector<int> neumann_nodes() const {
    std::vector<int> out;
    for (int n = 0; n < num_nodes(); ++n)
      if (is_boundary(n) && !is_dirichlet_[n]) out.push_back(n);
    return out;
  }

  /// Nodes of one side, ordered by increasing coordinate along the side.
  std::vector<int> side_nodes(Side s) const {
    std::vector<int> out;
    switch (s) {
      case Side::Left:
        for (int j = 0; j <= ny_; ++j) out.push_back(node(0, j));
        break;
      case Side::Right:
        for (int j = 0; j <= ny_; ++j) out.push_back(node(nx_, j));
        break;
      case Side::Bottom:
        for (int i = 0; i <= nx_; ++i) out.push_back(node(i, 0));
        break;
      case Side::Top:
        for (int i = 0; i <= nx_; ++i) out.push_back(node(i, ny_));
        break;
    }
    return out;
  }

  /// Element containing p (clamped to the domain).
  int locate(const Point& p) const {
    int i = std::clamp(static_cast<int>(std::floor(p.x / hx_)), 0, nx_ - 1);
    int j = std::clamp(static_cast<int>(std::floor(p.y / hy_)), 0, ny_ - 1);
    return j * nx_ + i;
  }

  bool contains_strictly(const Point& p) const {
    return p.x > 0.0 && p.x < lx_ && p.y > 0.0 && p.y < ly_;
  }

 private:
  int nx_, ny_;
  double lx_, ly_, hx_ = 0.0, hy_ = 0.0;
  std::set<Side> dirichlet_sides_;
  std::vector<Point> coords_;
  std::vector<bool> is_dirichlet_;
  std::vector<int> dirichlet_nodes_;
  std::vector<int> free_nodes_;
  std::vector<BoundaryEdge> neumann_edges_;
};

inline std::shared_ptr<const Mesh> build_mesh(int nx, int ny, double lx, double ly,
                                              std::set<Side> dirichlet_sides) {
  return std::make_shared<const Mesh>(nx, ny, lx, ly, std::move(dirichlet_sides));
}

/// Nodal coefficient vector bound to a mesh.
struct ScalarField {
  std::shared_ptr<const Mesh> mesh;
  Vector values;

  ScalarField() = default;
  ScalarField(std::shared_ptr<const Mesh> m, Vector v) : mesh(std::move(m)), values(std::move(v)) {
    require(mesh != nullptr, "field needs a mesh");
    require(values.size() == mesh->num_nodes(), "field length must equal the node count");
    require(values.allFinite(), "field values must be finite");
  }
};

/// Nodal interpolant of f.
template <class F>
Vector interpolate(const Mesh& mesh, F&& f) {
  Vector v(mesh.num_nodes());
  for (int n = 0; n < mesh.num_nodes(); ++n) v[n] = f(mesh.coord(n).x, mesh.coord(n).y);
  return v;
}

}  // namespace raouu
