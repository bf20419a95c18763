#pragma once

#include "raouu/mesh.hpp"

#include <array>
#include <memory>

namespace raouu {

/// Gauss-Legendre points and weights on [-1,1].
inline std::vector<std::pair<double, double>> gauss_rule(int order) {
  switch (order) {
    case 1:
      return {{0.0, 2.0}};
    case 2: {
      const double a = 1.0 / std::sqrt(3.0);
      return {{-a, 1.0}, {a, 1.0}};
    }
    case 3: {
      const double a = std::sqrt(0.6);
      return {{-a, 5.0 / 9.0}, {0.0, 8.0 / 9.0}, {a, 5.0 / 9.0}};
    }
    case 4: {
      const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(1.2));
      const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(1.2));
      const double wa = (18.0 + std::sqrt(30.0)) / 36.0;
      const double wb = (18.0 - std::sqrt(30.0)) / 36.0;
      return {{-b, wb}, {-a, wa}, {a, wa}, {b, wb}};
    }
    default:
      throw InvalidArgument("unsupported Gauss order");
  }
}

/// Q1 shape data at tensor Gauss points of one (uniform) element.
struct ElementQuadrature {
  int npts = 0;
  std::vector<std::array<double, 4>> shape;
  std::vector<std::array<double, 4>> dshape_x;
  std::vector<std::array<double, 4>> dshape_y;
  std::vector<double> weight;  // includes the Jacobian determinant
  std::vector<Point> offset;   // quadrature point relative to the element origin

  ElementQuadrature(double hx, double hy, int order) {
    static constexpr std::array<double, 4> xi_a{-1.0, 1.0, 1.0, -1.0};
    static constexpr std::array<double, 4> eta_a{-1.0, -1.0, 1.0, 1.0};
    const auto rule = gauss_rule(order);
    const double det = 0.25 * hx * hy;
    for (const auto& [eta, weta] : rule) {
      for (const auto& [xi, wxi] : rule) {
        std::array<double, 4> n{}, dx{}, dy{};
        for (int a = 0; a < 4; ++a) {
          n[a] = 0.25 * (1.0 + xi_a[a] * xi) * (1.0 + eta_a[a] * eta);
          dx[a] = 0.25 * xi_a[a] * (1.0 + eta_a[a] * eta) * (2.0 / hx);
          dy[a] = 0.25 * eta_a[a] * (1.0 + xi_a[a] * xi) * (2.0 / hy);
        }
        shape.push_back(n);
        dshape_x.push_back(dx);
        dshape_y.push_back(dy);
        weight.push_back(wxi * weta * det);
        offset.push_back({0.5 * hx * (1.0 + xi), 0.5 * hy * (1.0 + eta)});
        ++npts;
      }
    }
  }
};

/// Bilinear finite-element space on a structured mesh. Owns the shared sparsity
/// pattern; every operator assembled here uses that pattern so factorizations
/// can reuse one symbolic analysis.
class FemSpace {
 public:
  static constexpr int kQuadOrder = 2;
  static constexpr int kQp = 4;

  explicit FemSpace(std::shared_ptr<const Mesh> mesh)
      : mesh_(std::move(mesh)), quad_(mesh_->hx(), mesh_->hy(), kQuadOrder) {
    require(mesh_ != nullptr, "FemSpace needs a mesh");
    const int n = mesh_->num_nodes();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(mesh_->num_elements()) * 16);
    for (int e = 0; e < mesh_->num_elements(); ++e) {
      const auto nodes = mesh_->element_nodes(e);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) trip.emplace_back(nodes[a], nodes[b], 1.0);
    }
    pattern_.resize(n, n);
    pattern_.setFromTriplets(trip.begin(), trip.end());
    pattern_.makeCompressed();

    slot_.resize(static_cast<std::size_t>(mesh_->num_elements()) * 16);
    for (int e = 0; e < mesh_->num_elements(); ++e) {
      const auto nodes = mesh_->element_nodes(e);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) slot_[e * 16 + a * 4 + b] = find_slot(nodes[a], nodes[b]);
    }
    for (int q = 0; q < kQp; ++q) {
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          grad_[q][a][b] = quad_.weight[q] * (quad_.dshape_x[q][a] * quad_.dshape_x[q][b] +
                                              quad_.dshape_y[q][a] * quad_.dshape_y[q][b]);
          mass_[q][a][b] = quad_.weight[q] * quad_.shape[q][a] * quad_.shape[q][b];
        }
    }
  }

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  int size() const { return mesh_->num_nodes(); }
  const ElementQuadrature& quadrature() const { return quad_; }
  int num_qp() const { return mesh_->num_elements() * kQp; }

  /// Consistent mass matrix (exact for Q1 with 2x2 Gauss).
  SparseMatrix mass() const {
    SparseMatrix m = pattern_;
    double* val = m.valuePtr();
    std::fill(val, val + m.nonZeros(), 0.0);
    for (int e = 0; e < mesh_->num_elements(); ++e)
      for (int q = 0; q < kQp; ++q)
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) val[slot_[e * 16 + a * 4 + b]] += mass_[q][a][b];
    return m;
  }

  /// Stiffness with coefficient given at quadrature points (length num_qp()).
  SparseMatrix stiffness(const Vector& qp_coeff) const {
    require(qp_coeff.size() == num_qp(), "coefficient must live on quadrature points");
    SparseMatrix k = pattern_;
    double* val = k.valuePtr();
    std::fill(val, val + k.nonZeros(), 0.0);
    for (int e = 0; e < mesh_->num_elements(); ++e)
      for (int q = 0; q < kQp; ++q) {
        const double c = qp_coeff[e * kQp + q];
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) val[slot_[e * 16 + a * 4 + b]] += c * grad_[q][a][b];
      }
    return k;
  }

  /// Laplacian stiffness K(0).
  SparseMatrix laplacian() const { return stiffness(Vector::Ones(num_qp())); }

  /// K(m): stiffness with coefficient exp(m) evaluated at each quadrature point.
  SparseMatrix weighted_stiffness(const Vector& m) const { return stiffness(exp_coefficient(m)); }

  /// exp of the interpolated nodal field at every quadrature point.
  Vector exp_coefficient(const Vector& m) const {
    require(m.size() == size(), "coefficient field has wrong length");
    require(m.allFinite(), "coefficient field must be finite");
    Vector c = at_qp(m);
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = std::exp(c[i]);
    return c;
  }

  /// Interpolate a nodal field to quadrature points.
  Vector at_qp(const Vector& v) const {
    Vector out(num_qp());
    for (int e = 0; e < mesh_->num_elements(); ++e) {
      const auto nodes = mesh_->element_nodes(e);
      for (int q = 0; q < kQp; ++q) {
        double s = 0.0;
        for (int a = 0; a < 4; ++a) s += quad_.shape[q][a] * v[nodes[a]];
        out[e * kQp + q] = s;
      }
    }
    return out;
  }

  /// Matrix-free y = K_c x, with K_c the stiffness for quadrature coefficient c.
  Vector apply_stiffness(const Vector& qp_coeff, const Vector& x) const {
    Vector y = Vector::Zero(size());
    for (int e = 0; e < mesh_->num_elements(); ++e) {
      const auto nodes = mesh_->element_nodes(e);
      std::array<double, 4> xe{x[nodes[0]], x[nodes[1]], x[nodes[2]], x[nodes[3]]};
      for (int q = 0; q < kQp; ++q) {
        const double c = qp_coeff[e * kQp + q];
        if (c == 0.0) continue;
        for (int a = 0; a < 4; ++a) {
          double s = 0.0;
          for (int b = 0; b < 4; ++b) s += grad_[q][a][b] * xe[b];
          y[nodes[a]] += c * s;
        }
      }
    }
    return y;
  }

  /// Mass-type operator with coefficient at quadrature points.
  SparseMatrix weighted_mass(const Vector& qp_coeff) const {
    require(qp_coeff.size() == num_qp(), "coefficient must live on quadrature points");
    SparseMatrix m = pattern_;
    double* val = m.valuePtr();
    std::fill(val, val + m.nonZeros(), 0.0);
    for (int e = 0; e < mesh_->num_elements(); ++e)
      for (int q = 0; q < kQp; ++q) {
        const double c = qp_coeff[e * kQp + q];
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) val[slot_[e * 16 + a * 4 + b]] += c * mass_[q][a][b];
      }
    return m;
  }

  /// y_i = sum_q w_q c_q x(x_q) phi_i(x_q).
  Vector apply_mass(const Vector& qp_coeff, const Vector& x) const {
    Vector y = Vector::Zero(size());
    for (int e = 0; e < mesh_->num_elements(); ++e) {
      const auto nodes = mesh_->element_nodes(e);
      for (int q = 0; q < kQp; ++q) {
        const double c = qp_coeff[e * kQp + q];
        if (c == 0.0) continue;
        double xq = 0.0;
        for (int a = 0; a < 4; ++a) xq += quad_.shape[q][a] * x[nodes[a]];
        const double s = quad_.weight[q] * c * xq;
        for (int a = 0; a < 4; ++a) y[nodes[a]] += s * quad_.shape[q][a];
      }
    }
    return y;
  }

  /// Dual vector d_k = sum_q w_q c_q (grad a . grad b)(x_q) phi_k(x_q). For any
  /// nodal field t, t.d equals a^T K_{c*t} b.
  Vector gradient_pairing(const Vector& qp_coeff, const Vector& a, const Vector& b) const {
    Vector d = Vector::Zero(size());
    for (int e = 0; e < mesh_->num_elements(); ++e) {
      const auto nodes = mesh_->element_nodes(e);
      for (int q = 0; q < kQp; ++q) {
        const double c = qp_coeff[e * kQp + q];
        if (c == 0.0) continue;
        double ax = 0, ay = 0, bx = 0, by = 0;
        for (int i = 0; i < 4; ++i) {
          ax += quad_.dshape_x[q][i] * a[nodes[i]];
          ay += quad_.dshape_y[q][i] * a[nodes[i]];
          bx += quad_.dshape_x[q][i] * b[nodes[i]];
          by += quad_.dshape_y[q][i] * b[nodes[i]];
        }
        const double s = quad_.weight[q] * c * (ax * bx + ay * by);
        for (int i = 0; i < 4; ++i) d[nodes[i]] += s * quad_.shape[q][i];
      }
    }
    return d;
  }

  /// Load vector int f phi_k using an order x order Gauss rule per element.
  template <class F>
  Vector load(F&& f, int order = 2) const {
    const ElementQuadrature quad(mesh_->hx(), mesh_->hy(), order);
    Vector b = Vector::Zero(size());
    for (int e = 0; e < mesh_->num_elements(); ++e) {
      const auto nodes = mesh_->element_nodes(e);
      const Point o = mesh_->element_origin(e);
      for (int q = 0; q < quad.npts; ++q) {
        const double v = f(o.x + quad.offset[q].x, o.y + quad.offset[q].y) * quad.weight[q];
        if (v == 0.0) continue;
        for (int a = 0; a < 4; ++a) b[nodes[a]] += v * quad.shape[q][a];
      }
    }
    return b;
  }

  /// L2 distance between the finite-element field u and a function f.
  template <class F>
  double l2_error(const Vector& u, F&& f, int order = 3) const {
    const ElementQuadrature quad(mesh_->hx(), mesh_->hy(), order);
    double s = 0.0;
    for (int e = 0; e < mesh_->num_elements(); ++e) {
      const auto nodes = mesh_->element_nodes(e);
      const Point o = mesh_->element_origin(e);
      for (int q = 0; q < quad.npts; ++q) {
        double uh = 0.0;
        for (int a = 0; a < 4; ++a) uh += quad.shape[q][a] * u[nodes[a]];
        const double diff = uh - f(o.x + quad.offset[q].x, o.y + quad.offset[q].y);
        s += quad.weight[q] * diff * diff;
      }
    }
    return std::sqrt(s);
  }

 private:
  int find_slot(int row, int col) const {
    const int* outer = pattern_.outerIndexPtr();
    const int* inner = pattern_.innerIndexPtr();
    for (int k = outer[col]; k < outer[col + 1]; ++k)
      if (inner[k] == row) return k;
    throw InternalError("sparsity pattern is missing an element entry");
  }

  std::shared_ptr<const Mesh> mesh_;
  ElementQuadrature quad_;
  SparseMatrix pattern_;
  std::vector<int> slot_;
  double grad_[kQp][4][4]{};
  double mass_[kQp][4][4]{};
};

}  // namespace raouu
