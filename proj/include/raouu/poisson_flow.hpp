#pragma once

#include "raouu/fem.hpp"
#include "raouu/gaussian_field.hpp"
#include "raouu/spd_solver.hpp"

#include <atomic>
#include <numbers>

namespace raouu {

/// Parabolic target pressure profile used for the production wells.
inline double target_pressure(const Point& x) {
  return 3.0 - 4.0 * (x.x - 1.0) * (x.x - 1.0) - 8.0 * (x.y - 0.5) * (x.y - 0.5);
}

/// Injection (control) and production (observation) wells. Both act through
/// the same normalized Gaussian mollifier of width sigma, truncated at 4 sigma.
struct WellConfig {
  std::vector<Point> controls;
  std::vector<Point> production;
  double mollifier_width = 0.05;
  Vector targets;

  static WellConfig canonical() {
    WellConfig w;
    for (double y : {0.2, 0.4, 0.6, 0.8})
      for (double x : {1.0 / 3.0, 2.0 / 3.0, 1.0, 4.0 / 3.0, 5.0 / 3.0}) w.controls.push_back({x, y});
    for (double y : {0.25, 0.5, 0.75})
      for (double x : {0.4, 0.8, 1.2, 1.6}) w.production.push_back({x, y});
    w.targets.resize(static_cast<Eigen::Index>(w.production.size()));
    for (std::size_t i = 0; i < w.production.size(); ++i) w.targets[i] = target_pressure(w.production[i]);
    return w;
  }

  int num_controls() const { return static_cast<int>(controls.size()); }
  int num_observations() const { return static_cast<int>(production.size()); }
};

inline double mollifier(const Point& center, double sigma, double x, double y) {
  const double r2 = (x - center.x) * (x - center.x) + (y - center.y) * (y - center.y);
  if (r2 > 16.0 * sigma * sigma) return 0.0;
  return std::exp(-0.5 * r2 / (sigma * sigma)) / (2.0 * std::numbers::pi * sigma * sigma);
}

/// Control bounds z_min <= z_i <= z_max.
struct ControlBounds {
  double lower = 0.0;
  double upper = 16.0;

  bool admissible(const Vector& z) const {
    return z.allFinite() && (z.array() >= lower).all() && (z.array() <= upper).all();
  }
  Vector project(const Vector& z) const { return z.cwiseMax(lower).cwiseMin(upper); }
};

/// -div(exp(m) grad u) = F z on (0,lx)x(0,ly) with u = left_value on the left
/// side, u = right_value on the right side and zero flux on top and bottom.
class PoissonFlow {
 public:
  PoissonFlow(std::shared_ptr<const Mesh> mesh, WellConfig wells, double left_value = 1.0,
              double right_value = 0.0)
      : space_(std::move(mesh)), wells_(std::move(wells)) {
    const Mesh& msh = space_.mesh();
    require(msh.dirichlet_sides() == std::set<Side>{Side::Left, Side::Right},
            "flow problem expects Dirichlet data on the left and right sides");
    require(wells_.mollifier_width > 0.0, "mollifier width must be positive");
    require(wells_.targets.size() == wells_.num_observations(), "one target per production well");
    for (const auto& p : wells_.controls) require(msh.contains_strictly(p), "control well outside domain");
    for (const auto& p : wells_.production) require(msh.contains_strictly(p), "production well outside domain");

    mass_ = space_.mass();
    laplacian_ = space_.laplacian();
    mass_llt_.compute(mass_);

    const int n = space_.size();
    sources_.resize(n, wells_.num_controls());
    raw_source_mass_.resize(wells_.num_controls());
    for (int i = 0; i < wells_.num_controls(); ++i) {
      Vector b = mollified_load(wells_.controls[i]);
      raw_source_mass_[i] = b.sum();
      sources_.col(i) = b / b.sum();
    }
    observation_.resize(wells_.num_observations(), n);
    for (int i = 0; i < wells_.num_observations(); ++i) {
      Vector b = mollified_load(wells_.production[i]);
      observation_.row(i) = (b / b.sum()).transpose();
    }
    boundary_ = Vector::Zero(n);
    for (int node : msh.side_nodes(Side::Left)) boundary_[node] = left_value;
    for (int node : msh.side_nodes(Side::Right)) boundary_[node] = right_value;
  }

  const FemSpace& space() const { return space_; }
  const Mesh& mesh() const { return space_.mesh(); }
  const WellConfig& wells() const { return wells_; }
  int size() const { return space_.size(); }
  int num_controls() const { return wells_.num_controls(); }
  const SparseMatrix& mass() const { return mass_; }
  const SparseMatrix& laplacian() const { return laplacian_; }
  const Matrix& sources() const { return sources_; }
  const Matrix& observation() const { return observation_; }
  const Vector& boundary_values() const { return boundary_; }
  /// Quadrature integral of each source mollifier before normalization.
  const Vector& raw_source_mass() const { return raw_source_mass_; }

  Vector mass_solve(const Vector& d) const { return mass_llt_.solve(d); }
  Vector rhs(const Vector& z) const {
    require(z.size() == num_controls(), "control vector has wrong length");
    return sources_ * z;
  }
  Vector observe(const Vector& u) const { return observation_ * u; }
  Vector misfit(const Vector& u) const { return observe(u) - wells_.targets; }

  /// 1/2 |Q u - qbar|^2.
  double control_objective(const Vector& u) const { return 0.5 * misfit(u).squaredNorm(); }

  /// Full solve at an arbitrary parameter (factorizes K(m)).
  Vector solve_state(const Vector& m, const Vector& z, SpdSolver& scratch) const {
    scratch.factorize(space_.weighted_stiffness(m), mesh().dirichlet_nodes());
    return scratch.solve(rhs(z), boundary_);
  }
  Vector solve_state(const Vector& m, const Vector& z) const {
    SpdSolver solver;
    return solve_state(m, z, solver);
  }
  double theta(const Vector& m, const Vector& z) const { return control_objective(solve_state(m, z)); }

 private:
  Vector mollified_load(const Point& c) const {
    const double s = wells_.mollifier_width;
    return space_.load([&](double x, double y) { return mollifier(c, s, x, y); }, 4);
  }

  FemSpace space_;
  WellConfig wells_;
  SparseMatrix mass_;
  SparseMatrix laplacian_;
  Eigen::SimplicialLLT<SparseMatrix> mass_llt_;
  Matrix sources_;
  Matrix observation_;
  Vector boundary_;
  Vector raw_source_mass_;
};

/// Incremental state/adjoint pair and the resulting Hessian action (dual form).
struct IncrementalSolution {
  Vector state;    // upsilon
  Vector adjoint;  // rho
  Vector hess_dual;
};

/// State, adjoint and a factorization of K(m_bar), shared by every equation
/// of one objective evaluation. Counts forward-like solves.
class PdeWorkspace {
 public:
  PdeWorkspace(const PoissonFlow& problem, Vector m_bar) : problem_(&problem), m_bar_(std::move(m_bar)) {
    require(m_bar_.size() == problem.size(), "parameter field has wrong length");
    exp_qp_ = problem.space().exp_coefficient(m_bar_);
    solver_.factorize(problem.space().stiffness(exp_qp_), problem.mesh().dirichlet_nodes());
  }
  PdeWorkspace(const PdeWorkspace&) = delete;
  PdeWorkspace& operator=(const PdeWorkspace&) = delete;

  const PoissonFlow& problem() const { return *problem_; }
  const Vector& m_bar() const { return m_bar_; }
  const Vector& exp_qp() const { return exp_qp_; }
  const Vector& u() const { return u_; }
  const Vector& p() const { return p_; }
  const Vector& z() const { return z_; }
  long solve_count() const { return solves_.load(); }
  void reset_solve_count() { solves_ = 0; }

  /// exp(m_bar) * v at quadrature points.
  Vector coefficient(const Vector& v) const {
    return exp_qp_.cwiseProduct(problem_->space().at_qp(v));
  }

  /// K(m_bar) x = rhs with homogeneous Dirichlet data.
  Vector solve(const Vector& rhs) const {
    ++solves_;
    return solver_.solve_homogeneous(rhs);
  }

  void solve_state(const Vector& z) {
    require(z.allFinite(), "control must be finite");
    z_ = z;
    ++solves_;
    u_ = solver_.solve(problem_->rhs(z), problem_->boundary_values());
  }

  void solve_adjoint() {
    require(u_.size() == problem_->size(), "state must be solved before the adjoint");
    const Matrix& q = problem_->observation();
    p_ = solve(-(q.transpose() * problem_->misfit(u_)));
  }

  void solve_state_adjoint(const Vector& z) {
    solve_state(z);
    solve_adjoint();
  }

  double control_objective() const { return problem_->control_objective(u_); }

  /// Derivative of the objective w.r.t. nodal m: d_k = <exp(m) phi_k grad u, grad p>.
  Vector gradient_dual() const { return problem_->space().gradient_pairing(exp_qp_, u_, p_); }

  /// L2 (nodal) representation of exp(m) grad u . grad p.
  Vector gradient() const { return problem_->mass_solve(gradient_dual()); }

  IncrementalSolution incremental(const Vector& zeta) const {
    require(zeta.size() == problem_->size(), "direction has wrong length");
    const FemSpace& sp = problem_->space();
    const Matrix& q = problem_->observation();
    const Vector c_zeta = coefficient(zeta);
    IncrementalSolution out;
    out.state = solve(-sp.apply_stiffness(c_zeta, u_));
    out.adjoint = solve(-(q.transpose() * (q * out.state)) - sp.apply_stiffness(c_zeta, p_));
    out.hess_dual = sp.gradient_pairing(c_zeta, u_, p_) + sp.gradient_pairing(exp_qp_, out.state, p_) +
                    sp.gradient_pairing(exp_qp_, u_, out.adjoint);
    return out;
  }

  Vector hessian_action_dual(const Vector& zeta) const { return incremental(zeta).hess_dual; }

  /// psi = Theta_mm(m_bar) zeta as a nodal field.
  Vector hessian_action(const Vector& zeta) const { return problem_->mass_solve(hessian_action_dual(zeta)); }

 private:
  const PoissonFlow* problem_;
  Vector m_bar_;
  Vector exp_qp_;
  SpdSolver solver_;
  Vector z_, u_, p_;
  mutable std::atomic<long> solves_{0};
};

/// Prior on log-permeability over the flow mesh.
inline GaussianField make_gaussian_field(const PoissonFlow& problem, double kappa, double alpha,
                                         Vector mean) {
  return GaussianField(problem.laplacian(), problem.mass(), kappa, alpha, std::move(mean));
}

}  // namespace raouu
