#pragma once

#include "raouu/fem.hpp"
#include "raouu/gaussian_field.hpp"
#include "raouu/spd_solver.hpp"

#include <atomic>

namespace raouu {

/// -Lap u + c u^3 = z in the domain, u = 0 on the left/right sides and
/// grad u . n = m on the bottom/top sides. The uncertain Neumann datum m lives
/// on the nodes of the bottom and top sides (corners included), ordered bottom
/// then top, each by increasing x.
class SemilinearProblem {
 public:
  SemilinearProblem(std::shared_ptr<const Mesh> mesh, double c, Vector desired_state,
                    double newton_tol = 1e-10, int newton_max_iter = 50)
      : space_(std::move(mesh)), c_(c), u_d_(std::move(desired_state)),
        newton_tol_(newton_tol), newton_max_iter_(newton_max_iter) {
    const Mesh& msh = space_.mesh();
    require(c >= 0.0, "nonlinearity coefficient must be non-negative");
    require(!msh.dirichlet_nodes().empty(), "semilinear problem needs a Dirichlet boundary");
    require(msh.dirichlet_sides() == std::set<Side>{Side::Left, Side::Right},
            "semilinear problem expects Dirichlet data on the left and right sides");
    require(u_d_.size() == space_.size() && u_d_.allFinite(), "desired state has wrong length");
    require(newton_tol > 0.0 && newton_max_iter >= 1, "invalid Newton settings");

    mass_ = space_.mass();
    laplacian_ = space_.laplacian();

    for (Side s : {Side::Bottom, Side::Top}) {
      const auto nodes = msh.side_nodes(s);
      const int offset = static_cast<int>(trace_nodes_.size());
      trace_nodes_.insert(trace_nodes_.end(), nodes.begin(), nodes.end());
      for (int k = 0; k + 1 < static_cast<int>(nodes.size()); ++k) segments_.push_back({offset + k, offset + k + 1});
    }
    const int nb = static_cast<int>(trace_nodes_.size());
    const double h = msh.hx();
    std::vector<Eigen::Triplet<double>> mt, kt, bt;
    for (const auto& [s0, s1] : segments_) {
      mt.emplace_back(s0, s0, h / 3.0);
      mt.emplace_back(s1, s1, h / 3.0);
      mt.emplace_back(s0, s1, h / 6.0);
      mt.emplace_back(s1, s0, h / 6.0);
      kt.emplace_back(s0, s0, 1.0 / h);
      kt.emplace_back(s1, s1, 1.0 / h);
      kt.emplace_back(s0, s1, -1.0 / h);
      kt.emplace_back(s1, s0, -1.0 / h);
      const int a = trace_nodes_[s0], b = trace_nodes_[s1];
      bt.emplace_back(a, s0, h / 3.0);
      bt.emplace_back(b, s1, h / 3.0);
      bt.emplace_back(a, s1, h / 6.0);
      bt.emplace_back(b, s0, h / 6.0);
    }
    boundary_mass_.resize(nb, nb);
    boundary_mass_.setFromTriplets(mt.begin(), mt.end());
    boundary_stiffness_.resize(nb, nb);
    boundary_stiffness_.setFromTriplets(kt.begin(), kt.end());
    coupling_.resize(space_.size(), nb);
    coupling_.setFromTriplets(bt.begin(), bt.end());
  }

  const FemSpace& space() const { return space_; }
  const Mesh& mesh() const { return space_.mesh(); }
  double c() const { return c_; }
  const Vector& desired_state() const { return u_d_; }
  double newton_tol() const { return newton_tol_; }
  int newton_max_iter() const { return newton_max_iter_; }
  const SparseMatrix& mass() const { return mass_; }
  const SparseMatrix& laplacian() const { return laplacian_; }
  int boundary_size() const { return static_cast<int>(trace_nodes_.size()); }
  const std::vector<int>& trace_nodes() const { return trace_nodes_; }
  /// L2 mass on the Neumann sides, in BoundaryField coordinates.
  const SparseMatrix& boundary_mass() const { return boundary_mass_; }
  /// 1D Laplacian along each Neumann side (natural conditions at side ends).
  const SparseMatrix& boundary_stiffness() const { return boundary_stiffness_; }
  /// B(i, s) = int_{Gamma_N} phi_i psi_s.
  const SparseMatrix& coupling() const { return coupling_; }

  Vector trace(const Vector& u) const {
    Vector t(boundary_size());
    for (int s = 0; s < boundary_size(); ++s) t[s] = u[trace_nodes_[s]];
    return t;
  }

  /// c u^3 tested against each basis function.
  Vector nonlinear_term(const Vector& u) const {
    if (c_ == 0.0) return Vector::Zero(space_.size());
    const Vector uq = space_.at_qp(u);
    return space_.apply_mass(c_ * uq.cwiseProduct(uq), u);
  }

  /// Jacobian K + 3c M[u^2].
  SparseMatrix jacobian(const Vector& u) const {
    if (c_ == 0.0) return laplacian_;
    const Vector uq = space_.at_qp(u);
    SparseMatrix j = laplacian_ + space_.weighted_mass(3.0 * c_ * uq.cwiseProduct(uq));
    return j;
  }

  Vector residual(const Vector& u, const Vector& z, const Vector& m) const {
    Vector r = laplacian_ * u + nonlinear_term(u) - mass_ * z - coupling_ * m;
    for (int n : mesh().dirichlet_nodes()) r[n] = 0.0;
    return r;
  }

  /// 1/2 ||u - u_d||^2.
  double objective(const Vector& u) const {
    const Vector d = u - u_d_;
    return 0.5 * d.dot(mass_ * d);
  }

  /// Gaussian law for the Neumann datum, built on the 1D boundary mesh.
  GaussianField boundary_gaussian_field(double kappa, double alpha, Vector mean) const {
    return GaussianField(boundary_stiffness_, boundary_mass_, kappa, alpha, std::move(mean));
  }

 private:
  FemSpace space_;
  double c_;
  Vector u_d_;
  double newton_tol_;
  int newton_max_iter_;
  SparseMatrix mass_, laplacian_;
  std::vector<int> trace_nodes_;
  std::vector<std::pair<int, int>> segments_;
  SparseMatrix boundary_mass_, boundary_stiffness_, coupling_;
};

struct NewtonReport {
  Vector u;
  int iterations = 0;
  std::vector<double> history;  // Newton decrement sqrt(r^T J^{-1} r) per iterate
};

/// Newton's method from u = 0. Stops when the decrement (the residual in the
/// J^{-1} norm) drops below newton_tol * max(1, initial decrement).
inline NewtonReport solve_semilinear_newton(const SemilinearProblem& prob, const Vector& z, const Vector& m) {
  require(z.size() == prob.space().size() && z.allFinite(), "control field has wrong length");
  require(m.size() == prob.boundary_size() && m.allFinite(), "Neumann datum has wrong length");
  const auto& dn = prob.mesh().dirichlet_nodes();
  NewtonReport rep;
  rep.u = Vector::Zero(prob.space().size());
  SpdSolver solver(SolverKind::Cholesky);
  double d0 = -1.0;
  for (int it = 0; it <= prob.newton_max_iter(); ++it) {
    const Vector r = prob.residual(rep.u, z, m);
    solver.factorize(prob.jacobian(rep.u), dn);
    const Vector step = solver.solve_homogeneous(-r);
    const double dec = std::sqrt(std::max(0.0, -r.dot(step)));
    rep.history.push_back(dec);
    if (d0 < 0.0) d0 = dec;
    rep.u += step;
    rep.iterations = it + 1;
    if (prob.c() == 0.0 || dec <= prob.newton_tol() * std::max(1.0, d0)) return rep;
  }
  throw NumericalFailure("Newton iteration budget exhausted", rep.history.back(), rep.history);
}

inline Vector solve_semilinear_state(const SemilinearProblem& prob, const Vector& z, const Vector& m) {
  return solve_semilinear_newton(prob, z, m).u;
}

/// Linearization of the parameter-to-objective map at (z, m_bar): state,
/// adjoint and a factorized Jacobian reused by every Hessian action.
class SemilinearLinearization {
 public:
  SemilinearLinearization(const SemilinearProblem& prob, Vector z, Vector m_bar)
      : prob_(&prob), z_(std::move(z)), m_bar_(std::move(m_bar)) {
    u_ = solve_semilinear_state(prob, z_, m_bar_);
    jac_.factorize(prob.jacobian(u_), prob.mesh().dirichlet_nodes());
    p_ = solve(-(prob.mass() * (u_ - prob.desired_state())));
    if (prob.c() != 0.0) {
      const Vector uq = prob.space().at_qp(u_);
      const Vector pq = prob.space().at_qp(p_);
      second_ = 6.0 * prob.c() * uq.cwiseProduct(pq);
    }
  }
  SemilinearLinearization(const SemilinearLinearization&) = delete;
  SemilinearLinearization& operator=(const SemilinearLinearization&) = delete;

  const Vector& u() const { return u_; }
  const Vector& p() const { return p_; }
  const Vector& m_bar() const { return m_bar_; }
  double objective() const { return prob_->objective(u_); }
  long solve_count() const { return solves_.load(); }

  /// Theta_m(m_bar) = -p|Gamma_N, the representer in the boundary L2 product.
  Vector gradient() const { return -prob_->trace(p_); }

  /// Theta_mm(m_bar) mhat = -phat|Gamma_N.
  Vector hessian_action(const Vector& mhat) const {
    require(mhat.size() == prob_->boundary_size(), "boundary direction has wrong length");
    const Vector uhat = solve(prob_->coupling() * mhat);
    Vector rhs = -(prob_->mass() * uhat);
    if (second_.size() > 0) rhs -= prob_->space().apply_mass(second_, uhat);
    return -prob_->trace(solve(rhs));
  }

 private:
  Vector solve(const Vector& rhs) const {
    ++solves_;
    return jac_.solve_homogeneous(rhs);
  }

  const SemilinearProblem* prob_;
  Vector z_, m_bar_, u_, p_;
  Vector second_;
  SpdSolver jac_{SolverKind::Cholesky};
  mutable std::atomic<long> solves_{0};
};

inline Vector semilinear_grad_m(const SemilinearProblem& prob, const Vector& z, const Vector& m_bar) {
  return SemilinearLinearization(prob, z, m_bar).gradient();
}

inline Vector semilinear_hess_action(const SemilinearProblem& prob, const Vector& z, const Vector& m_bar,
                                     const Vector& mhat) {
  return SemilinearLinearization(prob, z, m_bar).hessian_action(mhat);
}

}  // namespace raouu
