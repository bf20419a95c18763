#pragma once

#include "raouu/optimizer.hpp"
#include "raouu/parallel.hpp"
#include "raouu/poisson_flow.hpp"
#include "raouu/quad_risk.hpp"

#include <optional>

namespace raouu {

enum class SurrogateKind { Linear, Quadratic };

inline const char* to_string(SurrogateKind k) { return k == SurrogateKind::Linear ? "linear" : "quadratic"; }

struct OuuConfig {
  double beta = 1.0;
  double gamma = 1e-5;
  int n_tr = 40;
  TraceMode trace_mode = TraceMode::Randomized;
  SurrogateKind surrogate = SurrogateKind::Quadratic;
  std::vector<double> beta_schedule{0.0, 0.25, 0.5, 0.75, 1.0};
  double grad_reduction_tol = 5e-4;
  int max_iter = 200;
  std::uint64_t seed = 1;
  ControlBounds bounds;
  int threads = 1;

  void validate() const {
    require(std::isfinite(beta) && beta >= 0.0, "beta must be non-negative");
    require(std::isfinite(gamma) && gamma > 0.0, "gamma must be positive");
    require(surrogate == SurrogateKind::Linear || n_tr >= 1, "the quadratic surrogate needs n_tr >= 1");
    require(n_tr >= 0, "n_tr must be non-negative");
    require(!beta_schedule.empty(), "beta schedule must not be empty");
    for (std::size_t i = 0; i < beta_schedule.size(); ++i) {
      require(beta_schedule[i] >= 0.0, "beta schedule entries must be non-negative");
      if (i > 0) require(beta_schedule[i] > beta_schedule[i - 1], "beta schedule must be ascending");
    }
    require(beta_schedule.back() == beta, "beta schedule must end at beta");
    require(grad_reduction_tol > 0.0 && grad_reduction_tol < 1.0, "gradient reduction tolerance must lie in (0, 1)");
    require(max_iter >= 1, "max_iter must be positive");
    require(bounds.lower < bounds.upper, "control bounds must satisfy lower < upper");
    require(threads >= 1, "threads must be positive");
  }
};

/// J = mean_term + beta/2 variance_term + control_cost, with
/// mean_term = Theta + 1/2 tr_HC and variance_term = grad_term + 1/2 tr_HC_sq.
struct RiskReport {
  double J = 0.0;
  double theta = 0.0;
  double mean_term = 0.0;
  double variance_term = 0.0;
  double grad_term = 0.0;
  double tr_HC = 0.0;
  double tr_HC_sq = 0.0;
  double control_cost = 0.0;
  double beta = 0.0;
  long pde_solves = 0;
  double grad_norm = NAN;
};

/// Quadratic-surrogate OUU objective J(z) for the flow problem with frozen
/// trace directions. Every PDE shares the factorization of K(m_bar), which
/// does not depend on the control.
class OuuObjective {
 public:
  OuuObjective(const PoissonFlow& flow, const GaussianField& gf, OuuConfig cfg, std::vector<Vector> directions,
               double weight)
      : flow_(&flow), gf_(&gf), cfg_(std::move(cfg)), ws_(flow, gf.mean()), dirs_(std::move(directions)),
        weight_(weight) {
    cfg_.validate();
    require(gf.size() == flow.size(), "Gaussian field and flow problem live on different meshes");
    if (cfg_.surrogate == SurrogateKind::Linear) dirs_.clear();
    for (const auto& d : dirs_) require(d.size() == flow.size(), "trace direction has wrong length");
    dir_qp_.reserve(dirs_.size());
    for (const auto& d : dirs_) dir_qp_.push_back(flow.space().at_qp(d));
  }

  /// Trace directions zeta_j ~ N(0, C) drawn once from cfg.seed.
  static OuuObjective randomized(const PoissonFlow& flow, const GaussianField& gf, const OuuConfig& cfg) {
    std::vector<Vector> dirs;
    if (cfg.surrogate == SurrogateKind::Quadratic) dirs = gf.draw_trace_vectors(cfg.n_tr, cfg.seed);
    return OuuObjective(flow, gf, cfg, std::move(dirs), cfg.n_tr > 0 ? 1.0 / cfg.n_tr : 0.0);
  }

  /// Directions w_j = C^{1/2} v_j from the dominant eigenvectors of the
  /// preconditioned Hessian at the nominal control z_nominal.
  static OuuObjective eigenbasis(const PoissonFlow& flow, const GaussianField& gf, const OuuConfig& cfg,
                                 const Vector& z_nominal, EigenBasis* basis_out = nullptr) {
    std::vector<Vector> dirs;
    if (cfg.surrogate == SurrogateKind::Quadratic) {
      PdeWorkspace ws(flow, gf.mean());
      ws.solve_state_adjoint(z_nominal);
      EigenOptions opt;
      opt.seed = cfg.seed;
      EigenBasis basis = preconditioned_eigenpairs(gf, [&](const Vector& v) { return ws.hessian_action(v); },
                                                   cfg.n_tr, opt);
      dirs = sqrt_C_basis(gf, basis);
      if (basis_out) *basis_out = std::move(basis);
    }
    return OuuObjective(flow, gf, cfg, std::move(dirs), 1.0);
  }

  static OuuObjective make(const PoissonFlow& flow, const GaussianField& gf, const OuuConfig& cfg,
                           const Vector& z_nominal) {
    return cfg.trace_mode == TraceMode::Randomized ? randomized(flow, gf, cfg)
                                                   : eigenbasis(flow, gf, cfg, z_nominal);
  }

  OuuObjective(OuuObjective&& o) noexcept
      : flow_(o.flow_), gf_(o.gf_), cfg_(std::move(o.cfg_)), ws_(*o.flow_, o.gf_->mean()),
        dirs_(std::move(o.dirs_)), dir_qp_(std::move(o.dir_qp_)), weight_(o.weight_) {}

  const OuuConfig& config() const { return cfg_; }
  const PoissonFlow& flow() const { return *flow_; }
  const GaussianField& field() const { return *gf_; }
  int num_directions() const { return static_cast<int>(dirs_.size()); }
  const std::vector<Vector>& directions() const { return dirs_; }
  double weight() const { return weight_; }
  void set_beta(double beta) {
    require(std::isfinite(beta) && beta >= 0.0, "beta must be non-negative");
    cfg_.beta = beta;
    has_gradient_ = false;
    if (evaluated_) report_ = assemble_report();
  }
  double beta() const { return cfg_.beta; }
  long pde_solves() const { return ws_.solve_count(); }

  /// Objective at z: 2 + 2 n_tr PDE solves.
  const RiskReport& evaluate(const Vector& z) {
    require(z.size() == flow_->num_controls(), "control vector has wrong length");
    require(z.allFinite(), "control vector must be finite");
    const long before = ws_.solve_count();
    ws_.solve_state_adjoint(z);
    d_ = ws_.gradient_dual();
    t_ = gf_->apply_C_dual(d_);
    const int n = num_directions();
    inc_.assign(n, {});
    s_.assign(n, Vector());
    parallel_chunks(static_cast<std::size_t>(n), cfg_.threads, [&](std::size_t b, std::size_t e, int) {
      for (std::size_t j = b; j < e; ++j) {
        inc_[j] = ws_.incremental(dirs_[j]);
        s_[j] = gf_->apply_C_dual(inc_[j].hess_dual);
      }
    });
    evaluated_ = true;
    has_gradient_ = false;
    eval_solves_ = ws_.solve_count() - before;
    report_ = assemble_report();
    return report_;
  }

  double value(const Vector& z) {
    if (!at(z)) evaluate(z);
    return report_.J;
  }

  const RiskReport& report() const {
    require(evaluated_, "objective has not been evaluated");
    return report_;
  }

  /// Control gradient at the last evaluated z: 2 + 2 n_tr further solves
  /// (adjoints rho*_j, upsilon*_j, then p*, then u*).
  Vector gradient(const Vector& z) {
    if (!at(z)) evaluate(z);
    if (has_gradient_) return grad_;
    const long before = ws_.solve_count();
    const FemSpace& sp = flow_->space();
    const Matrix& q = flow_->observation();
    const Vector& u = ws_.u();
    const Vector& p = ws_.p();
    const Vector& e = ws_.exp_qp();
    const int n = num_directions();
    const double beta = cfg_.beta;

    std::vector<Vector> rho_star(n), ups_star(n), rhs_p(n), rhs_u(n);
    parallel_chunks(static_cast<std::size_t>(n), cfg_.threads, [&](std::size_t b, std::size_t end, int) {
      for (std::size_t j = b; j < end; ++j) {
        const Vector a = 0.5 * weight_ * (dirs_[j] + beta * s_[j]);
        const Vector c_a = e.cwiseProduct(sp.at_qp(a));
        const Vector c_za = c_a.cwiseProduct(dir_qp_[j]);
        const Vector c_z = e.cwiseProduct(dir_qp_[j]);
        rho_star[j] = ws_.solve(-sp.apply_stiffness(c_a, u));
        ups_star[j] = ws_.solve(-sp.apply_stiffness(c_a, p) - q.transpose() * (q * rho_star[j]));
        rhs_p[j] = sp.apply_stiffness(c_za, u) + sp.apply_stiffness(c_a, inc_[j].state) +
                   sp.apply_stiffness(c_z, rho_star[j]);
        rhs_u[j] = sp.apply_stiffness(c_za, p) + sp.apply_stiffness(c_a, inc_[j].adjoint) +
                   sp.apply_stiffness(c_z, ups_star[j]);
      }
    });
    const Vector c_t = e.cwiseProduct(sp.at_qp(t_));
    Vector bp = -beta * sp.apply_stiffness(c_t, u);
    Vector bu = -(q.transpose() * flow_->misfit(u)) - beta * sp.apply_stiffness(c_t, p);
    for (int j = 0; j < n; ++j) {
      bp -= rhs_p[j];
      bu -= rhs_u[j];
    }
    const Vector p_star = ws_.solve(bp);
    bu -= q.transpose() * (q * p_star);
    const Vector u_star = ws_.solve(bu);

    grad_ = cfg_.gamma * z - flow_->sources().transpose() * u_star;
    has_gradient_ = true;
    grad_solves_ = ws_.solve_count() - before;
    report_.grad_norm = grad_.norm();
    return grad_;
  }

  /// Solves spent by the last evaluate() and gradient() calls.
  long last_evaluation_solves() const { return eval_solves_; }
  long last_gradient_solves() const { return grad_solves_; }

  /// Riesz representers psi_j of the Hessian actions at the last evaluated control.
  std::vector<Vector> hessian_actions() const {
    std::vector<Vector> out;
    for (const auto& inc : inc_) out.push_back(flow_->mass_solve(inc.hess_dual));
    return out;
  }

  /// Quadratic surrogate of m -> Theta(z, m) at the last evaluated control.
  /// The returned object refers to this objective's workspace.
  QuadraticSurrogate surrogate() const {
    require(evaluated_, "objective has not been evaluated");
    return QuadraticSurrogate{ws_.control_objective(), ws_.gradient(),
                              [this](const Vector& v) { return ws_.hessian_action(v); }, gf_->mean(),
                              std::make_shared<SparseMatrix>(flow_->mass())};
  }

  const Vector& last_control() const { return ws_.z(); }

 private:
  bool at(const Vector& z) const { return evaluated_ && ws_.z().size() == z.size() && ws_.z() == z; }

  RiskReport assemble_report() const {
    RiskReport r;
    r.beta = cfg_.beta;
    r.theta = ws_.control_objective();
    r.grad_term = d_.dot(t_);
    for (int j = 0; j < num_directions(); ++j) {
      r.tr_HC += weight_ * dirs_[j].dot(inc_[j].hess_dual);
      r.tr_HC_sq += weight_ * inc_[j].hess_dual.dot(s_[j]);
    }
    r.mean_term = r.theta + 0.5 * r.tr_HC;
    r.variance_term = r.grad_term + 0.5 * r.tr_HC_sq;
    r.control_cost = 0.5 * cfg_.gamma * ws_.z().squaredNorm();
    r.J = r.mean_term + 0.5 * cfg_.beta * r.variance_term + r.control_cost;
    r.pde_solves = eval_solves_;
    r.grad_norm = has_gradient_ ? grad_.norm() : NAN;
    return r;
  }

  const PoissonFlow* flow_;
  const GaussianField* gf_;
  OuuConfig cfg_;
  PdeWorkspace ws_;
  std::vector<Vector> dirs_;
  std::vector<Vector> dir_qp_;
  double weight_;

  bool evaluated_ = false;
  bool has_gradient_ = false;
  Vector d_, t_, grad_;
  std::vector<IncrementalSolution> inc_;
  std::vector<Vector> s_;
  RiskReport report_;
  long eval_solves_ = 0;
  long grad_solves_ = 0;
};

inline SmoothObjective as_smooth(OuuObjective& obj) {
  return {[&obj](const Vector& z) { return obj.value(z); }, [&obj](const Vector& z) { return obj.gradient(z); },
          [&obj] { return obj.pde_solves(); }};
}

struct ContinuationStage {
  double beta = 0.0;
  OptimizeResult result;
  RiskReport report;
};

/// Minimizes J over the box for each beta of the schedule in turn, warm
/// starting every stage from the previous optimum.
inline std::vector<ContinuationStage> optimize_continuation(OuuObjective& obj, const Vector& z0) {
  const OuuConfig& cfg = obj.config();
  OptimizerOptions opt;
  opt.max_iter = cfg.max_iter;
  opt.grad_reduction_tol = cfg.grad_reduction_tol;
  std::vector<ContinuationStage> stages;
  Vector z = cfg.bounds.project(z0);
  for (double beta : cfg.beta_schedule) {
    obj.set_beta(beta);
    ContinuationStage st;
    st.beta = beta;
    st.result = projected_lbfgs(as_smooth(obj), z, cfg.bounds, opt);
    obj.value(st.result.z);
    obj.gradient(st.result.z);
    st.report = obj.report();
    z = st.result.z;
    stages.push_back(std::move(st));
  }
  return stages;
}

}  // namespace raouu
