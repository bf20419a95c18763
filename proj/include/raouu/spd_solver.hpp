#pragma once

#include "raouu/common.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <memory>

namespace raouu {

enum class SolverKind { Auto, Cholesky, ConjugateGradient };

/// Factorized symmetric positive-definite operator with Dirichlet rows and
/// columns eliminated symmetrically. Immutable after factorize(); solve() may
/// be called concurrently.
class SpdSolver {
 public:
  static constexpr double kRtol = 1e-10;
  static constexpr Eigen::Index kDirectLimit = 100000;

  explicit SpdSolver(SolverKind kind = SolverKind::Auto) : kind_(kind) {}

  /// op is the unconstrained operator; constrained lists the Dirichlet dofs.
  void factorize(const SparseMatrix& op, const std::vector<int>& constrained) {
    require(op.rows() == op.cols(), "operator must be square");
    n_ = op.rows();
    mask_.assign(static_cast<std::size_t>(n_), false);
    for (int i : constrained) {
      require(i >= 0 && i < n_, "Dirichlet index out of range");
      mask_[i] = true;
    }
    full_ = op;
    full_.makeCompressed();
    constrained_ = full_;
    for (int col = 0; col < constrained_.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(constrained_, col); it; ++it)
        if (mask_[it.row()] || mask_[col]) it.valueRef() = (it.row() == col) ? 1.0 : 0.0;

    const bool direct = kind_ == SolverKind::Cholesky ||
                        (kind_ == SolverKind::Auto && n_ <= kDirectLimit);
    if (direct) {
      if (!llt_) llt_ = std::make_unique<Eigen::SimplicialLLT<SparseMatrix>>();
      if (!analyzed_ || pattern_nnz_ != constrained_.nonZeros()) {
        llt_->analyzePattern(constrained_);
        analyzed_ = true;
        pattern_nnz_ = constrained_.nonZeros();
      }
      llt_->factorize(constrained_);
      if (llt_->info() != Eigen::Success)
        throw NumericalFailure("Cholesky factorization failed: operator not positive definite");
      cg_.reset();
    } else {
      cg_ = std::make_unique<Cg>();
      cg_->setTolerance(kRtol);
      cg_->setMaxIterations(std::max<Eigen::Index>(1000, 10 * n_));
      cg_->compute(constrained_);
      if (cg_->info() != Eigen::Success)
        throw NumericalFailure("preconditioner setup failed");
    }
  }

  Eigen::Index size() const { return n_; }
  const SparseMatrix& full_operator() const { return full_; }
  const SparseMatrix& constrained_operator() const { return constrained_; }

  /// Solve with Dirichlet values taken from `boundary` at constrained dofs.
  Vector solve(const Vector& rhs, const Vector& boundary) const {
    require(rhs.size() == n_ && boundary.size() == n_, "solve: size mismatch");
    Vector g = Vector::Zero(n_);
    for (Eigen::Index i = 0; i < n_; ++i)
      if (mask_[i]) g[i] = boundary[i];
    Vector b = rhs - full_ * g;
    for (Eigen::Index i = 0; i < n_; ++i)
      if (mask_[i]) b[i] = g[i];
    return solve_constrained(b);
  }

  /// Solve with homogeneous Dirichlet data; rhs entries at constrained dofs are ignored.
  Vector solve_homogeneous(const Vector& rhs) const {
    require(rhs.size() == n_, "solve: size mismatch");
    Vector b = rhs;
    for (Eigen::Index i = 0; i < n_; ++i)
      if (mask_[i]) b[i] = 0.0;
    return solve_constrained(b);
  }

 private:
  using Cg = Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                                      Eigen::IncompleteCholesky<double>>;

  Vector solve_constrained(const Vector& b) const {
    const double bnorm = b.norm();
    if (bnorm == 0.0) return Vector::Zero(n_);
    Vector x;
    if (llt_ && !cg_) {
      x = llt_->solve(b);
    } else if (cg_) {
      x = cg_->solve(b);
    } else {
      throw InternalError("solve called before factorize");
    }
    double res = (constrained_ * x - b).norm();
    if (llt_ && !cg_ && res > kRtol * bnorm) {
      // one step of iterative refinement
      x -= llt_->solve(Vector(constrained_ * x - b));
      res = (constrained_ * x - b).norm();
    }
    if (!x.allFinite() || res > kRtol * bnorm)
      throw NumericalFailure("linear solve did not reach the residual tolerance", res / bnorm);
    return x;
  }

  SolverKind kind_;
  Eigen::Index n_ = 0;
  std::vector<bool> mask_;
  SparseMatrix full_;
  SparseMatrix constrained_;
  std::unique_ptr<Eigen::SimplicialLLT<SparseMatrix>> llt_;
  std::unique_ptr<Cg> cg_;
  bool analyzed_ = false;
  Eigen::Index pattern_nnz_ = -1;
};

}  // namespace raouu
