#pragma once

#include "raouu/common.hpp"
#include "raouu/spd_solver.hpp"

#include <Eigen/Eigenvalues>

#include <functional>
#include <numeric>

namespace raouu {

using FieldOperator = std::function<Vector(const Vector&)>;

/// Discretized Gaussian measure N(mean, C) with C = A^{-1} M A^{-1} acting on
/// duals, A = kappa K + alpha M with natural boundary conditions.
///
/// Fields are nodal (Riesz) representations; the inner product is <a, M b>.
/// In that inner product apply_C(f) = A^{-1} M A^{-1} M f is self-adjoint and
/// its positive square root is apply_sqrt_C(f) = A^{-1} M f.
class GaussianField {
 public:
  GaussianField(const SparseMatrix& stiffness, const SparseMatrix& mass, double kappa,
                double alpha, Vector mean)
      : kappa_(kappa), alpha_(alpha), mass_(mass), mean_(std::move(mean)) {
    require(kappa > 0.0 && alpha > 0.0, "kappa and alpha must be positive");
    require(stiffness.rows() == mass.rows() && mass.rows() == mean_.size(),
            "Gaussian field operators and mean disagree in size");
    require(mean_.allFinite(), "mean must be finite");
    SparseMatrix a = kappa * stiffness + alpha * mass;
    a.makeCompressed();
    a_solver_.factorize(a, {});
    mass_llt_.compute(mass_);
    if (mass_llt_.info() != Eigen::Success)
      throw NumericalFailure("mass matrix is not positive definite");
  }

  double kappa() const { return kappa_; }
  double alpha() const { return alpha_; }
  Eigen::Index size() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const SparseMatrix& mass() const { return mass_; }
  const SparseMatrix& precision_root() const { return a_solver_.full_operator(); }

  double inner(const Vector& a, const Vector& b) const { return a.dot(mass_ * b); }
  Vector mass_solve(const Vector& d) const { return mass_llt_.solve(d); }

  Vector apply_C(const Vector& f) const {
    check(f);
    return a_solver_.solve_homogeneous(mass_ * a_solver_.solve_homogeneous(mass_ * f));
  }

  /// C applied to a dual vector d (= M f): returns A^{-1} M A^{-1} d.
  Vector apply_C_dual(const Vector& d) const {
    check(d);
    return a_solver_.solve_homogeneous(mass_ * a_solver_.solve_homogeneous(d));
  }

  Vector apply_sqrt_C(const Vector& f) const {
    check(f);
    return a_solver_.solve_homogeneous(mass_ * f);
  }

  /// A^{-1} L n with L L^T = M; maps white noise to an N(0, C) draw.
  Vector color(const Vector& noise) const {
    check(noise);
    Vector ln = mass_llt_.permutationPinv() * (mass_llt_.matrixL() * noise);
    return a_solver_.solve_homogeneous(ln);
  }

  Vector sample(double eps, std::mt19937_64& rng) const {
    require(eps >= 0.0, "sample scale must be non-negative");
    Vector noise = standard_normal(size(), rng);
    if (eps == 0.0) return mean_;
    return mean_ + std::sqrt(eps) * color(noise);
  }

  Vector sample(double eps, std::uint64_t seed, std::uint64_t index) const {
    auto rng = make_engine(seed, index);
    return sample(eps, rng);
  }

  /// n_tr draws from N(0, C); draw j depends only on (seed, j).
  std::vector<Vector> draw_trace_vectors(int n_tr, std::uint64_t seed) const {
    require(n_tr >= 1, "need at least one trace vector");
    std::vector<Vector> out;
    out.reserve(n_tr);
    for (int j = 0; j < n_tr; ++j) {
      auto rng = make_engine(seed, static_cast<std::uint64_t>(j));
      out.push_back(color(standard_normal(size(), rng)));
    }
    return out;
  }

 private:
  void check(const Vector& f) const {
    require(f.size() == size(), "field has wrong length for this Gaussian field");
  }

  double kappa_;
  double alpha_;
  SparseMatrix mass_;
  Vector mean_;
  SpdSolver a_solver_{SolverKind::Cholesky};
  Eigen::SimplicialLLT<SparseMatrix> mass_llt_;
};

/// M-orthonormal eigenvectors with eigenvalues ordered by decreasing magnitude.
struct EigenBasis {
  std::vector<Vector> vectors;
  std::vector<double> eigenvalues;
  int iterations = 0;
};

struct EigenOptions {
  int oversampling = 10;
  double tolerance = 1e-8;
  int max_iterations = 300;
  std::uint64_t seed = 20170308;
};

namespace detail {

/// Modified Gram-Schmidt in the M inner product, applied twice. Columns that
/// collapse are replaced by random directions.
inline void m_orthonormalize(Matrix& v, const SparseMatrix& mass, std::mt19937_64& rng) {
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    for (int attempt = 0; attempt < 4; ++attempt) {
      const double before = std::sqrt(std::max(0.0, v.col(j).dot(mass * v.col(j))));
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index i = 0; i < j; ++i) {
          const double c = v.col(i).dot(mass * v.col(j));
          v.col(j) -= c * v.col(i);
        }
      }
      const double after = std::sqrt(std::max(0.0, v.col(j).dot(mass * v.col(j))));
      if (after > 1e-10 * before && after > 0.0) {
        v.col(j) /= after;
        break;
      }
      if (attempt == 3) throw NumericalFailure("could not M-orthonormalize the subspace");
      v.col(j) = standard_normal(v.rows(), rng);
    }
  }
}

}  // namespace detail

/// Dominant eigenpairs of C^{1/2} H C^{1/2} by block subspace iteration with
/// Rayleigh-Ritz in the M inner product. H is given through its action on
/// nodal fields and must be self-adjoint in <., M .>. Never forms a dense
/// operator of the problem size.
inline EigenBasis preconditioned_eigenpairs(const GaussianField& gf, const FieldOperator& hessian_action,
                                            int k, const EigenOptions& opt = {}) {
  const Eigen::Index n = gf.size();
  require(k >= 1 && k <= n, "eigenpair count must be in [1, dimension]");
  const Eigen::Index p = std::min<Eigen::Index>(n, k + opt.oversampling);
  const SparseMatrix& mass = gf.mass();
  auto op = [&](const Vector& v) { return gf.apply_sqrt_C(hessian_action(gf.apply_sqrt_C(v))); };

  std::mt19937_64 rng = make_engine(opt.seed, 0);
  Matrix v(n, p);
  for (Eigen::Index j = 0; j < p; ++j) v.col(j) = standard_normal(n, rng);
  detail::m_orthonormalize(v, mass, rng);

  std::vector<double> previous;
  Matrix y(n, p);
  for (int it = 1; it <= opt.max_iterations; ++it) {
    for (Eigen::Index j = 0; j < p; ++j) y.col(j) = op(v.col(j));
    Matrix t = v.transpose() * (mass * y);
    t = 0.5 * (t + t.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(t);
    std::vector<Eigen::Index> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return std::abs(es.eigenvalues()[a]) > std::abs(es.eigenvalues()[b]);
    });
    Matrix s(p, p);
    std::vector<double> theta(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      s.col(j) = es.eigenvectors().col(order[j]);
      theta[j] = es.eigenvalues()[order[j]];
    }

    const double scale = std::abs(theta[0]);
    bool converged = scale == 0.0;
    if (!converged && !previous.empty()) {
      converged = true;
      for (int i = 0; i < k; ++i) {
        const double floor = std::max(std::abs(theta[i]), 1e-10 * scale);
        if (std::abs(theta[i] - previous[i]) > opt.tolerance * floor) {
          converged = false;
          break;
        }
      }
    }
    if (converged || p == n) {
      // With a complete basis the Rayleigh-Ritz step is already exact.
      EigenBasis out;
      Matrix x = v * s;
      for (int i = 0; i < k; ++i) {
        out.vectors.push_back(x.col(i));
        out.eigenvalues.push_back(theta[i]);
      }
      out.iterations = it;
      return out;
    }
    previous = theta;
    v = y * s;
    detail::m_orthonormalize(v, mass, rng);
  }
  throw NumericalFailure("subspace iteration did not converge within the iteration budget");
}

/// w_j = C^{1/2} v_j for an M-orthonormal basis v_j.
inline std::vector<Vector> sqrt_C_basis(const GaussianField& gf, const EigenBasis& basis) {
  std::vector<Vector> out;
  out.reserve(basis.vectors.size());
  for (const auto& v : basis.vectors) out.push_back(gf.apply_sqrt_C(v));
  return out;
}

}  // namespace raouu
