#pragma once

#include "raouu/gaussian_field.hpp"
#include "raouu/parallel.hpp"

#include <functional>
#include <memory>
#include <optional>

namespace raouu {

/// Second-order Taylor model of m -> Theta(z, m) about the anchor m_bar.
/// All inner products use the mass matrix of the parameter space.
struct QuadraticSurrogate {
  double theta_bar = 0.0;
  Vector grad;
  FieldOperator hess_action;
  Vector anchor;
  std::shared_ptr<const SparseMatrix> mass;

  double inner(const Vector& a, const Vector& b) const { return a.dot(*mass * b); }
};

inline double eval_lin(const QuadraticSurrogate& s, const Vector& m) {
  require(m.size() == s.anchor.size(), "parameter has wrong length");
  return s.theta_bar + s.inner(s.grad, m - s.anchor);
}

inline double eval_quad(const QuadraticSurrogate& s, const Vector& m) {
  require(m.size() == s.anchor.size(), "parameter has wrong length");
  const Vector dm = m - s.anchor;
  return s.theta_bar + s.inner(s.grad, dm) + 0.5 * s.inner(s.hess_action(dm), dm);
}

enum class TraceMode { Randomized, Eigenbasis };

inline const char* to_string(TraceMode m) { return m == TraceMode::Randomized ? "randomized" : "eigenbasis"; }

/// Estimates of Tr(C H) and Tr((C^{1/2} H C^{1/2})^2) from one batch of
/// Hessian actions psi_j = H zeta_j.
struct TraceEstimate {
  TraceMode mode = TraceMode::Randomized;
  int n_tr = 0;
  double tr_HC = 0.0;
  double tr_HC_sq = 0.0;
  std::vector<Vector> directions;  // zeta_j or w_j = C^{1/2} v_j
  std::vector<Vector> psi;
  std::uint64_t seed = 0;
};

/// Randomized mode averages over zeta_j ~ N(0, C); eigenbasis mode sums over
/// w_j = C^{1/2} v_j for the dominant eigenvectors v_j of C^{1/2} H C^{1/2}
/// (pass `basis` to reuse one computed at a nominal point).
inline TraceEstimate estimate_traces(const QuadraticSurrogate& s, const GaussianField& gf, TraceMode mode,
                                     int n_tr, std::uint64_t seed, const EigenBasis* basis = nullptr) {
  require(n_tr >= 1, "need at least one trace vector");
  TraceEstimate t;
  t.mode = mode;
  t.n_tr = n_tr;
  t.seed = seed;
  double weight = 1.0;
  if (mode == TraceMode::Randomized) {
    t.directions = gf.draw_trace_vectors(n_tr, seed);
    weight = 1.0 / n_tr;
  } else {
    std::optional<EigenBasis> own;
    if (basis == nullptr) {
      EigenOptions opt;
      opt.seed = seed;
      own = preconditioned_eigenpairs(gf, s.hess_action, n_tr, opt);
      basis = &*own;
    }
    require(static_cast<int>(basis->vectors.size()) >= n_tr, "eigenbasis has fewer than n_tr vectors");
    EigenBasis head;
    head.vectors.assign(basis->vectors.begin(), basis->vectors.begin() + n_tr);
    t.directions = sqrt_C_basis(gf, head);
  }
  for (const auto& zeta : t.directions) {
    Vector psi = s.hess_action(zeta);
    t.tr_HC += weight * gf.inner(zeta, psi);
    t.tr_HC_sq += weight * gf.inner(psi, gf.apply_C(psi));
    t.psi.push_back(std::move(psi));
  }
  return t;
}

/// E{Theta_quad} = Theta(m_bar) + 1/2 Tr(C^{1/2} H C^{1/2}).
inline double analytic_mean(const QuadraticSurrogate& s, const GaussianField&, const TraceEstimate& tr) {
  return s.theta_bar + 0.5 * tr.tr_HC;
}

/// <g, C g>, the variance of the linear surrogate.
inline double gradient_variance_term(const QuadraticSurrogate& s, const GaussianField& gf) {
  return gf.inner(s.grad, gf.apply_C(s.grad));
}

/// Var{Theta_quad} = <g, C g> + 1/2 Tr((C^{1/2} H C^{1/2})^2).
inline double analytic_variance(const QuadraticSurrogate& s, const GaussianField& gf, const TraceEstimate& tr) {
  const double g = gradient_variance_term(s, gf);
  const double v = g + 0.5 * tr.tr_HC_sq;
  if (v < -1e-12 * (1.0 + std::abs(g) + std::abs(tr.tr_HC_sq)))
    throw InternalError("negative surrogate variance: covariance or Hessian is not self-adjoint");
  return std::max(v, 0.0);
}

struct RateRow {
  double eps = 0.0;
  double err_lin = 0.0;
  double err_quad = 0.0;
};

struct RateStudy {
  std::vector<RateRow> rows;
  double slope_lin = NAN;
  double slope_quad = NAN;
  int n_mc = 0;
};

/// Least-squares slope of log(y) against log(x), skipping non-positive y.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return NAN;
  const double den = n * sxx - sx * sx;
  return den == 0.0 ? NAN : (n * sxy - sx * sy) / den;
}

/// Mean absolute truncation errors E|Theta - Theta_lin| and E|Theta - Theta_quad|
/// under N(m_bar, eps C) for each eps, with one frozen set of white-noise draws
/// shared by all eps. `theta` must be safe to call concurrently.
inline RateStudy truncation_rate_study(const std::function<double(const Vector&)>& theta,
                                       const QuadraticSurrogate& s, const GaussianField& gf,
                                       const std::vector<double>& eps_list, int n_mc, std::uint64_t seed,
                                       int threads = 1) {
  require(n_mc >= 1, "need at least one Monte Carlo sample");
  require(!eps_list.empty(), "need at least one scale");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    require(eps_list[i] > 0.0, "scales must be positive");
    if (i > 0) require(eps_list[i] < eps_list[i - 1], "scales must be strictly descending");
  }
  const std::size_t ne = eps_list.size();
  // Directions and their quadratic forms do not depend on eps.
  std::vector<Vector> dirs(n_mc);
  std::vector<double> lin(n_mc), quad(n_mc);
  for (int i = 0; i < n_mc; ++i) {
    auto rng = make_engine(seed, static_cast<std::uint64_t>(i));
    dirs[i] = gf.color(standard_normal(gf.size(), rng));
    lin[i] = s.inner(s.grad, dirs[i]);
    quad[i] = s.inner(s.hess_action(dirs[i]), dirs[i]);
  }
  std::vector<double> el(ne * n_mc), eq(ne * n_mc);
  parallel_chunks(static_cast<std::size_t>(n_mc), threads, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t i = b; i < e; ++i)
      for (std::size_t k = 0; k < ne; ++k) {
        const double se = std::sqrt(eps_list[k]);
        const double th = theta(s.anchor + se * dirs[i]);
        const double tl = s.theta_bar + se * lin[i];
        const double tq = tl + 0.5 * eps_list[k] * quad[i];
        el[k * n_mc + i] = std::abs(th - tl);
        eq[k * n_mc + i] = std::abs(th - tq);
      }
  });
  RateStudy out;
  out.n_mc = n_mc;
  std::vector<double> xs, yl, yq;
  for (std::size_t k = 0; k < ne; ++k) {
    RateRow r{eps_list[k], 0.0, 0.0};
    for (int i = 0; i < n_mc; ++i) {
      r.err_lin += el[k * n_mc + i];
      r.err_quad += eq[k * n_mc + i];
    }
    r.err_lin /= n_mc;
    r.err_quad /= n_mc;
    out.rows.push_back(r);
    xs.push_back(r.eps);
    yl.push_back(r.err_lin);
    yq.push_back(r.err_quad);
  }
  out.slope_lin = loglog_slope(xs, yl);
  out.slope_quad = loglog_slope(xs, yq);
  return out;
}

}  // namespace raouu
