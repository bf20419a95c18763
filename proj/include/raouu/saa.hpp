#pragma once

#include "raouu/optimizer.hpp"
#include "raouu/parallel.hpp"
#include "raouu/poisson_flow.hpp"
#include "raouu/quad_risk.hpp"

#include <memory>

namespace raouu {

/// Sample-average objective mean(Theta_i) + beta/2 var(Theta_i) + gamma/2 |z|^2
/// over frozen parameter samples, with the unbiased sample variance. Each
/// sample keeps its own factorization of K(m_i).
class SaaObjective {
 public:
  SaaObjective(const PoissonFlow& flow, std::vector<Vector> samples, double beta, double gamma, int threads = 1)
      : flow_(&flow), beta_(beta), gamma_(gamma), threads_(threads) {
    require(samples.size() >= 2, "SAA needs at least two samples");
    require(beta >= 0.0 && gamma > 0.0, "SAA needs beta >= 0 and gamma > 0");
    require(threads >= 1, "threads must be positive");
    ws_.resize(samples.size());
    parallel_chunks(samples.size(), threads_, [&](std::size_t b, std::size_t e, int) {
      for (std::size_t i = b; i < e; ++i) ws_[i] = std::make_unique<PdeWorkspace>(flow, std::move(samples[i]));
    });
  }

  /// Frozen draws m_i = m_bar + sqrt(eps) C^{1/2} n_i for i < n_mc.
  static std::vector<Vector> draw(const GaussianField& gf, int n_mc, double eps, std::uint64_t seed) {
    require(n_mc >= 1, "need at least one sample");
    std::vector<Vector> out;
    out.reserve(n_mc);
    for (int i = 0; i < n_mc; ++i) out.push_back(gf.sample(eps, seed, static_cast<std::uint64_t>(i)));
    return out;
  }

  int num_samples() const { return static_cast<int>(ws_.size()); }
  double beta() const { return beta_; }
  void set_beta(double beta) {
    require(beta >= 0.0, "beta must be non-negative");
    beta_ = beta;
  }

  long pde_solves() const {
    long n = 0;
    for (const auto& w : ws_) n += w->solve_count();
    return n;
  }

  struct Value {
    double J = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    double control_cost = 0.0;
  };

  /// One state solve per sample.
  Value evaluate(const Vector& z) {
    require(z.size() == flow_->num_controls() && z.allFinite(), "control vector has wrong length");
    theta_.resize(num_samples());
    parallel_chunks(ws_.size(), threads_, [&](std::size_t b, std::size_t e, int) {
      for (std::size_t i = b; i < e; ++i) {
        ws_[i]->solve_state(z);
        theta_[i] = ws_[i]->control_objective();
      }
    });
    z_ = z;
    adjoints_ = false;
    return summarize();
  }

  double value(const Vector& z) {
    if (z_.size() != z.size() || z_ != z) evaluate(z);
    return summarize().J;
  }

  /// One adjoint solve per sample at the last evaluated control.
  Vector gradient(const Vector& z) {
    if (z_.size() != z.size() || z_ != z) evaluate(z);
    if (!adjoints_) {
      parallel_chunks(ws_.size(), threads_, [&](std::size_t b, std::size_t e, int) {
        for (std::size_t i = b; i < e; ++i) ws_[i]->solve_adjoint();
      });
      adjoints_ = true;
    }
    const Value v = summarize();
    const double n = num_samples();
    const Matrix& f = flow_->sources();
    Vector g = gamma_ * z;
    for (int i = 0; i < num_samples(); ++i) {
      const double w = 1.0 / n + beta_ * (theta_[i] - v.mean) / (n - 1.0);
      g -= w * (f.transpose() * ws_[i]->p());
    }
    return g;
  }

  const std::vector<double>& sample_values() const { return theta_; }

 private:
  Value summarize() const {
    const double n = num_samples();
    Value v;
    for (double t : theta_) v.mean += t;
    v.mean /= n;
    for (double t : theta_) v.variance += (t - v.mean) * (t - v.mean);
    v.variance /= n - 1.0;
    v.control_cost = 0.5 * gamma_ * z_.squaredNorm();
    v.J = v.mean + 0.5 * beta_ * v.variance + v.control_cost;
    return v;
  }

  const PoissonFlow* flow_;
  double beta_, gamma_;
  int threads_;
  std::vector<std::unique_ptr<PdeWorkspace>> ws_;
  std::vector<double> theta_;
  Vector z_;
  bool adjoints_ = false;
};

inline SmoothObjective as_smooth(SaaObjective& obj) {
  return {[&obj](const Vector& z) { return obj.value(z); }, [&obj](const Vector& z) { return obj.gradient(z); },
          [&obj] { return obj.pde_solves(); }};
}

/// Monte-Carlo statistics of Theta(z, m) for m ~ N(m_bar, eps C), plus the
/// linear and quadratic surrogates on the same draws when a surrogate is given.
struct TrueRisk {
  double mean = 0.0;
  double variance = 0.0;
  std::vector<double> theta;
  std::vector<double> theta_lin;
  std::vector<double> theta_quad;

  double objective(double beta) const { return mean + 0.5 * beta * variance; }
};

inline double sample_mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double sample_variance(const std::vector<double>& x) {
  const double m = sample_mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / (static_cast<double>(x.size()) - 1.0);
}

/// Per-sample influence values of mean + beta/2 variance; their mean is the
/// estimate and their spread gives its standard error (also for paired differences).
inline std::vector<double> objective_influence(const std::vector<double>& theta, double beta) {
  const double m = sample_mean(theta), v = sample_variance(theta);
  std::vector<double> out(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) out[i] = theta[i] + 0.5 * beta * ((theta[i] - m) * (theta[i] - m) - v);
  return out;
}

inline double standard_error(const std::vector<double>& x) {
  return std::sqrt(sample_variance(x) / static_cast<double>(x.size()));
}

inline TrueRisk evaluate_true_risk(const PoissonFlow& flow, const GaussianField& gf, const Vector& z, int n_mc,
                                   std::uint64_t seed, double eps = 1.0, const QuadraticSurrogate* surrogate = nullptr,
                                   int threads = 1, int min_samples = 100) {
  require(n_mc >= min_samples, "true-risk evaluation needs at least " + std::to_string(min_samples) + " samples");
  TrueRisk r;
  r.theta.resize(n_mc);
  if (surrogate) {
    r.theta_lin.resize(n_mc);
    r.theta_quad.resize(n_mc);
  }
  parallel_chunks(static_cast<std::size_t>(n_mc), threads, [&](std::size_t b, std::size_t e, int) {
    SpdSolver scratch;
    for (std::size_t i = b; i < e; ++i) {
      const Vector m = gf.sample(eps, seed, i);
      r.theta[i] = flow.control_objective(flow.solve_state(m, z, scratch));
      if (surrogate) {
        r.theta_lin[i] = eval_lin(*surrogate, m);
        r.theta_quad[i] = eval_quad(*surrogate, m);
      }
    }
  });
  r.mean = sample_mean(r.theta);
  r.variance = sample_variance(r.theta);
  return r;
}

}  // namespace raouu
