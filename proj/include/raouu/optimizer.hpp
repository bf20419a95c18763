#pragma once

#include "raouu/common.hpp"
#include "raouu/poisson_flow.hpp"

#include <deque>
#include <functional>

namespace raouu {

struct OptimizerOptions {
  int memory = 10;
  int max_iter = 200;
  double grad_reduction_tol = 5e-4;
  double armijo = 1e-4;
  int max_backtracks = 40;
};

struct IterateRecord {
  int iter = 0;
  double J = 0.0;
  double pg_norm = 0.0;
  long pde_solves = 0;  // cumulative
  int active = 0;       // controls at a bound
};

struct OptimizeResult {
  Vector z;
  double J = 0.0;
  Vector grad;
  std::vector<IterateRecord> trace;
  int iterations = 0;
  bool converged = false;
  bool degraded = false;
  std::string message;
};

/// Objective and gradient callbacks. gradient(z) is only called at points
/// where value(z) was just computed, so implementations may cache.
struct SmoothObjective {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<long()> solve_count;
};

inline Vector projected_gradient(const Vector& z, const Vector& g, const ControlBounds& b) {
  return z - b.project(z - g);
}

inline int active_count(const Vector& z, const ControlBounds& b) {
  int n = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (z[i] <= b.lower || z[i] >= b.upper) ++n;
  return n;
}

/// Projected L-BFGS on a box with Armijo backtracking along the projected path.
/// Components at a bound whose gradient points outward are held fixed when
/// forming the quasi-Newton direction.
inline OptimizeResult projected_lbfgs(const SmoothObjective& obj, const Vector& z0, const ControlBounds& bounds,
                                      const OptimizerOptions& opt) {
  require(opt.memory >= 1 && opt.max_iter >= 0 && opt.grad_reduction_tol > 0.0, "invalid optimizer options");
  require(z0.allFinite(), "initial control must be finite");
  auto solves = [&] { return obj.solve_count ? obj.solve_count() : 0L; };

  OptimizeResult res;
  Vector z = bounds.project(z0);
  double f = obj.value(z);
  Vector g = obj.gradient(z);
  double pg = projected_gradient(z, g, bounds).norm();
  const double pg0 = pg;
  res.trace.push_back({0, f, pg, solves(), active_count(z, bounds)});

  std::deque<std::pair<Vector, Vector>> mem;
  auto finish = [&](bool converged, bool degraded, std::string msg) {
    res.z = z;
    res.J = f;
    res.grad = g;
    res.converged = converged;
    res.degraded = degraded;
    res.message = std::move(msg);
    return res;
  };
  if (pg == 0.0) return finish(true, false, "projected gradient vanishes at the initial point");

  const Eigen::Index n = z.size();
  for (int it = 1; it <= opt.max_iter; ++it) {
    std::vector<bool> fixed(n, false);
    for (Eigen::Index i = 0; i < n; ++i)
      fixed[i] = (z[i] <= bounds.lower && g[i] > 0.0) || (z[i] >= bounds.upper && g[i] < 0.0);
    auto restrict = [&](Vector v) {
      for (Eigen::Index i = 0; i < n; ++i)
        if (fixed[i]) v[i] = 0.0;
      return v;
    };

    const Vector gf = restrict(g);
    Vector d;
    bool steepest = mem.empty();
    if (!steepest) {
      // Two-loop recursion on the free subspace.
      Vector q = gf;
      std::vector<double> alpha(mem.size());
      for (int k = static_cast<int>(mem.size()) - 1; k >= 0; --k) {
        const Vector s = restrict(mem[k].first), y = restrict(mem[k].second);
        const double sy = s.dot(y);
        alpha[k] = sy > 0.0 ? s.dot(q) / sy : 0.0;
        q -= alpha[k] * y;
      }
      const Vector sl = restrict(mem.back().first), yl = restrict(mem.back().second);
      const double yy = yl.squaredNorm();
      q *= (yy > 0.0 && sl.dot(yl) > 0.0) ? sl.dot(yl) / yy : 1.0;
      for (std::size_t k = 0; k < mem.size(); ++k) {
        const Vector s = restrict(mem[k].first), y = restrict(mem[k].second);
        const double sy = s.dot(y);
        const double beta = sy > 0.0 ? y.dot(q) / sy : 0.0;
        q += (alpha[k] - beta) * s;
      }
      d = -restrict(q);
      if (!(d.dot(gf) < 0.0)) {
        mem.clear();
        steepest = true;
      }
    }
    if (steepest) {
      const double scale = gf.cwiseAbs().maxCoeff();
      d = -gf / (scale > 0.0 ? scale : 1.0);
    }

    // Backtracking along the projected path z(a) = P(z + a d).
    double step = 1.0;
    bool accepted = false;
    Vector z_new;
    double f_new = f;
    for (int bt = 0; bt <= opt.max_backtracks; ++bt) {
      z_new = bounds.project(z + step * d);
      const double decrease = g.dot(z_new - z);
      if (decrease < 0.0) {
        f_new = obj.value(z_new);
        if (f_new <= f + opt.armijo * decrease) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!mem.empty()) {
        mem.clear();
        --it;
        continue;
      }
      res.iterations = it - 1;
      return finish(false, true, "line search failed along the steepest-descent direction");
    }

    const Vector g_new = obj.gradient(z_new);
    const Vector s = z_new - z, y = g_new - g;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      mem.emplace_back(s, y);
      if (static_cast<int>(mem.size()) > opt.memory) mem.pop_front();
    }
    z = z_new;
    f = f_new;
    g = g_new;
    pg = projected_gradient(z, g, bounds).norm();
    res.iterations = it;
    res.trace.push_back({it, f, pg, solves(), active_count(z, bounds)});
    if (pg <= opt.grad_reduction_tol * pg0) return finish(true, false, "projected gradient reduced below tolerance");
  }
  return finish(false, false, "iteration budget exhausted");
}

}  // namespace raouu
