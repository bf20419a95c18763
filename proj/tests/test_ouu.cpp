#include "raouu/ouu.hpp"
#include "raouu/saa.hpp"
#include "support/dense_oracle.hpp"

#include <gtest/gtest.h>

using namespace raouu;
using namespace raouu::testing;

namespace {

struct FlowSetup {
  PoissonFlow flow;
  GaussianField gf;

  explicit FlowSetup(int nx = 16, int ny = 8, double mean_amp = 0.3)
      : flow(build_mesh(nx, ny, 2.0, 1.0, {Side::Left, Side::Right}), WellConfig::canonical()),
        gf(make_gaussian_field(flow, 0.05, 2.0, smooth_log_permeability(flow.mesh(), mean_amp))) {}
};

OuuConfig small_config(int n_tr, double beta = 1.0) {
  OuuConfig cfg;
  cfg.beta = beta;
  cfg.beta_schedule = {beta};
  cfg.gamma = 1e-3;
  cfg.n_tr = n_tr;
  cfg.seed = 5;
  return cfg;
}

Vector wavy_control() {
  Vector z(20);
  for (int i = 0; i < 20; ++i) z[i] = 4.0 + 2.0 * std::sin(1.3 * i);
  return z;
}

void expect_gradient_matches_fd(OuuObjective& obj, const Vector& z, double rtol) {
  const Vector g = obj.gradient(z);
  const double h = 1e-4;
  for (int i = 0; i < z.size(); ++i) {
    Vector zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    const double fd = (obj.value(zp) - obj.value(zm)) / (2 * h);
    EXPECT_LE(std::abs(fd - g[i]), rtol * g.cwiseAbs().maxCoeff()) << "component " << i;
  }
}

}  // namespace

TEST(OuuConfig, Validation) {
  OuuConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.gamma = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = OuuConfig{};
  cfg.beta_schedule = {0.0, 0.5};
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.beta_schedule = {0.5, 0.25, 1.0};
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = OuuConfig{};
  cfg.n_tr = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.surrogate = SurrogateKind::Linear;
  EXPECT_NO_THROW(cfg.validate());
}

TEST(OuuObjective, ReportDecomposition) {
  FlowSetup s;
  auto obj = OuuObjective::randomized(s.flow, s.gf, small_config(4));
  const RiskReport& r = obj.evaluate(wavy_control());
  const double rebuilt = r.theta + 0.5 * r.tr_HC + 0.5 * r.beta * (r.grad_term + 0.5 * r.tr_HC_sq) + r.control_cost;
  EXPECT_NEAR(r.J, rebuilt, 1e-12 * std::abs(r.J));
  EXPECT_NEAR(r.mean_term + 0.5 * r.beta * r.variance_term + r.control_cost, r.J, 1e-12 * std::abs(r.J));
}

TEST(OuuObjective, ControlCostArithmetic) {
  FlowSetup s;
  OuuConfig cfg = small_config(2);
  cfg.gamma = 1e-5;
  auto obj = OuuObjective::randomized(s.flow, s.gf, cfg);
  EXPECT_NEAR(obj.evaluate(Vector::Constant(20, 4.0)).control_cost, 1.6e-3, 1e-15);
}

TEST(OuuObjective, MatchesSurrogateMoments) {
  FlowSetup s;
  auto obj = OuuObjective::randomized(s.flow, s.gf, small_config(6));
  const Vector z = wavy_control();
  const RiskReport r = obj.evaluate(z);
  PdeWorkspace ws(s.flow, s.gf.mean());
  ws.solve_state_adjoint(z);
  QuadraticSurrogate q{ws.control_objective(), ws.gradient(), [&](const Vector& v) { return ws.hessian_action(v); },
                       s.gf.mean(), std::make_shared<SparseMatrix>(s.flow.mass())};
  const auto tr = estimate_traces(q, s.gf, TraceMode::Randomized, 6, 5);
  EXPECT_NEAR(r.mean_term, analytic_mean(q, s.gf, tr), 1e-10 * std::abs(r.mean_term));
  EXPECT_NEAR(r.variance_term, analytic_variance(q, s.gf, tr), 1e-10 * std::abs(r.variance_term));
}

TEST(OuuObjective, DeterministicLimitReducesToTracking) {
  FlowSetup s;
  OuuConfig cfg = small_config(0, 0.0);
  cfg.surrogate = SurrogateKind::Linear;
  auto obj = OuuObjective::randomized(s.flow, s.gf, cfg);
  const Vector z = wavy_control();
  const RiskReport& r = obj.evaluate(z);
  EXPECT_NEAR(r.J, s.flow.theta(s.gf.mean(), z) + 0.5 * cfg.gamma * z.squaredNorm(), 1e-12 * r.J);
  expect_gradient_matches_fd(obj, z, 1e-6);
}

TEST(OuuObjective, GradientMatchesFiniteDifferences) {
  FlowSetup s;
  for (auto mode : {TraceMode::Randomized, TraceMode::Eigenbasis}) {
    OuuConfig cfg = small_config(3);
    cfg.trace_mode = mode;
    auto obj = OuuObjective::make(s.flow, s.gf, cfg, Vector::Constant(20, 4.0));
    expect_gradient_matches_fd(obj, wavy_control(), 1e-5);
  }
}

TEST(OuuObjective, GradientMatchesFiniteDifferencesWithLinearSurrogate) {
  FlowSetup s;
  OuuConfig cfg = small_config(0, 2.0);
  cfg.surrogate = SurrogateKind::Linear;
  auto obj = OuuObjective::randomized(s.flow, s.gf, cfg);
  expect_gradient_matches_fd(obj, wavy_control(), 1e-5);
}

TEST(OuuObjective, ControlIndependentPartOfGradientIgnoresGamma) {
  FlowSetup s;
  OuuConfig a = small_config(2), b = small_config(2);
  b.gamma = 10.0;
  auto oa = OuuObjective::randomized(s.flow, s.gf, a), ob = OuuObjective::randomized(s.flow, s.gf, b);
  const Vector z = wavy_control();
  const Vector ga = oa.gradient(z) - a.gamma * z, gb = ob.gradient(z) - b.gamma * z;
  EXPECT_LE((ga - gb).norm(), 1e-10 * ga.norm());
}

TEST(OuuObjective, SolveAccounting) {
  FlowSetup s;
  for (int n_tr : {1, 3, 7}) {
    auto obj = OuuObjective::randomized(s.flow, s.gf, small_config(n_tr));
    const long start = obj.pde_solves();
    obj.evaluate(wavy_control());
    EXPECT_EQ(obj.pde_solves() - start, 2 + 2 * n_tr);
    EXPECT_EQ(obj.report().pde_solves, 2 + 2 * n_tr);
    obj.gradient(wavy_control());
    EXPECT_EQ(obj.pde_solves() - start, 4 + 4 * n_tr);
    obj.gradient(wavy_control());
    EXPECT_EQ(obj.pde_solves() - start, 4 + 4 * n_tr);
  }
}

TEST(OuuObjective, ThreadCountDoesNotChangeResults) {
  FlowSetup s;
  OuuConfig one = small_config(5), many = small_config(5);
  many.threads = 3;
  auto a = OuuObjective::randomized(s.flow, s.gf, one), b = OuuObjective::randomized(s.flow, s.gf, many);
  const Vector z = wavy_control();
  EXPECT_EQ(a.evaluate(z).J, b.evaluate(z).J);
  EXPECT_EQ(a.gradient(z), b.gradient(z));
}

TEST(Optimizer, SyntheticQuadraticInterior) {
  Vector target(6);
  target << 1.0, 2.5, 7.0, 3.0, 12.0, 0.5;
  Matrix h = Matrix::Identity(6, 6);
  h(0, 1) = h(1, 0) = 0.3;
  SmoothObjective f{[&](const Vector& z) { return 0.5 * (z - target).dot(h * (z - target)); },
                    [&](const Vector& z) { return Vector(h * (z - target)); }, {}};
  OptimizerOptions opt;
  opt.grad_reduction_tol = 1e-9;
  const auto r = projected_lbfgs(f, Vector::Constant(6, 4.0), ControlBounds{}, opt);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 30);
  EXPECT_LE((r.z - target).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Optimizer, ActiveBoundsAndMonotoneDecrease) {
  Vector target(4);
  target << -3.0, 5.0, 20.0, 8.0;
  SmoothObjective f{[&](const Vector& z) { return 0.5 * (z - target).squaredNorm() + std::pow(z[3] - 8.0, 4); },
                    [&](const Vector& z) {
                      Vector g = z - target;
                      g[3] += 4.0 * std::pow(z[3] - 8.0, 3);
                      return g;
                    },
                    {}};
  OptimizerOptions opt;
  opt.grad_reduction_tol = 1e-8;
  const auto r = projected_lbfgs(f, Vector::Constant(4, 4.0), ControlBounds{}, opt);
  EXPECT_NEAR(r.z[0], 0.0, 1e-12);
  EXPECT_NEAR(r.z[1], 5.0, 1e-6);
  EXPECT_NEAR(r.z[2], 16.0, 1e-12);
  EXPECT_EQ(r.trace.back().active, 2);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i].J, r.trace[i - 1].J);
}

TEST(Optimizer, LargeControlCostDrivesControlsToZero) {
  FlowSetup s(12, 6);
  OuuConfig cfg = small_config(2, 0.0);
  cfg.gamma = 1e3;
  auto obj = OuuObjective::randomized(s.flow, s.gf, cfg);
  const Vector zero = Vector::Zero(20);
  // Gradient of the uncontrolled part at z = 0 decides which bounds are active.
  const Vector g0 = obj.gradient(zero);
  const auto stages = optimize_continuation(obj, Vector::Constant(20, 4.0));
  ASSERT_EQ(stages.size(), 1u);
  const Vector& z = stages[0].result.z;
  for (int i = 0; i < 20; ++i) {
    if (g0[i] > 0.0) EXPECT_EQ(z[i], 0.0) << i;
    EXPECT_LE(z[i], 2.0 * std::abs(g0[i]) / cfg.gamma + 1e-12) << i;
  }
  EXPECT_LE(z.cwiseAbs().maxCoeff(), 1e-2);
}

TEST(Optimizer, ContinuationIsMonotoneAndDeterministic) {
  FlowSetup s(12, 6);
  OuuConfig cfg = small_config(4);
  cfg.beta_schedule = {0.0, 0.5, 1.0};
  cfg.gamma = 1e-4;
  auto run = [&] {
    auto obj = OuuObjective::randomized(s.flow, s.gf, cfg);
    return optimize_continuation(obj, Vector::Constant(20, 4.0));
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].result.z, b[k].result.z);
    ASSERT_EQ(a[k].result.trace.size(), b[k].result.trace.size());
    for (std::size_t i = 1; i < a[k].result.trace.size(); ++i)
      EXPECT_LE(a[k].result.trace[i].J, a[k].result.trace[i - 1].J);
    EXPECT_TRUE(cfg.bounds.admissible(a[k].result.z));
  }
  EXPECT_LT(a.back().report.J, a.back().result.trace.front().J);
}

TEST(Saa, DegenerateSamplesHaveNoVariance) {
  FlowSetup s;
  const auto samples = SaaObjective::draw(s.gf, 4, 0.0, 3);
  SaaObjective saa(s.flow, samples, 1.0, 1e-3);
  const auto v = saa.evaluate(wavy_control());
  EXPECT_LE(v.variance, 1e-20 * v.mean * v.mean);
  EXPECT_NEAR(v.mean, s.flow.theta(s.gf.mean(), wavy_control()), 1e-12 * v.mean);
}

TEST(Saa, GradientMatchesFiniteDifferencesAndCountsSolves) {
  FlowSetup s;
  SaaObjective saa(s.flow, SaaObjective::draw(s.gf, 6, 1.0, 8), 1.0, 1e-3);
  const Vector z = wavy_control();
  const long before = saa.pde_solves();
  const Vector g = saa.gradient(z);
  EXPECT_EQ(saa.pde_solves() - before, 2 * 6);
  const double h = 1e-4;
  for (int i = 0; i < 20; ++i) {
    Vector zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    const double fd = (saa.value(zp) - saa.value(zm)) / (2 * h);
    EXPECT_LE(std::abs(fd - g[i]), 1e-5 * g.cwiseAbs().maxCoeff());
  }
}

TEST(Saa, LargeSampleAgreesWithSurrogateAtSmallScale) {
  FlowSetup s(12, 6);
  const Vector z = wavy_control();
  auto obj = OuuObjective::randomized(s.flow, s.gf, small_config(1));
  obj.evaluate(z);
  const QuadraticSurrogate q = obj.surrogate();
  const double beta = 1.0;
  double prev = INFINITY;
  for (double eps : {0.1, 0.01}) {
    // Paired draws: the surrogate's own sample objective cancels most of the noise.
    const auto risk = evaluate_true_risk(s.flow, s.gf, z, 2000, 4, eps, &q);
    const double j_true = sample_mean(risk.theta) + 0.5 * beta * sample_variance(risk.theta);
    const double j_quad = sample_mean(risk.theta_quad) + 0.5 * beta * sample_variance(risk.theta_quad);
    const double gap = std::abs(j_true - j_quad) / eps;
    EXPECT_LT(gap, prev) << eps;
    prev = gap;
  }
}

TEST(TrueRisk, DeterministicMeasureHasNoVariance) {
  FlowSetup s(8, 4);
  const auto r = evaluate_true_risk(s.flow, s.gf, wavy_control(), 100, 2, 0.0);
  EXPECT_LE(r.variance, 1e-20 * r.mean * r.mean);
  EXPECT_THROW(evaluate_true_risk(s.flow, s.gf, wavy_control(), 10, 2), InvalidArgument);
}
