#include "raouu/quad_risk.hpp"
#include "support/dense_oracle.hpp"

#include <gtest/gtest.h>

using namespace raouu;
using namespace raouu::testing;

namespace {

struct TinySetup {
  PoissonFlow flow;
  Vector m_bar;
  PdeWorkspace ws;
  GaussianField gf;
  QuadraticSurrogate s;

  TinySetup(int nx, int ny, double kappa = 0.05, double alpha = 1.0)
      : flow(build_mesh(nx, ny, 2.0, 1.0, {Side::Left, Side::Right}), WellConfig::canonical()),
        m_bar(smooth_log_permeability(flow.mesh(), 0.3)),
        ws(flow, m_bar),
        gf(make_gaussian_field(flow, kappa, alpha, m_bar)) {
    ws.solve_state_adjoint(Vector::Constant(20, 4.0));
    s = QuadraticSurrogate{ws.control_objective(), ws.gradient(),
                           [this](const Vector& v) { return ws.hessian_action(v); }, m_bar,
                           std::make_shared<SparseMatrix>(flow.mass())};
  }
};

QuadraticSurrogate zero_surrogate(const TinySetup& t) {
  QuadraticSurrogate z = t.s;
  z.grad = Vector::Zero(t.m_bar.size());
  z.hess_action = [](const Vector& v) { return Vector(Vector::Zero(v.size())); };
  return z;
}

}  // namespace

TEST(Surrogate, EvaluatesAtAnchor) {
  TinySetup t(6, 3);
  EXPECT_EQ(eval_lin(t.s, t.m_bar), t.s.theta_bar);
  EXPECT_EQ(eval_quad(t.s, t.m_bar), t.s.theta_bar);
  auto z = zero_surrogate(t);
  EXPECT_EQ(eval_lin(z, t.m_bar + Vector::Ones(t.m_bar.size())), t.s.theta_bar);
  EXPECT_THROW(eval_lin(t.s, Vector::Zero(3)), InvalidArgument);
}

TEST(Surrogate, LinearMatchesDenseFormula) {
  TinySetup t(6, 3);
  std::mt19937_64 rng(3);
  const Vector m = t.m_bar + standard_normal(t.m_bar.size(), rng);
  const Matrix md = Matrix(t.flow.mass());
  EXPECT_NEAR(eval_lin(t.s, m), t.s.theta_bar + t.s.grad.dot(md * (m - t.m_bar)), 1e-12);
}

TEST(Surrogate, QuadraticBeatsLinearForSmallPerturbations) {
  TinySetup t(16, 8);
  for (int i = 0; i < 5; ++i) {
    const Vector m = t.gf.sample(1e-4, 5, i);
    const double th = t.flow.theta(m, t.ws.z());
    EXPECT_LT(std::abs(th - eval_quad(t.s, m)), 0.1 * std::abs(th - eval_lin(t.s, m)));
  }
}

TEST(Traces, ZeroHessianGivesZeroTraces) {
  TinySetup t(6, 3);
  auto z = zero_surrogate(t);
  for (auto mode : {TraceMode::Randomized, TraceMode::Eigenbasis}) {
    const auto tr = estimate_traces(z, t.gf, mode, 3, 1);
    EXPECT_EQ(tr.tr_HC, 0.0);
    EXPECT_EQ(tr.tr_HC_sq, 0.0);
    EXPECT_EQ(tr.psi.size(), 3u);
  }
  EXPECT_EQ(analytic_mean(z, t.gf, estimate_traces(z, t.gf, TraceMode::Randomized, 2, 1)), t.s.theta_bar);
  z.theta_bar = 0.0;
  EXPECT_EQ(analytic_variance(z, t.gf, estimate_traces(z, t.gf, TraceMode::Randomized, 2, 1)), 0.0);
}

TEST(Traces, CompleteEigenbasisIsExact) {
  TinySetup t(6, 3);
  const Matrix c = dense_covariance_operator(t.flow.laplacian(), t.flow.mass(), 0.05, 1.0);
  const Matrix h = dense_operator(t.s.hess_action, t.m_bar.size());
  const auto exact = dense_traces(c, h);
  const auto tr = estimate_traces(t.s, t.gf, TraceMode::Eigenbasis, static_cast<int>(t.m_bar.size()), 4);
  EXPECT_NEAR(tr.tr_HC, exact.tr_HC, 1e-6 * std::abs(exact.tr_HC));
  EXPECT_NEAR(tr.tr_HC_sq, exact.tr_HC_sq, 1e-6 * exact.tr_HC_sq);
}

TEST(Traces, RandomizedEstimatorIsUnbiased) {
  TinySetup t(6, 3);
  const Matrix c = dense_covariance_operator(t.flow.laplacian(), t.flow.mass(), 0.05, 1.0);
  const Matrix h = dense_operator(t.s.hess_action, t.m_bar.size());
  const auto exact = dense_traces(c, h);
  Eigen::ArrayXd a(200), b(200);
  for (int k = 0; k < 200; ++k) {
    const auto tr = estimate_traces(t.s, t.gf, TraceMode::Randomized, 5, 1000 + k);
    a[k] = tr.tr_HC;
    b[k] = tr.tr_HC_sq;
  }
  const auto sa = stats(a), sb = stats(b);
  EXPECT_LE(std::abs(sa.mean - exact.tr_HC), 5.0 * sa.se);
  EXPECT_LE(std::abs(sb.mean - exact.tr_HC_sq), 5.0 * sb.se);
}

TEST(Moments, AnalyticMomentsMatchMonteCarloOfSurrogate) {
  TinySetup t(6, 3);
  const auto tr = estimate_traces(t.s, t.gf, TraceMode::Eigenbasis, static_cast<int>(t.m_bar.size()), 4);
  const double mean = analytic_mean(t.s, t.gf, tr), var = analytic_variance(t.s, t.gf, tr);
  const int n = 20000;
  Eigen::ArrayXd q(n), l(n);
  for (int i = 0; i < n; ++i) {
    const Vector m = t.gf.sample(1.0, 77, i);
    q[i] = eval_quad(t.s, m);
    l[i] = eval_lin(t.s, m);
  }
  const auto sq = stats(q), vq = variance_stats(q), vl = variance_stats(l);
  EXPECT_LE(std::abs(sq.mean - mean), 5.0 * sq.se);
  EXPECT_LE(std::abs(vq.mean - var), 5.0 * vq.se);
  EXPECT_LE(std::abs(vl.mean - gradient_variance_term(t.s, t.gf)), 5.0 * vl.se);
  EXPECT_NEAR(stats(l).mean, t.s.theta_bar, 5.0 * stats(l).se);
}

TEST(Moments, MeanCorrectionScalesWithEps) {
  TinySetup t(6, 3);
  const auto tr = estimate_traces(t.s, t.gf, TraceMode::Randomized, 4, 9);
  // eps C has square root sqrt(eps) C^{1/2}, so the same white noise gives eps-scaled traces.
  TraceEstimate scaled_tr = tr;
  const double eps = 0.3;
  for (auto& z : scaled_tr.directions) z *= std::sqrt(eps);
  double acc = 0.0;
  for (const auto& z : scaled_tr.directions) acc += t.gf.inner(z, t.s.hess_action(z));
  EXPECT_NEAR(acc / 4.0, eps * tr.tr_HC, 1e-10 * std::abs(tr.tr_HC));
}

TEST(Moments, NegativeVarianceIsAnInternalError) {
  TinySetup t(6, 3);
  auto z = zero_surrogate(t);
  TraceEstimate bogus;
  bogus.tr_HC_sq = -1.0;
  EXPECT_THROW(analytic_variance(z, t.gf, bogus), InternalError);
}

TEST(RateStudy, SlopeFitRecoversPowerLaw) {
  const std::vector<double> x{1.0, 0.5, 0.25, 0.125};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 1.5));
  EXPECT_NEAR(loglog_slope(x, y), 1.5, 1e-12);
  EXPECT_TRUE(std::isnan(loglog_slope({1.0}, {1.0})));
}

TEST(RateStudy, ValidatesInputs) {
  TinySetup t(6, 3);
  auto theta = [&](const Vector& m) { return t.flow.theta(m, t.ws.z()); };
  EXPECT_THROW(truncation_rate_study(theta, t.s, t.gf, {0.5, 1.0}, 4, 1), InvalidArgument);
  EXPECT_THROW(truncation_rate_study(theta, t.s, t.gf, {1.0, -0.5}, 4, 1), InvalidArgument);
  EXPECT_THROW(truncation_rate_study(theta, t.s, t.gf, {1.0}, 0, 1), InvalidArgument);
}

TEST(RateStudy, SingleSampleIsReproducible) {
  TinySetup t(8, 4);
  auto theta = [&](const Vector& m) { return t.flow.theta(m, t.ws.z()); };
  const auto a = truncation_rate_study(theta, t.s, t.gf, {0.5}, 1, 99);
  const auto b = truncation_rate_study(theta, t.s, t.gf, {0.5}, 1, 99, 3);
  ASSERT_EQ(a.rows.size(), 1u);
  EXPECT_EQ(a.rows[0].err_lin, b.rows[0].err_lin);
  EXPECT_EQ(a.rows[0].err_quad, b.rows[0].err_quad);
  EXPECT_TRUE(std::isnan(a.slope_lin));
}

TEST(RateStudy, ObservedOrders) {
  TinySetup t(16, 8, 0.02, 4.0);
  auto theta = [&](const Vector& m) { return t.flow.theta(m, t.ws.z()); };
  std::vector<double> eps;
  for (int k = 0; k <= 6; ++k) eps.push_back(std::pow(0.5, k));
  const auto r = truncation_rate_study(theta, t.s, t.gf, eps, 200, 7);
  EXPECT_NEAR(r.slope_lin, 1.0, 0.25);
  EXPECT_NEAR(r.slope_quad, 1.5, 0.25);
}
