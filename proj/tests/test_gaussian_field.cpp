#include "raouu/fem.hpp"
#include "raouu/gaussian_field.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

using namespace raouu;

namespace {

struct Tiny {
  FemSpace space;
  SparseMatrix mass, stiff;
  Matrix md, ad;

  Tiny(int nx, int ny, double kappa, double alpha)
      : space(build_mesh(nx, ny, 2.0, 1.0, {Side::Left, Side::Right})),
        mass(space.mass()),
        stiff(space.laplacian()) {
    md = Matrix(mass);
    ad = kappa * Matrix(stiff) + alpha * md;
  }
  // C_h acting on nodal fields: A^{-1} M A^{-1} M.
  Matrix dense_C() const { return ad.ldlt().solve(md * ad.ldlt().solve(md)); }
  // Covariance of the nodal coefficient vector: A^{-1} M A^{-1}.
  Matrix dense_cov() const { return ad.ldlt().solve(md * ad.ldlt().solve(Matrix::Identity(md.rows(), md.cols()))); }
};

}  // namespace

TEST(GaussianField, RejectsBadHyperparameters) {
  Tiny t(2, 2, 1.0, 1.0);
  EXPECT_THROW(GaussianField(t.stiff, t.mass, 0.0, 1.0, Vector::Zero(9)), InvalidArgument);
  EXPECT_THROW(GaussianField(t.stiff, t.mass, 1.0, -1.0, Vector::Zero(9)), InvalidArgument);
  EXPECT_THROW(GaussianField(t.stiff, t.mass, 1.0, 1.0, Vector::Zero(8)), InvalidArgument);
}

TEST(GaussianField, ApplyCMatchesDenseAndIsSelfAdjoint) {
  Tiny t(4, 3, 0.1, 2.0);
  GaussianField gf(t.stiff, t.mass, 0.1, 2.0, Vector::Zero(t.space.size()));
  const Matrix c = t.dense_C();
  std::mt19937_64 rng(1);
  EXPECT_EQ(gf.apply_C(Vector::Zero(gf.size())), Vector::Zero(gf.size()));
  for (int k = 0; k < 10; ++k) {
    const Vector f = standard_normal(gf.size(), rng), g = standard_normal(gf.size(), rng);
    EXPECT_LE((gf.apply_C(f) - c * f).norm(), 1e-10 * (c * f).norm());
    const double a = gf.inner(f, gf.apply_C(g)), b = gf.inner(g, gf.apply_C(f));
    EXPECT_LE(std::abs(a - b), 1e-8 * std::max(std::abs(a), 1e-300));
    EXPECT_GE(gf.inner(f, gf.apply_C(f)), 0.0);
    // sqrt(C) squared is C.
    EXPECT_LE((gf.apply_sqrt_C(gf.apply_sqrt_C(f)) - gf.apply_C(f)).norm(), 1e-10 * gf.apply_C(f).norm());
  }
}

TEST(GaussianField, SmallKappaIsNearIdentity) {
  Tiny t(2, 2, 1e-8, 1.0);
  GaussianField gf(t.stiff, t.mass, 1e-8, 1.0, Vector::Zero(9));
  std::mt19937_64 rng(2);
  const Vector f = standard_normal(9, rng);
  EXPECT_LE((gf.apply_C(f) - f).norm(), 1e-6 * f.norm());
}

TEST(GaussianField, ZeroScaleReturnsMean) {
  Tiny t(3, 2, 0.5, 1.0);
  const Vector mean = Vector::LinSpaced(t.space.size(), -1.0, 1.0);
  GaussianField gf(t.stiff, t.mass, 0.5, 1.0, mean);
  EXPECT_EQ(gf.sample(0.0, 7, 0), mean);
  EXPECT_THROW(gf.sample(-1.0, 7, 0), InvalidArgument);
}

TEST(GaussianField, SampleMomentsMatchDenseCovariance) {
  Tiny t(2, 2, 0.3, 1.5);
  const Vector mean = Vector::LinSpaced(9, 0.0, 1.0);
  GaussianField gf(t.stiff, t.mass, 0.3, 1.5, mean);
  const Matrix cov = t.dense_cov();
  const int n = 10000;
  Matrix draws(9, n);
  for (int i = 0; i < n; ++i) draws.col(i) = gf.sample(1.0, 42, i) - mean;
  const Vector emp_mean = draws.rowwise().mean();
  for (int a = 0; a < 9; ++a) {
    EXPECT_LE(std::abs(emp_mean[a]), 5.0 * std::sqrt(cov(a, a) / n)) << a;
    for (int b = 0; b < 9; ++b) {
      const Eigen::ArrayXd prod = draws.row(a).array() * draws.row(b).array();
      const double est = prod.mean();
      const double se = std::sqrt((prod - est).square().sum() / (n - 1) / n);
      EXPECT_LE(std::abs(est - cov(a, b)), 5.0 * se) << a << "," << b;
    }
  }
}

TEST(GaussianField, ScaledSamplesHaveScaledProbeVariance) {
  Tiny t(3, 2, 0.2, 1.0);
  GaussianField gf(t.stiff, t.mass, 0.2, 1.0, Vector::Zero(t.space.size()));
  std::mt19937_64 rng(9);
  const Vector f = standard_normal(gf.size(), rng);
  const double eps = 0.25, expected = eps * gf.inner(f, gf.apply_C(f));
  const int n = 20000;
  Eigen::ArrayXd v(n);
  for (int i = 0; i < n; ++i) v[i] = gf.inner(f, gf.sample(eps, 3, i));
  const double var = v.square().mean();
  // Var of a squared Gaussian is 2 sigma^4.
  EXPECT_LE(std::abs(var - expected), 5.0 * std::sqrt(2.0 / n) * expected);
}

TEST(GaussianField, TraceIdentity) {
  Tiny t(2, 2, 0.3, 1.0);
  GaussianField gf(t.stiff, t.mass, 0.3, 1.0, Vector::Zero(9));
  // Tr(C) in the M inner product equals the trace of the nodal-field operator A^{-1} M A^{-1} M.
  const double tr = t.dense_C().trace();
  const int n = 20000;
  Eigen::ArrayXd q(n);
  for (int i = 0; i < n; ++i) {
    const Vector s = gf.sample(1.0, 5, i);
    q[i] = gf.inner(s, s);
  }
  const double se = std::sqrt((q - q.mean()).square().sum() / (n - 1) / n);
  EXPECT_LE(std::abs(q.mean() - tr), 5.0 * se);
}

TEST(GaussianField, TraceVectorsAreDeterministic) {
  Tiny t(3, 3, 0.1, 1.0);
  GaussianField gf(t.stiff, t.mass, 0.1, 1.0, Vector::Zero(t.space.size()));
  const auto a = gf.draw_trace_vectors(40, 123), b = gf.draw_trace_vectors(40, 123);
  ASSERT_EQ(a.size(), 40u);
  for (int j = 0; j < 40; ++j) EXPECT_EQ(a[j], b[j]);
  EXPECT_NE(gf.draw_trace_vectors(1, 124)[0], a[0]);
  EXPECT_THROW(gf.draw_trace_vectors(0, 1), InvalidArgument);
}

TEST(GaussianField, TraceVectorsHaveZeroMean) {
  Tiny t(2, 2, 0.3, 1.0);
  GaussianField gf(t.stiff, t.mass, 0.3, 1.0, Vector::Constant(9, 3.0));
  const Matrix cov = t.dense_cov();
  const int n = 10000;
  const auto z = gf.draw_trace_vectors(n, 77);
  Vector sum = Vector::Zero(9);
  for (const auto& v : z) sum += v;
  sum /= n;
  for (int a = 0; a < 9; ++a) EXPECT_LE(std::abs(sum[a]), 5.0 * std::sqrt(cov(a, a) / n));
}

TEST(Eigenpairs, ZeroOperatorGivesZeroSpectrum) {
  Tiny t(3, 2, 0.1, 1.0);
  GaussianField gf(t.stiff, t.mass, 0.1, 1.0, Vector::Zero(t.space.size()));
  const auto basis = preconditioned_eigenpairs(gf, [](const Vector& v) { return Vector(Vector::Zero(v.size())); }, 3);
  for (double l : basis.eigenvalues) EXPECT_EQ(l, 0.0);
}

TEST(Eigenpairs, IdentityHessianRecoversCovarianceSpectrum) {
  Tiny t(4, 3, 0.05, 1.0);
  GaussianField gf(t.stiff, t.mass, 0.05, 1.0, Vector::Zero(t.space.size()));
  const auto basis = preconditioned_eigenpairs(gf, [](const Vector& v) { return v; }, 4);
  // Eigenvalues of the nodal operator C (similar to a symmetric matrix via M^{1/2}).
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(t.md * t.dense_C(), t.md);
  Vector ev = es.eigenvalues().reverse();
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(basis.eigenvalues[i], ev[i], 1e-6 * ev[0]);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      EXPECT_NEAR(gf.inner(basis.vectors[i], basis.vectors[j]), i == j ? 1.0 : 0.0, 1e-8);
}

TEST(Eigenpairs, RejectsBadCount) {
  Tiny t(1, 1, 0.1, 1.0);
  GaussianField gf(t.stiff, t.mass, 0.1, 1.0, Vector::Zero(4));
  auto id = [](const Vector& v) { return v; };
  EXPECT_THROW(preconditioned_eigenpairs(gf, id, 0), InvalidArgument);
  EXPECT_THROW(preconditioned_eigenpairs(gf, id, 5), InvalidArgument);
  EXPECT_NO_THROW(preconditioned_eigenpairs(gf, id, 4));
}
