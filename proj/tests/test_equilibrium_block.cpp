#include <gtest/gtest.h>

#include <cmath>

#include "icenet/equilibrium_block.hpp"

using namespace icenet;

namespace {

Tensor3<double> random_tensor(int c, int r, int k, Rng& rng, double scale = 1.0) {
  Tensor3<double> t(c, r, k);
  for (auto& v : t) v = scale * rng.normal();
  return t;
}

Tensor3<double> axpy(const Tensor3<double>& a, double s, const Tensor3<double>& b) {
  Tensor3<double> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * b[i];
  return out;
}

// Readout and biases are small at init; bump them so every path is exercised.
IEBParams<double> exercised_params(const IEBConfig& cfg) {
  auto p = init_params<double>(cfg);
  Rng rng(cfg.seed + 99);
  for (auto& v : p.flat) v += 0.05 * rng.normal();
  return p;
}

// Exact JVP assembled from VJPs against every output basis vector.
Tensor3<double> jvp_via_vjp(const Tensor3<double>& z, const Tensor3<double>& x, const IEBParams<double>& p,
                            const Tensor3<double>& v) {
  Tensor3<double> out(z.channels(), z.rows(), z.cols());
  Tensor3<double> e(z.channels(), z.rows(), z.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    e.fill(0.0);
    e[i] = 1.0;
    out[i] = dot(vjp_z(z, x, p, e), v);
  }
  return out;
}

}  // namespace

TEST(IEBConfig, DefaultParamCountIsPinned) {
  // in (2*32 + 32) + inj (2*32) + 3 x (32*32*9 + 3*32) + (32*32*25 + 3*32) + out (2*32 + 2)
  const std::size_t oracle = (64 + 32 + 64) + 3 * (32 * 32 * 9 + 96) + (32 * 32 * 25 + 96) + 66;
  EXPECT_EQ(oracle, 53858u);
  EXPECT_EQ(param_count(IEBConfig{}), oracle);
  EXPECT_EQ(param_count(init_params<float>(IEBConfig{})), oracle);
}

TEST(IEBConfig, WidthScalesConvStagesQuadratically) {
  IEBConfig a, b;
  a.hidden_width = 16;
  const auto la = ParamLayout::from(a), lb = ParamLayout::from(b);
  const double sa = double(la.stages[0].gamma - la.stages[0].conv_w);
  const double sb = double(lb.stages[0].gamma - lb.stages[0].conv_w);
  EXPECT_NEAR(sb / sa, 4.0, 0.1);
}

TEST(IEBConfig, Validation) {
  IEBConfig c;
  c.hidden_width = 0;
  EXPECT_THROW(init_params<float>(c), ConfigError);
  c = IEBConfig{};
  c.kernel_sizes = {3, 3, 5, 3};
  EXPECT_THROW(c.validate(), ConfigError);
  c = IEBConfig{};
  c.kernel_sizes = {3, 3, 3};
  EXPECT_THROW(c.validate(), ConfigError);
  c = IEBConfig{};
  c.kernel_sizes = {3, 3, 3, 4};
  EXPECT_THROW(c.validate(), ConfigError);
  c = IEBConfig{};
  c.norm_groups = 5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(InitParams, DeterministicAndSeeded) {
  IEBConfig c;
  EXPECT_TRUE(init_params<float>(c) == init_params<float>(c));
  EXPECT_FALSE(init_params<float>(c) == init_params<float>(c.with_seed(8)));
  EXPECT_TRUE(init_params<float>(c).all_finite());
}

TEST(Forward, PreservesShape) {
  const auto p = init_params<float>(IEBConfig{});
  Rng rng(1);
  for (auto [r, k] : {std::pair{128, 14}, std::pair{16, 4}, std::pair{7, 3}, std::pair{1, 1}, std::pair{33, 9}}) {
    const auto z = random_tensor(2, r, k, rng).cast<float>();
    const auto out = forward(z, z, p);
    EXPECT_TRUE(out.same_shape(z));
    EXPECT_TRUE(out.all_finite());
  }
}

TEST(Forward, ZeroParamsGiveExactZero) {
  IEBParams<float> p(IEBConfig{});
  Rng rng(2);
  const auto z = random_tensor(2, 16, 4, rng).cast<float>();
  const auto x = random_tensor(2, 16, 4, rng).cast<float>();
  for (float v : forward(z, x, p)) EXPECT_EQ(v, 0.0f);
}

TEST(Forward, Errors) {
  const auto p = init_params<float>(IEBConfig{});
  Tensor3<float> a(2, 8, 4), b(2, 8, 5), c(3, 8, 4);
  EXPECT_THROW(forward(a, b, p), ShapeError);
  EXPECT_THROW(forward(c, c, p), ShapeError);
  a[3] = std::nanf("");
  EXPECT_THROW(forward(a, a, p), NumericError);
  EXPECT_THROW(vjp_z(Tensor3<float>(2, 8, 4), Tensor3<float>(2, 8, 4), p, Tensor3<float>(2, 4, 4)), ShapeError);
}

TEST(Forward, FloatMatchesDouble) {
  const auto pd = exercised_params(IEBConfig{});
  Rng rng(3);
  const auto z = random_tensor(2, 16, 6, rng), x = random_tensor(2, 16, 6, rng);
  const auto yd = forward(z, x, pd);
  const auto yf = forward(z.cast<float>(), x.cast<float>(), pd.cast<float>()).cast<double>();
  double err = 0, ref = 0;
  for (std::size_t i = 0; i < yd.size(); ++i) {
    err += std::pow(yd[i] - yf[i], 2);
    ref += yd[i] * yd[i];
  }
  EXPECT_LT(std::sqrt(err / ref), 1e-4);
}

class BlockDerivatives : public ::testing::TestWithParam<NormKind> {
 protected:
  IEBConfig cfg() const {
    IEBConfig c;
    c.norm = GetParam();
    return c;
  }
};

TEST_P(BlockDerivatives, JvpMatchesForwardDifference) {
  const auto p = exercised_params(cfg());
  Rng rng(4);
  const auto z = random_tensor(2, 8, 4, rng), x = random_tensor(2, 8, 4, rng), u = random_tensor(2, 8, 4, rng);
  const double eps = 1e-4;
  const auto jvp = jvp_via_vjp(z, x, p, u);
  const auto f0 = forward(z, x, p), f1 = forward(axpy(z, eps, u), x, p);
  double err = 0, ref = 0;
  for (std::size_t i = 0; i < f0.size(); ++i) {
    err += std::pow(f1[i] - f0[i] - eps * jvp[i], 2);
    ref += std::pow(eps * jvp[i], 2);
  }
  EXPECT_LE(std::sqrt(err / ref), 1e-3);
}

TEST_P(BlockDerivatives, AdjointIdentityAgainstFiniteDifferenceJvp) {
  const auto p = exercised_params(cfg());
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto z = random_tensor(2, 8, 4, rng), x = random_tensor(2, 8, 4, rng);
    const auto u = random_tensor(2, 8, 4, rng), v = random_tensor(2, 8, 4, rng);
    const double h = 1e-6;
    const auto fp = forward(axpy(z, h, v), x, p), fm = forward(axpy(z, -h, v), x, p);
    double u_jv = 0;
    for (std::size_t i = 0; i < fp.size(); ++i) u_jv += u[i] * (fp[i] - fm[i]) / (2 * h);
    const double vjp_v = dot(vjp_z(z, x, p, u), v);
    EXPECT_NEAR(vjp_v, u_jv, 1e-5 * std::max(1.0, std::abs(u_jv)));
  }
}

TEST_P(BlockDerivatives, VjpZColumnsMatchCentralDifferences) {
  const auto p = exercised_params(cfg());
  Rng rng(6);
  const auto z = random_tensor(2, 8, 4, rng), x = random_tensor(2, 8, 4, rng), u = random_tensor(2, 8, 4, rng);
  const auto g = vjp_z(z, x, p, u);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t i = rng.below(z.size());
    Tensor3<double> e(2, 8, 4);
    e[i] = 1.0;
    const double h = 1e-6;
    const double fd = (dot(u, forward(axpy(z, h, e), x, p)) - dot(u, forward(axpy(z, -h, e), x, p))) / (2 * h);
    EXPECT_NEAR(g[i], fd, 1e-3 * std::max(std::abs(fd), 1e-3)) << "coordinate " << i;
  }
}

TEST_P(BlockDerivatives, VjpThetaMatchesDirectionalDifferences) {
  const auto p = exercised_params(cfg());
  Rng rng(7);
  const auto z = random_tensor(2, 8, 4, rng), x = random_tensor(2, 8, 4, rng), u = random_tensor(2, 8, 4, rng);
  const auto g = vjp_theta(z, x, p, u);
  ASSERT_EQ(param_count(g), param_count(p));
  for (int trial = 0; trial < 5; ++trial) {
    auto d = p.zeros_like();
    for (auto& v : d.flat) v = rng.normal();
    const double h = 1e-6;
    auto pp = p, pm = p;
    for (std::size_t i = 0; i < p.size(); ++i) {
      pp.flat[i] += h * d.flat[i];
      pm.flat[i] -= h * d.flat[i];
    }
    const double fd = (dot(u, forward(z, x, pp)) - dot(u, forward(z, x, pm))) / (2 * h);
    double an = 0;
    for (std::size_t i = 0; i < p.size(); ++i) an += g.flat[i] * d.flat[i];
    EXPECT_NEAR(an, fd, 1e-3 * std::abs(fd));
  }
}

TEST_P(BlockDerivatives, VjpXMatchesDirectionalDifference) {
  const auto p = exercised_params(cfg());
  Rng rng(8);
  const auto z = random_tensor(2, 8, 4, rng), x = random_tensor(2, 8, 4, rng);
  const auto u = random_tensor(2, 8, 4, rng), v = random_tensor(2, 8, 4, rng);
  BlockWorkspace<double> ws;
  ws.forward(z, x, p);
  Tensor3<double> dx;
  ws.backward(u, nullptr, nullptr, &dx);
  const double h = 1e-6;
  const double fd = (dot(u, forward(z, axpy(x, h, v), p)) - dot(u, forward(z, axpy(x, -h, v), p))) / (2 * h);
  EXPECT_NEAR(dot(dx, v), fd, 1e-3 * std::abs(fd));
}

TEST_P(BlockDerivatives, ZeroCotangentGivesZero) {
  const auto p = exercised_params(cfg());
  Rng rng(9);
  const auto z = random_tensor(2, 8, 4, rng);
  const Tensor3<double> u(2, 8, 4);
  for (double v : vjp_z(z, z, p, u)) EXPECT_EQ(v, 0.0);
  for (double v : vjp_theta(z, z, p, u).flat) EXPECT_EQ(v, 0.0);
}

INSTANTIATE_TEST_SUITE_P(Norms, BlockDerivatives, ::testing::Values(NormKind::group_norm, NormKind::weight_scaled));

TEST(BlockWorkspace, RetainedStorageIndependentOfCallCount) {
  const auto p = init_params<float>(IEBConfig{});
  BlockWorkspace<float> ws;
  Rng rng(10);
  const auto z = random_tensor(2, 16, 4, rng).cast<float>();
  ws.forward(z, z, p);
  const auto before = ws.retained_tensors();
  for (int i = 0; i < 5; ++i) ws.forward(ws.output(), z, p);
  EXPECT_EQ(ws.retained_tensors(), before);
}
