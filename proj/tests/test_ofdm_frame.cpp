#include <gtest/gtest.h>

#include <cmath>

#include "icenet/classical.hpp"
#include "icenet/ofdm_frame.hpp"

using namespace icenet;

namespace {

ChannelConfig cfg_rx(int n_rx, double kmh = 100.0) {
  ChannelConfig c;
  c.n_rx = n_rx;
  c.ue_speed_mps = kmh_to_mps(kmh);
  return c;
}

// Frame whose every antenna carries h(k, t) = a + b k + c t.
ChannelFrame affine_frame(std::complex<double> a, std::complex<double> b, std::complex<double> c) {
  ChannelFrame f;
  f.config = cfg_rx(1);
  f.h.resize(128 * 14);
  for (int k = 0; k < 128; ++k)
    for (int t = 0; t < 14; ++t) f.h[f.index(0, k, t)] = std::complex<float>(a + b * double(k) + c * double(t));
  return f;
}

ComplexGrid grid_of(const ChannelFrame& f, int rx) { return from_planes(truth_planes(f, rx)); }

}  // namespace

TEST(PilotPattern, DefaultLayout) {
  PilotPattern p;
  EXPECT_EQ(p.n_pilot_subcarriers(128), 64);
  EXPECT_EQ(p.pilot_subcarriers(128)[1], 2);
  EXPECT_EQ(p.n_pilot_symbols(), 2);
  PilotPattern bad;
  bad.pilot_symbols = {1, 14};
  EXPECT_THROW(bad.validate(128, 14), ShapeError);
  bad = PilotPattern{};
  bad.subcarrier_offset = 2;
  EXPECT_THROW(bad.validate(128, 14), ConfigError);
}

TEST(ObservePilots, ShapeAndNoiselessIdentity) {
  const auto f = generate_frame(cfg_rx(8), 2);
  const auto obs = observe_pilots(f, PilotPattern{}, kNoiselessSnr, 1);
  ASSERT_EQ(obs.size(), 8u);
  EXPECT_EQ(obs[0].rows, 64);
  EXPECT_EQ(obs[0].cols, 2);
  double max_err = 0;
  for (int r = 0; r < 8; ++r)
    for (int i = 0; i < 64; ++i)
      for (int j = 0; j < 2; ++j)
        max_err = std::max(max_err, std::abs(obs[r](i, j) - std::complex<double>(f.at(r, 2 * i, j == 0 ? 1 : 10))));
  EXPECT_EQ(max_err, 0.0);
}

TEST(ObservePilots, MismatchedPatternIsShapeError) {
  const auto f = generate_frame(cfg_rx(1), 2);
  PilotPattern p;
  p.pilot_symbols = {1, 20};
  EXPECT_THROW(observe_pilots(f, p, 10.0, 1), ShapeError);
}

class NoiseCalibration : public ::testing::TestWithParam<double> {};

TEST_P(NoiseCalibration, EmpiricalVarianceMatchesSnr) {
  const double snr = GetParam();
  const auto frames = generate_dataset(cfg_rx(8), 80, 0);  // 80 x 8 x 128 = 81920 draws
  double acc = 0;
  std::size_t n = 0;
  for (const auto& f : frames) {
    const auto noisy = observe_pilots(f, PilotPattern{}, snr, 1000 + f.frame_seed);
    for (int r = 0; r < 8; ++r) {
      const auto clean = detail::true_pilots(f, PilotPattern{}, r);
      for (std::size_t i = 0; i < clean.v.size(); ++i, ++n) acc += std::norm(noisy[r].v[i] - clean.v[i]);
    }
  }
  const double expected = std::pow(10.0, -snr / 10.0);
  EXPECT_NEAR(acc / n / expected, 1.0, 0.05);
}

INSTANTIATE_TEST_SUITE_P(Snr, NoiseCalibration, ::testing::Values(-10.0, 0.0, 15.0));

TEST(InterpolateToGrid, ReproducesAffineChannels) {
  const auto f = affine_frame({0.3, -0.2}, {0.01, 0.004}, {-0.02, 0.03});
  PilotPattern p;
  const auto est = interpolate_to_grid(observe_pilots(f, p, kNoiselessSnr, 0)[0], p, 128, 14);
  const auto truth = grid_of(f, 0);
  // Affine in k everywhere (extrapolation included), affine in t between the pilot symbols.
  for (int k = 0; k < 128; ++k)
    for (int t = 1; t <= 10; ++t) EXPECT_NEAR(std::abs(est(k, t) - truth(k, t)), 0.0, 1e-5) << k << "," << t;
}

TEST(InterpolateToGrid, ConstantChannelExactEverywhere) {
  const auto f = affine_frame({0.7, 0.7}, 0.0, 0.0);
  PilotPattern p;
  const auto est = interpolate_to_grid(observe_pilots(f, p, kNoiselessSnr, 0)[0], p, 128, 14);
  const auto truth = grid_of(f, 0);
  for (std::size_t i = 0; i < est.v.size(); ++i) EXPECT_EQ(est.v[i], truth.v[i]);
}

TEST(InterpolateToGrid, HoldsAfterLastPilotSymbol) {
  PilotPattern p;
  ComplexGrid pilots(64, 2);
  for (int i = 0; i < 64; ++i) {
    pilots(i, 0) = {1.0, 0.0};
    pilots(i, 1) = {0.0, 2.0};
  }
  const auto g = interpolate_to_grid(pilots, p, 128, 14);
  EXPECT_EQ(g(5, 13), std::complex<double>(0.0, 2.0));
  EXPECT_EQ(g(5, 0), std::complex<double>(1.0, 0.0));
  EXPECT_NEAR(std::abs(g(5, 4) - std::complex<double>(2.0 / 3.0, 2.0 / 3.0)), 0.0, 1e-12);
}

TEST(InterpolateToGrid, Errors) {
  PilotPattern p;
  p.subcarrier_stride = 128;
  EXPECT_THROW(interpolate_to_grid(ComplexGrid(1, 2), p, 128, 14), ArgumentError);
  EXPECT_THROW(interpolate_to_grid(ComplexGrid(63, 2), PilotPattern{}, 128, 14), ShapeError);
}

TEST(BuildSamples, OneSamplePerAntenna) {
  const auto frames = generate_dataset(cfg_rx(8), 1, 0);
  const auto s = build_samples(frames, PilotPattern{}, SnrPolicy::fixed(10.0), 3);
  ASSERT_EQ(s.size(), 8u);
  for (std::uint32_t r = 0; r < 8; ++r) {
    EXPECT_EQ(s[r].snr_db, 10.0);
    EXPECT_EQ(s[r].rx_index, r);
    EXPECT_EQ(s[r].x.shape_string(), "[2,128,14]");
    EXPECT_TRUE(s[r].y == truth_planes(frames[0], r));
  }
}

TEST(BuildSamples, UniformPolicyStaysInRange) {
  const auto s = build_samples(generate_dataset(cfg_rx(8), 5, 0), PilotPattern{}, SnrPolicy::uniform(-10, 15), 3);
  double lo = 99, hi = -99;
  for (const auto& x : s) {
    lo = std::min(lo, x.snr_db);
    hi = std::max(hi, x.snr_db);
  }
  EXPECT_GE(lo, -10.0);
  EXPECT_LE(hi, 15.0);
  EXPECT_LT(lo, hi);
}

TEST(BuildSamples, NoiselessFlatStaticChannelIsExact) {
  ChannelConfig c = cfg_rx(2, 0.0);
  c.n_paths = 1;
  ChannelPath p{0.0, 0.0, {{0.3, 0.4}, {-1.0, 0.2}}};
  const auto s = build_samples({synthesize_frame(c, {p}, 0)}, PilotPattern{}, SnrPolicy::noiseless(), 0);
  for (const auto& x : s) EXPECT_EQ(nmse(x.x, x.y), 0.0);
}

TEST(BuildSamples, FixedPolicyMatchesObservePilots) {
  const auto frames = generate_dataset(cfg_rx(2), 2, 5);
  const auto s = build_samples(frames, PilotPattern{}, SnrPolicy::fixed(0.0), 11);
  const auto obs = observe_pilots(frames[1], PilotPattern{}, 0.0, mix_seed(11, frames[1].frame_seed));
  const auto expect = to_planes<float>(interpolate_to_grid(obs[1], PilotPattern{}, 128, 14));
  EXPECT_TRUE(s[3].x == expect);
}
