#include <gtest/gtest.h>

#include <cmath>

#include "icenet/classical.hpp"

using namespace icenet;

namespace {

ChannelConfig one_rx(double kmh = 100.0) {
  ChannelConfig c;
  c.n_rx = 1;
  c.ue_speed_mps = kmh_to_mps(kmh);
  return c;
}

std::vector<FrameSample> flat_static_samples(int n_rx) {
  ChannelConfig c = one_rx(0.0);
  c.n_rx = n_rx;
  c.n_paths = 1;
  ChannelPath p{0.0, 0.0, {}};
  for (int r = 0; r < n_rx; ++r) p.gains.push_back(std::polar(1.0, 0.7 * r + 0.1));
  return build_samples({synthesize_frame(c, {p}, 0)}, PilotPattern{}, SnrPolicy::noiseless(), 0);
}

constexpr double kTapDelay = 1.0 / (128 * 15e3);  // one delay bin of the pilot transform

}  // namespace

TEST(Nmse, Identities) {
  const auto s = build_samples(generate_dataset(one_rx(), 1, 3), PilotPattern{}, SnrPolicy::fixed(0.0), 1)[0];
  EXPECT_EQ(nmse(s.y, s.y), 0.0);
  EXPECT_EQ(nmse(Tensor3<float>(2, 128, 14), s.y), 1.0);
  // e with ||e||^2 = 0.01 ||truth||^2: a uniform offset on every cell.
  Tensor3<double> truth(2, 4, 4, 1.0), est = truth;
  for (auto& v : est) v += 0.1;
  EXPECT_NEAR(nmse(est, truth), 0.01, 1e-15);
  for (double c : {0.5, 1.0, 2.0, -1.0}) {
    Tensor3<double> scaled = s.y.cast<double>();
    for (auto& v : scaled) v *= c;
    EXPECT_NEAR(nmse(scaled, s.y.cast<double>()), (c - 1) * (c - 1), 1e-12);
  }
}

TEST(Nmse, Errors) {
  EXPECT_THROW(nmse(Tensor3<float>(2, 2, 2), Tensor3<float>(2, 2, 2)), NumericError);
  EXPECT_THROW(nmse(Tensor3<float>(2, 2, 2), Tensor3<float>(2, 2, 3, 1.0f)), ShapeError);
}

TEST(LsLi, IsObservePlusInterpolate) {
  const auto frames = generate_dataset(one_rx(), 2, 0);
  const auto s = build_samples(frames, PilotPattern{}, SnrPolicy::fixed(5.0), 4);
  // x was interpolated from double-precision pilots; LS+LI re-reads them at f32.
  for (const auto& x : s) EXPECT_LT(nmse(estimate_ls_li(x, PilotPattern{}), x.x), 1e-12);
}

TEST(LsLi, NoiselessFlatChannelIsExact) {
  for (const auto& s : flat_static_samples(3)) EXPECT_EQ(nmse(estimate_ls_li(s, PilotPattern{}), s.y), 0.0);
}

TEST(Ft, NoiselessFlatChannelIsExact) {
  for (const auto& s : flat_static_samples(3)) {
    const auto est = estimate_ft(s, PilotPattern{}, default_ft_window(PilotPattern{}, 128));
    EXPECT_LT(nmse(est, s.y), 1e-12);
    EXPECT_EQ(est.shape_string(), "[2,128,14]");
  }
}

TEST(Ft, WindowRange) {
  const auto s = flat_static_samples(1)[0];
  EXPECT_THROW(estimate_ft(s, PilotPattern{}, 0), ArgumentError);
  EXPECT_THROW(estimate_ft(s, PilotPattern{}, 65), ArgumentError);
  EXPECT_EQ(default_ft_window(PilotPattern{}, 128), 16);
}

TEST(Ft, InWindowChannelReconstructedAtPilotSymbols) {
  ChannelConfig c = one_rx();
  c.n_rx = 2;
  std::vector<ChannelPath> paths;
  Rng rng(12);
  for (int bin : {0, 1, 3, 7, 12}) {
    ChannelPath p{bin * kTapDelay, rng.uniform(-300, 300), {}};
    for (int r = 0; r < 2; ++r) p.gains.push_back(std::polar(rng.uniform(0.2, 1.0), rng.uniform(0, 6.28)));
    paths.push_back(p);
  }
  const auto frame = synthesize_frame(c, paths, 0);
  for (const auto& s : build_samples({frame}, PilotPattern{}, SnrPolicy::noiseless(), 0)) {
    const auto est = estimate_ft(s, PilotPattern{}, 16);
    double err = 0, pow = 0;
    for (int ch = 0; ch < 2; ++ch)
      for (int k = 0; k < 128; ++k)
        for (int t : {1, 10}) {
          err += std::pow(est(ch, k, t) - s.y(ch, k, t), 2);
          pow += std::pow(s.y(ch, k, t), 2);
        }
    EXPECT_LE(err / pow, 1e-6);
  }
}

TEST(Ft, BeatsLsLiAtZeroDbOnMostFrames) {
  const auto s = build_samples(generate_dataset(one_rx(), 200, 0), PilotPattern{}, SnrPolicy::fixed(0.0), 1);
  int wins = 0;
  for (const auto& x : s)
    wins += nmse(estimate_ft(x, PilotPattern{}, 16), x.y) < nmse(estimate_ls_li(x, PilotPattern{}), x.y);
  EXPECT_GE(wins, 160) << wins << " of 200";
}

TEST(Lmmse, FlatNoiselessLimitReproducesPilots) {
  const auto calib = flat_static_samples(8);
  const auto cal = calibrate_lmmse(calib, PilotPattern{}, kNoiselessSnr);
  EXPECT_EQ(cal.W.rows(), 128 * 14);
  EXPECT_EQ(cal.W.cols(), 128);
  EXPECT_TRUE(cal.W.allFinite());
  for (const auto& s : calib) EXPECT_LT(nmse(estimate_lmmse(s, cal), s.y), 1e-10);
}

TEST(Lmmse, ZeroInputZeroOutputAndShape) {
  const auto calib = build_samples(generate_dataset(one_rx(), 300, 0), PilotPattern{}, SnrPolicy::fixed(10.0), 2);
  const auto cal = calibrate_lmmse(calib, PilotPattern{}, 10.0);
  EXPECT_EQ(cal.n_calib_frames, 300);
  EXPECT_DOUBLE_EQ(cal.noise_var, 0.1);
  FrameSample zero = calib[0];
  zero.x.fill(0.0f);
  const auto est = estimate_lmmse(zero, cal);
  EXPECT_EQ(est.shape_string(), "[2,128,14]");
  EXPECT_EQ(squared_norm(est), 0.0);
  FrameSample wrong;
  wrong.x = Tensor3<float>(2, 64, 14);
  EXPECT_THROW(estimate_lmmse(wrong, cal), ShapeError);
  EXPECT_THROW(calibrate_lmmse({calib[0]}, PilotPattern{}, 10.0), ArgumentError);
}

TEST(Lmmse, BeatsLsLiAtTenDb) {
  ChannelConfig c = one_rx();
  c.n_rx = 8;
  const auto calib = build_samples(generate_dataset(c, 100, 1000), PilotPattern{}, SnrPolicy::fixed(10.0), 2);
  const auto cal = calibrate_lmmse(calib, PilotPattern{}, 10.0);
  const auto test = build_samples(generate_dataset(one_rx(), 200, 0), PilotPattern{}, SnrPolicy::fixed(10.0), 3);
  std::vector<double> lm, ls;
  for (const auto& s : test) {
    lm.push_back(nmse(estimate_lmmse(s, cal), s.y));
    ls.push_back(nmse(estimate_ls_li(s, PilotPattern{}), s.y));
  }
  EXPECT_LE(mean_of(lm), mean_of(ls));
}

// The filter is fitted to noisy LS pilots, so on its own calibration frames it
// partly keeps their noise: in-sample error is *higher* than out-of-sample and
// the gap closes as the calibration set grows.
TEST(Lmmse, InSampleGapClosesWithMoreCalibration) {
  ChannelConfig c = one_rx();
  c.n_rx = 8;
  auto ratio = [&](int n) {
    const auto a = build_samples(generate_dataset(c, n, 0), PilotPattern{}, SnrPolicy::fixed(10.0), 2);
    const auto b = build_samples(generate_dataset(c, n, 5000), PilotPattern{}, SnrPolicy::fixed(10.0), 2);
    const auto cal_a = calibrate_lmmse(a, PilotPattern{}, 10.0), cal_b = calibrate_lmmse(b, PilotPattern{}, 10.0);
    std::vector<double> in, out, ls;
    for (const auto& s : a) {
      in.push_back(nmse(estimate_lmmse(s, cal_a), s.y));
      out.push_back(nmse(estimate_lmmse(s, cal_b), s.y));
      ls.push_back(nmse(s.x, s.y));
    }
    EXPECT_LT(mean_of(in), mean_of(ls));
    return mean_of(in) / mean_of(out);
  };
  const double small = ratio(20), large = ratio(100);
  EXPECT_LT(std::abs(large - 1.0), std::abs(small - 1.0));
  EXPECT_LT(std::abs(large - 1.0), 0.1);
}
