#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "icenet/channel_model.hpp"
#include "icenet/error.hpp"
#include "icenet/rng.hpp"
#include "icenet/tensor.hpp"

namespace icenet {

/// Dense complex matrix [rows, cols], row-major.
struct ComplexGrid {
  int rows = 0;
  int cols = 0;
  std::vector<std::complex<double>> v;

  ComplexGrid() = default;
  ComplexGrid(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c) {}

  std::complex<double>& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  const std::complex<double>& operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
};

/// Pilot placement on the subcarrier x symbol grid (0-based indices).
struct PilotPattern {
  std::vector<int> pilot_symbols{1, 10};
  int subcarrier_stride = 2;
  int subcarrier_offset = 0;

  void validate(int n_subcarriers, int n_symbols) const {
    if (pilot_symbols.empty()) throw ConfigError("pilot pattern: no pilot symbols");
    if (subcarrier_stride < 1) throw ConfigError("pilot pattern: stride must be >= 1");
    if (subcarrier_offset < 0 || subcarrier_offset >= subcarrier_stride)
      throw ConfigError("pilot pattern: offset must be in [0, stride)");
    for (std::size_t i = 0; i < pilot_symbols.size(); ++i) {
      const int s = pilot_symbols[i];
      if (s < 0 || s >= n_symbols) throw ShapeError("pilot pattern: pilot symbol index out of range");
      if (i > 0 && s <= pilot_symbols[i - 1]) throw ConfigError("pilot pattern: symbols must be strictly increasing");
    }
    if (subcarrier_offset >= n_subcarriers) throw ShapeError("pilot pattern: offset beyond band");
  }

  std::vector<int> pilot_subcarriers(int n_subcarriers) const {
    std::vector<int> out;
    for (int k = subcarrier_offset; k < n_subcarriers; k += subcarrier_stride) out.push_back(k);
    return out;
  }

  int n_pilot_subcarriers(int n_subcarriers) const {
    return n_subcarriers > subcarrier_offset ? (n_subcarriers - subcarrier_offset + subcarrier_stride - 1) / subcarrier_stride : 0;
  }
  int n_pilot_symbols() const { return static_cast<int>(pilot_symbols.size()); }
};

/// Noise variance for a unit-power channel; +inf dB means noiseless.
inline double noise_variance(double snr_db) {
  return std::isinf(snr_db) && snr_db > 0 ? 0.0 : std::pow(10.0, -snr_db / 10.0);
}

inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

/// How the SNR of each generated sample is chosen.
struct SnrPolicy {
  enum class Kind { fixed, uniform, noiseless };
  Kind kind = Kind::uniform;
  double value_db = 10.0;
  double lo_db = -10.0;
  double hi_db = 15.0;

  static SnrPolicy fixed(double db) { return {Kind::fixed, db, db, db}; }
  static SnrPolicy uniform(double lo, double hi) { return {Kind::uniform, 0.0, lo, hi}; }
  static SnrPolicy noiseless() { return {Kind::noiseless, kNoiselessSnr, kNoiselessSnr, kNoiselessSnr}; }
};

/// One network sample: interpolated LS input planes and true channel planes.
struct FrameSample {
  Tensor3<float> x;  // [2, n_subcarriers, n_symbols]
  Tensor3<float> y;  // [2, n_subcarriers, n_symbols]
  double snr_db = 0.0;
  std::uint32_t rx_index = 0;
  std::uint32_t frame_id = 0;

  friend bool operator==(const FrameSample& a, const FrameSample& b) {
    const bool snr_eq = a.snr_db == b.snr_db || (std::isnan(a.snr_db) && std::isnan(b.snr_db));
    return a.x == b.x && a.y == b.y && snr_eq && a.rx_index == b.rx_index && a.frame_id == b.frame_id;
  }
};

namespace detail {

// Unit-variance circularly-symmetric noise at every pilot cell of every antenna.
inline std::vector<ComplexGrid> unit_pilot_noise(int n_rx, int n_psc, int n_psym, std::uint64_t noise_seed) {
  Rng rng(noise_seed);
  const double s = std::sqrt(0.5);
  std::vector<ComplexGrid> noise(n_rx, ComplexGrid(n_psc, n_psym));
  for (auto& g : noise) {
    for (auto& c : g.v) {
      const double re = rng.normal();
      const double im = rng.normal();
      c = {s * re, s * im};
    }
  }
  return noise;
}

inline ComplexGrid true_pilots(const ChannelFrame& frame, const PilotPattern& pattern, int rx) {
  const auto sc = pattern.pilot_subcarriers(frame.n_subcarriers());
  ComplexGrid g(static_cast<int>(sc.size()), pattern.n_pilot_symbols());
  for (int i = 0; i < g.rows; ++i)
    for (int j = 0; j < g.cols; ++j) g(i, j) = std::complex<double>(frame.at(rx, sc[i], pattern.pilot_symbols[j]));
  return g;
}

}  // namespace detail

/// LS estimates at the pilot cells for every antenna, H_p + n with
/// n ~ CN(0, 10^(-snr/10)). Unit-power pilots make LS equal to the received value.
inline std::vector<ComplexGrid> observe_pilots(const ChannelFrame& frame, const PilotPattern& pattern, double snr_db,
                                               std::uint64_t noise_seed) {
  pattern.validate(frame.n_subcarriers(), frame.n_symbols());
  const int n_psc = pattern.n_pilot_subcarriers(frame.n_subcarriers());
  const int n_psym = pattern.n_pilot_symbols();
  const double sigma = std::sqrt(noise_variance(snr_db));
  const auto noise = detail::unit_pilot_noise(frame.n_rx(), n_psc, n_psym, noise_seed);
  std::vector<ComplexGrid> out;
  out.reserve(frame.n_rx());
  for (int r = 0; r < frame.n_rx(); ++r) {
    auto g = detail::true_pilots(frame, pattern, r);
    if (sigma > 0.0)
      for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] += sigma * noise[r].v[i];
    out.push_back(std::move(g));
  }
  return out;
}

/// Linear interpolation of pilot estimates onto the full grid.
///
/// Frequency: linear between pilot subcarriers, linear extrapolation past the
/// band edges. Time: linear between pilot symbols, held constant before the
/// first and after the last pilot symbol.
inline ComplexGrid interpolate_to_grid(const ComplexGrid& pilot_est, const PilotPattern& pattern, int n_subcarriers,
                                       int n_symbols) {
  pattern.validate(n_subcarriers, n_symbols);
  const auto sc = pattern.pilot_subcarriers(n_subcarriers);
  const int n_psc = static_cast<int>(sc.size());
  if (n_psc < 2) throw ArgumentError("interpolate_to_grid: need at least 2 pilot subcarriers");
  if (pilot_est.rows != n_psc || pilot_est.cols != pattern.n_pilot_symbols())
    throw ShapeError("interpolate_to_grid: pilot estimate shape does not match pattern");

  const int n_psym = pattern.n_pilot_symbols();
  // Frequency pass at the pilot symbols.
  ComplexGrid freq(n_subcarriers, n_psym);
  for (int k = 0; k < n_subcarriers; ++k) {
    int i0;
    if (k <= sc.front()) {
      i0 = 0;
    } else if (k >= sc.back()) {
      i0 = n_psc - 2;
    } else {
      i0 = (k - sc.front()) / pattern.subcarrier_stride;
      if (i0 > n_psc - 2) i0 = n_psc - 2;
    }
    const double w = static_cast<double>(k - sc[i0]) / static_cast<double>(sc[i0 + 1] - sc[i0]);
    for (int j = 0; j < n_psym; ++j) freq(k, j) = (1.0 - w) * pilot_est(i0, j) + w * pilot_est(i0 + 1, j);
  }
  // Time pass.
  const auto& ps = pattern.pilot_symbols;
  ComplexGrid out(n_subcarriers, n_symbols);
  for (int t = 0; t < n_symbols; ++t) {
    if (t <= ps.front()) {
      for (int k = 0; k < n_subcarriers; ++k) out(k, t) = freq(k, 0);
    } else if (t >= ps.back()) {
      for (int k = 0; k < n_subcarriers; ++k) out(k, t) = freq(k, n_psym - 1);
    } else {
      int j0 = 0;
      while (ps[j0 + 1] < t) ++j0;
      const double w = static_cast<double>(t - ps[j0]) / static_cast<double>(ps[j0 + 1] - ps[j0]);
      for (int k = 0; k < n_subcarriers; ++k) out(k, t) = (1.0 - w) * freq(k, j0) + w * freq(k, j0 + 1);
    }
  }
  return out;
}

/// Complex grid -> [2, rows, cols] real/imag planes.
template <class Real = float>
Tensor3<Real> to_planes(const ComplexGrid& g) {
  Tensor3<Real> t(2, g.rows, g.cols);
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      t(0, r, c) = static_cast<Real>(g(r, c).real());
      t(1, r, c) = static_cast<Real>(g(r, c).imag());
    }
  return t;
}

template <class Real>
ComplexGrid from_planes(const Tensor3<Real>& t) {
  if (t.channels() != 2) throw ShapeError("from_planes: expected 2 channels, got " + t.shape_string());
  ComplexGrid g(t.rows(), t.cols());
  for (int r = 0; r < t.rows(); ++r)
    for (int c = 0; c < t.cols(); ++c) g(r, c) = {static_cast<double>(t(0, r, c)), static_cast<double>(t(1, r, c))};
  return g;
}

/// Ground-truth planes for one antenna of a frame.
inline Tensor3<float> truth_planes(const ChannelFrame& frame, int rx) {
  Tensor3<float> y(2, frame.n_subcarriers(), frame.n_symbols());
  for (int k = 0; k < frame.n_subcarriers(); ++k)
    for (int t = 0; t < frame.n_symbols(); ++t) {
      y(0, k, t) = frame.at(rx, k, t).real();
      y(1, k, t) = frame.at(rx, k, t).imag();
    }
  return y;
}

/// Reads the pilot-cell LS estimates back out of an interpolated input.
/// Interpolation passes pilot values through unchanged, so this recovers
/// exactly what was observed (at f32 resolution).
template <class Real>
ComplexGrid extract_pilots(const Tensor3<Real>& x, const PilotPattern& pattern) {
  pattern.validate(x.rows(), x.cols());
  const auto sc = pattern.pilot_subcarriers(x.rows());
  ComplexGrid g(static_cast<int>(sc.size()), pattern.n_pilot_symbols());
  for (int i = 0; i < g.rows; ++i)
    for (int j = 0; j < g.cols; ++j) {
      const int t = pattern.pilot_symbols[j];
      g(i, j) = {static_cast<double>(x(0, sc[i], t)), static_cast<double>(x(1, sc[i], t))};
    }
  return g;
}

/// Splits every (frame, antenna) pair into an independent sample.
///
/// Noise for frame f is seeded by mix_seed(seed, f.frame_seed) so that a fixed
/// policy reproduces observe_pilots with that seed, and the same unit noise is
/// reused across SNR values (paired comparisons).
inline std::vector<FrameSample> build_samples(const std::vector<ChannelFrame>& frames, const PilotPattern& pattern,
                                              const SnrPolicy& policy, std::uint64_t seed) {
  if (frames.empty()) throw ArgumentError("build_samples: no frames");
  std::vector<FrameSample> out;
  out.reserve(frames.size() * frames.front().n_rx());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& frame = frames[f];
    pattern.validate(frame.n_subcarriers(), frame.n_symbols());
    const int n_psc = pattern.n_pilot_subcarriers(frame.n_subcarriers());
    const auto noise =
        detail::unit_pilot_noise(frame.n_rx(), n_psc, pattern.n_pilot_symbols(), mix_seed(seed, frame.frame_seed));
    Rng snr_rng(mix_seed(seed ^ 0x5a5a5a5a5a5a5a5aULL, frame.frame_seed));
    for (int r = 0; r < frame.n_rx(); ++r) {
      double snr = policy.value_db;
      if (policy.kind == SnrPolicy::Kind::uniform) snr = snr_rng.uniform(policy.lo_db, policy.hi_db);
      if (policy.kind == SnrPolicy::Kind::noiseless) snr = kNoiselessSnr;
      snr = static_cast<double>(static_cast<float>(snr));  // dataset files store f32
      const double sigma = std::sqrt(noise_variance(snr));
      auto pilots = detail::true_pilots(frame, pattern, r);
      if (sigma > 0.0)
        for (std::size_t i = 0; i < pilots.v.size(); ++i) pilots.v[i] += sigma * noise[r].v[i];
      FrameSample s;
      s.x = to_planes<float>(interpolate_to_grid(pilots, pattern, frame.n_subcarriers(), frame.n_symbols()));
      s.y = truth_planes(frame, r);
      s.snr_db = snr;
      s.rx_index = static_cast<std::uint32_t>(r);
      s.frame_id = static_cast<std::uint32_t>(f);
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace icenet
