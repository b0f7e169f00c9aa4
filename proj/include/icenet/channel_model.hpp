#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "icenet/error.hpp"
#include "icenet/rng.hpp"

namespace icenet {

inline constexpr double kSpeedOfLight = 299792458.0;

inline constexpr double kmh_to_mps(double kmh) { return kmh / 3.6; }

/// Parameters of the synthetic tapped-delay-line channel.
struct ChannelConfig {
  double carrier_freq_hz = 3.5e9;
  double subcarrier_spacing_hz = 15e3;
  int n_subcarriers = 128;
  int n_symbols = 14;
  int n_rx = 8;
  int n_paths = 12;
  double rms_delay_spread_s = 300e-9;
  double ue_speed_mps = kmh_to_mps(100.0);
  std::uint64_t seed = 1;

  /// OFDM symbol duration; 14 symbols at 15 kHz span roughly one 1 ms slot.
  double symbol_duration_s() const { return 1.0 / subcarrier_spacing_hz; }

  double max_doppler_hz() const { return ue_speed_mps * carrier_freq_hz / kSpeedOfLight; }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("channel config: " + m); };
    if (n_subcarriers < 2) fail("n_subcarriers must be >= 2");
    if (n_symbols < 2) fail("n_symbols must be >= 2");
    if (n_rx < 1) fail("n_rx must be >= 1");
    if (n_paths < 1) fail("n_paths must be >= 1");
    if (!(subcarrier_spacing_hz > 0.0)) fail("subcarrier_spacing_hz must be > 0");
    if (!(carrier_freq_hz > 0.0)) fail("carrier_freq_hz must be > 0");
    if (!(rms_delay_spread_s >= 0.0)) fail("rms_delay_spread_s must be >= 0");
    if (!(rms_delay_spread_s < 1.0 / subcarrier_spacing_hz))
      fail("rms_delay_spread_s must be < 1/subcarrier_spacing_hz");
    if (!(ue_speed_mps >= 0.0) || !std::isfinite(ue_speed_mps)) fail("ue_speed_mps must be finite and >= 0");
  }
};

/// One propagation path with a gain per receive antenna.
struct ChannelPath {
  double delay_s = 0.0;
  double doppler_hz = 0.0;
  std::vector<std::complex<double>> gains;  // [n_rx]
};

/// Ground-truth frequency response H[rx, subcarrier, symbol].
struct ChannelFrame {
  ChannelConfig config;
  std::uint64_t frame_seed = 0;
  std::vector<std::complex<float>> h;

  int n_rx() const { return config.n_rx; }
  int n_subcarriers() const { return config.n_subcarriers; }
  int n_symbols() const { return config.n_symbols; }

  std::size_t index(int rx, int sc, int sym) const {
    return (static_cast<std::size_t>(rx) * config.n_subcarriers + sc) * config.n_symbols + sym;
  }
  std::complex<float>& at(int rx, int sc, int sym) { return h[index(rx, sc, sym)]; }
  const std::complex<float>& at(int rx, int sc, int sym) const { return h[index(rx, sc, sym)]; }

  double mean_power() const {
    double p = 0.0;
    for (const auto& v : h) p += std::norm(std::complex<double>(v));
    return h.empty() ? 0.0 : p / static_cast<double>(h.size());
  }

  friend bool operator==(const ChannelFrame& a, const ChannelFrame& b) {
    return a.frame_seed == b.frame_seed && a.h == b.h;
  }
};

/// Evaluates H[r,k,t] = sum_p a_{p,r} exp(j2pi(f_p t T_sym - k df tau_p)) in
/// double precision, optionally normalising to unit mean power.
inline ChannelFrame synthesize_frame(const ChannelConfig& cfg, const std::vector<ChannelPath>& paths,
                                     std::uint64_t frame_seed, bool normalize = true) {
  cfg.validate();
  const int R = cfg.n_rx, K = cfg.n_subcarriers, T = cfg.n_symbols;
  for (const auto& p : paths) {
    if (static_cast<int>(p.gains.size()) != R) throw ShapeError("path gain count != n_rx");
  }
  const double two_pi = 2.0 * std::numbers::pi;
  const double t_sym = cfg.symbol_duration_s();
  std::vector<std::complex<double>> acc(static_cast<std::size_t>(R) * K * T);
  for (const auto& p : paths) {
    for (int r = 0; r < R; ++r) {
      const std::complex<double> a = p.gains[r];
      for (int k = 0; k < K; ++k) {
        for (int t = 0; t < T; ++t) {
          const double phase = two_pi * (p.doppler_hz * t * t_sym - k * cfg.subcarrier_spacing_hz * p.delay_s);
          acc[(static_cast<std::size_t>(r) * K + k) * T + t] += a * std::polar(1.0, phase);
        }
      }
    }
  }
  double scale = 1.0;
  if (normalize) {
    double p = 0.0;
    for (const auto& v : acc) p += std::norm(v);
    p /= static_cast<double>(acc.size());
    if (!(p > 0.0)) throw NumericError("channel frame has zero power");
    scale = 1.0 / std::sqrt(p);
  }
  ChannelFrame frame;
  frame.config = cfg;
  frame.frame_seed = frame_seed;
  frame.h.resize(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    frame.h[i] = std::complex<float>(static_cast<float>(acc[i].real() * scale),
                                     static_cast<float>(acc[i].imag() * scale));
  }
  return frame;
}

/// Draws the random path set for one frame: exponential delays, Jakes-style
/// Doppler from a uniform arrival angle, exponential power-delay profile and
/// i.i.d. uniform phases per antenna.
inline std::vector<ChannelPath> draw_paths(const ChannelConfig& cfg, std::uint64_t frame_seed) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, frame_seed));
  const double fd = cfg.max_doppler_hz();
  std::vector<ChannelPath> paths(cfg.n_paths);
  double total = 0.0;
  std::vector<double> power(cfg.n_paths);
  for (int p = 0; p < cfg.n_paths; ++p) {
    auto& path = paths[p];
    path.delay_s = cfg.rms_delay_spread_s > 0.0 ? rng.exponential(cfg.rms_delay_spread_s) : 0.0;
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    path.doppler_hz = fd * std::cos(theta);
    power[p] = cfg.rms_delay_spread_s > 0.0 ? std::exp(-path.delay_s / cfg.rms_delay_spread_s) : 1.0;
    total += power[p];
  }
  for (int p = 0; p < cfg.n_paths; ++p) {
    const double amp = std::sqrt(power[p] / total);
    paths[p].gains.resize(cfg.n_rx);
    for (int r = 0; r < cfg.n_rx; ++r) {
      paths[p].gains[r] = std::polar(amp, rng.uniform(0.0, 2.0 * std::numbers::pi));
    }
  }
  return paths;
}

/// Deterministic in (cfg, frame_seed).
inline ChannelFrame generate_frame(const ChannelConfig& cfg, std::uint64_t frame_seed) {
  return synthesize_frame(cfg, draw_paths(cfg, frame_seed), frame_seed);
}

inline std::vector<ChannelFrame> generate_dataset(const ChannelConfig& cfg, int n_frames, std::uint64_t base_seed) {
  if (n_frames < 1) throw ArgumentError("generate_dataset: n_frames must be >= 1");
  std::vector<ChannelFrame> frames;
  frames.reserve(n_frames);
  for (int i = 0; i < n_frames; ++i) frames.push_back(generate_frame(cfg, base_seed + static_cast<std::uint64_t>(i)));
  return frames;
}

namespace detail {

// Mean over valid offsets of |<a_i, a_{i+lag}>| / (|a_i| |a_{i+lag}|), where
// a_i is the slice selected by `slice(i)` gathered over the other two axes.
template <class Slice>
double mean_slice_correlation(int n, int lag, Slice&& slice) {
  double acc = 0.0;
  for (int i = 0; i + lag < n; ++i) {
    std::complex<double> cross = 0.0;
    double pa = 0.0, pb = 0.0;
    slice(i, i + lag, cross, pa, pb);
    const double denom = std::sqrt(pa * pb);
    acc += denom > 0.0 ? std::abs(cross) / denom : 0.0;
  }
  return acc / static_cast<double>(n - lag);
}

}  // namespace detail

/// Magnitude of the complex correlation between symbol t and t+lag, averaged over t.
inline double time_correlation(const ChannelFrame& frame, int lag) {
  const int T = frame.n_symbols();
  if (lag < 0 || lag >= T) throw ArgumentError("time_correlation: lag out of range");
  return detail::mean_slice_correlation(T, lag, [&](int a, int b, std::complex<double>& cross, double& pa, double& pb) {
    for (int r = 0; r < frame.n_rx(); ++r) {
      for (int k = 0; k < frame.n_subcarriers(); ++k) {
        const std::complex<double> u(frame.at(r, k, a)), v(frame.at(r, k, b));
        cross += u * std::conj(v);
        pa += std::norm(u);
        pb += std::norm(v);
      }
    }
  });
}

/// Same as time_correlation but across subcarriers separated by `spacing`.
inline double frequency_correlation(const ChannelFrame& frame, int spacing) {
  const int K = frame.n_subcarriers();
  if (spacing < 0 || spacing >= K) throw ArgumentError("frequency_correlation: spacing out of range");
  return detail::mean_slice_correlation(K, spacing, [&](int a, int b, std::complex<double>& cross, double& pa, double& pb) {
    for (int r = 0; r < frame.n_rx(); ++r) {
      for (int t = 0; t < frame.n_symbols(); ++t) {
        const std::complex<double> u(frame.at(r, a, t)), v(frame.at(r, b, t));
        cross += u * std::conj(v);
        pa += std::norm(u);
        pb += std::norm(v);
      }
    }
  });
}

}  // namespace icenet
