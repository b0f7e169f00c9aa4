#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "icenet/error.hpp"
#include "icenet/ofdm_frame.hpp"
#include "icenet/tensor.hpp"

namespace icenet {

/// ||est - truth||_F^2 / ||truth||_F^2 for one sample.
template <class RealA, class RealB>
double nmse(const Tensor3<RealA>& est, const Tensor3<RealB>& truth) {
  if (est.channels() != truth.channels() || est.rows() != truth.rows() || est.cols() != truth.cols())
    throw ShapeError("nmse: shape " + est.shape_string() + " vs " + truth.shape_string());
  double err = 0.0, pow = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double t = static_cast<double>(truth[i]);
    const double d = static_cast<double>(est[i]) - t;
    err += d * d;
    pow += t * t;
  }
  if (!(pow > 0.0)) throw NumericError("nmse: truth has zero power");
  return err / pow;
}

inline double nmse(const ComplexGrid& est, const ComplexGrid& truth) {
  if (est.rows != truth.rows || est.cols != truth.cols) throw ShapeError("nmse: grid shape mismatch");
  double err = 0.0, pow = 0.0;
  for (std::size_t i = 0; i < truth.v.size(); ++i) {
    err += std::norm(est.v[i] - truth.v[i]);
    pow += std::norm(truth.v[i]);
  }
  if (!(pow > 0.0)) throw NumericError("nmse: truth has zero power");
  return err / pow;
}

/// Dataset-level NMSE: the mean of per-sample values.
inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// LS at the pilots followed by linear interpolation.
inline Tensor3<float> estimate_ls_li(const FrameSample& sample, const PilotPattern& pattern) {
  const auto pilots = extract_pilots(sample.x, pattern);
  return to_planes<float>(interpolate_to_grid(pilots, pattern, sample.x.rows(), sample.x.cols()));
}

inline int default_ft_window(const PilotPattern& pattern, int n_subcarriers) {
  return std::max(1, pattern.n_pilot_subcarriers(n_subcarriers) / 4);
}

/// Completes full-band responses at the pilot symbols along time (linear
/// between pilot symbols, held outside).
inline ComplexGrid complete_in_time(const ComplexGrid& at_pilot_symbols, const PilotPattern& pattern, int n_symbols) {
  PilotPattern dense = pattern;
  dense.subcarrier_stride = 1;
  dense.subcarrier_offset = 0;
  return interpolate_to_grid(at_pilot_symbols, dense, at_pilot_symbols.rows, n_symbols);
}

/// Delay-domain (FT) denoising of the pilot LS estimates.
///
/// Per pilot symbol: IDFT across pilot subcarriers, noise floor from the
/// taps beyond the window, keep in-window taps whose energy exceeds three
/// times that floor, then a zero-padded DFT back onto every subcarrier.
inline Tensor3<float> estimate_ft(const FrameSample& sample, const PilotPattern& pattern, int window_len) {
  const int n_sc = sample.x.rows();
  const int n_sym = sample.x.cols();
  const auto pilots = extract_pilots(sample.x, pattern);
  const int np = pilots.rows;
  if (window_len < 1 || window_len > np)
    throw ArgumentError("estimate_ft: window_len must be in [1, " + std::to_string(np) + "]");
  const int n_fft = np * pattern.subcarrier_stride;

  Eigen::FFT<double> fft;
  ComplexGrid at_pilot_symbols(n_sc, pilots.cols);
  std::vector<std::complex<double>> col(np), taps, padded(n_fft), spectrum;
  for (int j = 0; j < pilots.cols; ++j) {
    for (int i = 0; i < np; ++i) col[i] = pilots(i, j);
    fft.inv(taps, col);

    double noise = 0.0;
    if (window_len < np) {
      for (int n = window_len; n < np; ++n) noise += std::norm(taps[n]);
      noise /= static_cast<double>(np - window_len);
    }
    std::fill(padded.begin(), padded.end(), std::complex<double>(0.0));
    for (int n = 0; n < window_len; ++n) {
      if (std::norm(taps[n]) > 3.0 * noise) {
        // Undo the phase ramp from the pilot comb offset.
        const double ph = 2.0 * std::numbers::pi * pattern.subcarrier_offset * n / static_cast<double>(n_fft);
        padded[n] = taps[n] * std::polar(1.0, ph);
      }
    }
    fft.fwd(spectrum, padded);
    for (int k = 0; k < n_sc; ++k) at_pilot_symbols(k, j) = spectrum[k % n_fft];
  }
  return to_planes<float>(complete_in_time(at_pilot_symbols, pattern, n_sym));
}

/// Sample-statistics Wiener filter from pilot-grid LS estimates to the full grid.
struct LmmseCalibration {
  Eigen::MatrixXcd W;  // [n_subcarriers*n_symbols, n_pilot_cells]
  double noise_var = 0.0;
  int n_calib_frames = 0;
  int n_subcarriers = 0;
  int n_symbols = 0;
  PilotPattern pattern;
};

/// Matrix of the (linear) pilot interpolation operator: column c is the
/// interpolated grid of the c-th unit pilot vector.
inline Eigen::MatrixXcd interpolation_matrix(const PilotPattern& pattern, int n_sc, int n_sym) {
  const int np = pattern.n_pilot_subcarriers(n_sc), ns = pattern.n_pilot_symbols();
  Eigen::MatrixXcd L(static_cast<Eigen::Index>(n_sc) * n_sym, static_cast<Eigen::Index>(np) * ns);
  ComplexGrid unit(np, ns);
  for (Eigen::Index c = 0; c < L.cols(); ++c) {
    std::fill(unit.v.begin(), unit.v.end(), std::complex<double>(0.0));
    unit.v[c] = 1.0;
    const auto g = interpolate_to_grid(unit, pattern, n_sc, n_sym);
    for (Eigen::Index r = 0; r < L.rows(); ++r) L(r, c) = g.v[r];
  }
  return L;
}

/// Builds W = R_fp (R_pp + s^2 I)^-1 from calibration samples.
///
/// R_pp is the autocorrelation of the pilot LS estimates, pooled over every
/// (frame, antenna) sample; s^2 comes from `snr_db`.
inline LmmseCalibration calibrate_lmmse(const std::vector<FrameSample>& calib, const PilotPattern& pattern,
                                        double snr_db) {
  if (calib.size() < 2) throw ArgumentError("calibrate_lmmse: need at least 2 calibration samples");
  const int n_sc = calib.front().x.rows(), n_sym = calib.front().x.cols();
  pattern.validate(n_sc, n_sym);
  const Eigen::Index n_p = static_cast<Eigen::Index>(pattern.n_pilot_subcarriers(n_sc)) * pattern.n_pilot_symbols();
  const Eigen::MatrixXcd L = interpolation_matrix(pattern, n_sc, n_sym);

  Eigen::MatrixXcd r_pp = Eigen::MatrixXcd::Zero(n_p, n_p);
  constexpr Eigen::Index kChunk = 256;
  std::set<std::uint32_t> frames;
  double noise_sum = 0.0;
  for (std::size_t begin = 0; begin < calib.size(); begin += kChunk) {
    const Eigen::Index m = static_cast<Eigen::Index>(std::min<std::size_t>(kChunk, calib.size() - begin));
    Eigen::MatrixXcd P(n_p, m);
    for (Eigen::Index s = 0; s < m; ++s) {
      const auto& sample = calib[begin + s];
      if (sample.x.rows() != n_sc || sample.x.cols() != n_sym) throw ShapeError("calibrate_lmmse: mixed sample shapes");
      const auto p = extract_pilots(sample.x, pattern);
      for (Eigen::Index i = 0; i < n_p; ++i) P(i, s) = p.v[i];
      noise_sum += noise_variance(sample.snr_db);
      frames.insert(sample.frame_id);
    }
    r_pp.noalias() += P * P.adjoint();
  }
  const double n = static_cast<double>(calib.size());
  r_pp /= n;
  r_pp = 0.5 * (r_pp + r_pp.adjoint()).eval();

  LmmseCalibration out;
  out.noise_var = noise_variance(snr_db);
  out.n_calib_frames = static_cast<int>(frames.size());
  out.n_subcarriers = n_sc;
  out.n_symbols = n_sym;
  out.pattern = pattern;

  // LS pilots carry the calibration noise: E[p p^H] = R + s^2 I. Remove the
  // mean noise per eigen-direction and clip at zero, so the channel estimate
  // stays PSD even when calibration data is short. The interpolated grid is
  // L p, hence R_fp = L R and W = L R (R + s^2 I)^-1.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(r_pp);
  if (eig.info() != Eigen::Success) throw NumericError("calibrate_lmmse: eigen-decomposition failed");
  const double mean_noise = noise_sum / n;
  Eigen::VectorXd gain(n_p);
  for (Eigen::Index i = 0; i < n_p; ++i) {
    const double r = std::max(eig.eigenvalues()[i] - mean_noise, 0.0);
    gain[i] = r > 0.0 ? r / (r + out.noise_var) : 0.0;
  }
  const Eigen::MatrixXcd& V = eig.eigenvectors();
  const Eigen::MatrixXcd pilot_filter = V * gain.asDiagonal() * V.adjoint();
  out.W = L * pilot_filter;
  if (!out.W.allFinite()) throw NumericError("calibrate_lmmse: non-finite filter");
  return out;
}

inline Tensor3<float> estimate_lmmse(const FrameSample& sample, const LmmseCalibration& calib) {
  if (sample.x.rows() != calib.n_subcarriers || sample.x.cols() != calib.n_symbols)
    throw ShapeError("estimate_lmmse: sample shape does not match calibration");
  const auto p = extract_pilots(sample.x, calib.pattern);
  if (static_cast<Eigen::Index>(p.v.size()) != calib.W.cols()) throw ShapeError("estimate_lmmse: pilot count mismatch");
  const Eigen::VectorXcd pv = Eigen::Map<const Eigen::VectorXcd>(p.v.data(), static_cast<Eigen::Index>(p.v.size()));
  const Eigen::VectorXcd full = calib.W * pv;
  ComplexGrid g(calib.n_subcarriers, calib.n_symbols);
  for (Eigen::Index i = 0; i < full.size(); ++i) g.v[i] = full[i];
  return to_planes<float>(g);
}

}  // namespace icenet
