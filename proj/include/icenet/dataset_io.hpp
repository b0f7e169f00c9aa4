#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "icenet/binary_io.hpp"
#include "icenet/error.hpp"
#include "icenet/ofdm_frame.hpp"

namespace icenet {

// Dataset file layout (little-endian):
//   "ICED" | u32 version=1 | u32 n_samples, channels=2, n_subcarriers, n_symbols, n_rx
//   | f32 snr block {kind, lo_db, hi_db} | 64 reserved zero bytes
//   | per sample: f32 x[2][S][T], f32 y[2][S][T], f32 snr_db, u32 rx_index, u32 frame_id
// snr kind: 0 = all samples share lo_db, 1 = mixed within [lo_db, hi_db], 2 = noiseless.

inline constexpr char kDatasetMagic[] = "ICED";
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetReserved = 64;
inline constexpr std::size_t kDatasetHeaderBytes = 4 + 4 + 5 * 4 + 3 * 4 + kDatasetReserved;

inline std::size_t dataset_sample_bytes(int n_subcarriers, int n_symbols) {
  return 2 * 2 * static_cast<std::size_t>(n_subcarriers) * n_symbols * 4 + 12;
}

struct DatasetHeader {
  std::uint32_t n_samples = 0;
  std::uint32_t channels = 2;
  std::uint32_t n_subcarriers = 0;
  std::uint32_t n_symbols = 0;
  std::uint32_t n_rx = 0;
  float snr_kind = 0.0f;
  float snr_lo_db = 0.0f;
  float snr_hi_db = 0.0f;
};

inline std::vector<char> encode_dataset(const std::vector<FrameSample>& samples) {
  DatasetHeader h;
  h.n_samples = static_cast<std::uint32_t>(samples.size());
  if (!samples.empty()) {
    h.n_subcarriers = static_cast<std::uint32_t>(samples.front().x.rows());
    h.n_symbols = static_cast<std::uint32_t>(samples.front().x.cols());
  }
  std::uint32_t max_rx = 0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  bool all_noiseless = !samples.empty();
  for (const auto& s : samples) {
    if (s.x.channels() != 2 || !s.x.same_shape(s.y) || s.x.rows() != static_cast<int>(h.n_subcarriers) ||
        s.x.cols() != static_cast<int>(h.n_symbols))
      throw ShapeError("save_dataset: inconsistent sample shapes");
    max_rx = std::max(max_rx, s.rx_index);
    lo = std::min(lo, s.snr_db);
    hi = std::max(hi, s.snr_db);
    all_noiseless = all_noiseless && std::isinf(s.snr_db) && s.snr_db > 0;
  }
  h.n_rx = samples.empty() ? 0 : max_rx + 1;
  if (all_noiseless) {
    h.snr_kind = 2.0f;
  } else if (!samples.empty()) {
    h.snr_kind = lo == hi ? 0.0f : 1.0f;
  }
  h.snr_lo_db = samples.empty() ? 0.0f : static_cast<float>(lo);
  h.snr_hi_db = samples.empty() ? 0.0f : static_cast<float>(hi);

  io::Writer w;
  w.bytes(kDatasetMagic, 4);
  w.u32(kDatasetVersion);
  w.u32(h.n_samples);
  w.u32(h.channels);
  w.u32(h.n_subcarriers);
  w.u32(h.n_symbols);
  w.u32(h.n_rx);
  w.f32(h.snr_kind);
  w.f32(h.snr_lo_db);
  w.f32(h.snr_hi_db);
  w.zeros(kDatasetReserved);
  for (const auto& s : samples) {
    for (float v : s.x) w.f32(v);
    for (float v : s.y) w.f32(v);
    w.f32(static_cast<float>(s.snr_db));
    w.u32(s.rx_index);
    w.u32(s.frame_id);
  }
  return w.buffer();
}

inline void save_dataset(const std::vector<FrameSample>& samples, const std::string& path) {
  io::Writer w;
  const auto buf = encode_dataset(samples);
  w.bytes(buf.data(), buf.size());
  w.write_file(path);
}

/// Parses a dataset buffer. Either every sample is returned or a FormatError
/// is thrown; the payload length is validated against the header first.
inline std::vector<FrameSample> decode_dataset(std::vector<char> bytes, DatasetHeader* header_out = nullptr) {
  io::Reader r(std::move(bytes));
  if (r.tag(4) != std::string(kDatasetMagic, 4)) throw FormatError("bad dataset magic", 0);
  const auto version_at = r.offset();
  if (r.u32() != kDatasetVersion) throw FormatError("unsupported dataset version", version_at);
  DatasetHeader h;
  h.n_samples = r.u32();
  const auto channels_at = r.offset();
  h.channels = r.u32();
  h.n_subcarriers = r.u32();
  h.n_symbols = r.u32();
  h.n_rx = r.u32();
  h.snr_kind = r.f32();
  h.snr_lo_db = r.f32();
  h.snr_hi_db = r.f32();
  r.skip(kDatasetReserved);
  if (h.channels != 2) throw FormatError("dataset channel count must be 2", channels_at);

  const std::size_t per = dataset_sample_bytes(static_cast<int>(h.n_subcarriers), static_cast<int>(h.n_symbols));
  const std::size_t expected = static_cast<std::size_t>(h.n_samples) * per;
  if (r.remaining() < expected)
    throw FormatError("dataset payload truncated: expected " + std::to_string(expected) + " bytes, found " +
                          std::to_string(r.remaining()),
                      r.size());
  if (r.remaining() > expected)
    throw FormatError("dataset payload longer than header shape implies", r.offset() + expected);

  std::vector<FrameSample> out;
  out.reserve(h.n_samples);
  const int S = static_cast<int>(h.n_subcarriers), T = static_cast<int>(h.n_symbols);
  for (std::uint32_t i = 0; i < h.n_samples; ++i) {
    FrameSample s;
    s.x = Tensor3<float>(2, S, T);
    s.y = Tensor3<float>(2, S, T);
    for (auto& v : s.x) v = r.f32();
    for (auto& v : s.y) v = r.f32();
    s.snr_db = static_cast<double>(r.f32());
    s.rx_index = r.u32();
    s.frame_id = r.u32();
    out.push_back(std::move(s));
  }
  if (header_out) *header_out = h;
  return out;
}

inline std::vector<FrameSample> load_dataset(const std::string& path, DatasetHeader* header_out = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ResolutionError(path);
  std::vector<char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_dataset(std::move(buf), header_out);
}

}  // namespace icenet
