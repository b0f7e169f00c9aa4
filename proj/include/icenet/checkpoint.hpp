#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icenet/binary_io.hpp"
#include "icenet/equilibrium_block.hpp"
#include "icenet/error.hpp"

namespace icenet {

// Checkpoint layout (little-endian):
//   "IEBP" | u32 version=1 | u32 model_kind (0 implicit, 1 explicit) | u32 n_blocks
//   | u32 hidden_width | u32 n_sub_blocks | u32 kernel_sizes[n_sub_blocks]
//   | u32 norm | u32 norm_groups | u32 injection | u64 seed
//   | u64 params_per_block | f32 params[n_blocks][params_per_block]
// Each block's parameters follow ParamLayout order.

enum class ModelKind : std::uint32_t { implicit = 0, explicit_stack = 1 };

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class Real>
struct Checkpoint {
  ModelKind kind = ModelKind::implicit;
  std::vector<IEBParams<Real>> blocks;
};

template <class Real>
std::vector<char> encode_checkpoint(const Checkpoint<Real>& ck) {
  if (ck.blocks.empty()) throw ArgumentError("checkpoint: no blocks");
  const auto& cfg = ck.blocks.front().config;
  io::Writer w;
  w.bytes("IEBP", 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ck.kind));
  w.u32(static_cast<std::uint32_t>(ck.blocks.size()));
  w.u32(static_cast<std::uint32_t>(cfg.hidden_width));
  w.u32(static_cast<std::uint32_t>(cfg.n_sub_blocks));
  for (int k : cfg.kernel_sizes) w.u32(static_cast<std::uint32_t>(k));
  w.u32(static_cast<std::uint32_t>(cfg.norm));
  w.u32(static_cast<std::uint32_t>(cfg.norm_groups));
  w.u32(static_cast<std::uint32_t>(cfg.injection));
  w.u64(cfg.seed);
  const std::uint64_t per = ck.blocks.front().size();
  w.u64(per);
  for (const auto& b : ck.blocks) {
    if (b.size() != per) throw ShapeError("checkpoint: blocks differ in size");
    for (Real v : b.flat) w.f32(static_cast<float>(v));
  }
  return w.buffer();
}

template <class Real>
void save_checkpoint(const Checkpoint<Real>& ck, const std::string& path) {
  io::Writer w;
  const auto buf = encode_checkpoint(ck);
  w.bytes(buf.data(), buf.size());
  w.write_file(path);
}

template <class Real>
Checkpoint<Real> decode_checkpoint(io::Reader r) {
  if (r.tag(4) != "IEBP") throw FormatError("bad checkpoint magic", 0);
  const auto at_version = r.offset();
  if (r.u32() != kCheckpointVersion) throw FormatError("unsupported checkpoint version", at_version);
  Checkpoint<Real> ck;
  const auto at_kind = r.offset();
  const std::uint32_t kind = r.u32();
  if (kind > 1) throw FormatError("unknown model kind", at_kind);
  ck.kind = static_cast<ModelKind>(kind);
  const std::uint32_t n_blocks = r.u32();
  IEBConfig cfg;
  cfg.hidden_width = static_cast<int>(r.u32());
  const auto at_sub = r.offset();
  cfg.n_sub_blocks = static_cast<int>(r.u32());
  if (cfg.n_sub_blocks < 1 || cfg.n_sub_blocks > 64) throw FormatError("implausible n_sub_blocks", at_sub);
  cfg.kernel_sizes.clear();
  for (int i = 0; i < cfg.n_sub_blocks; ++i) cfg.kernel_sizes.push_back(static_cast<int>(r.u32()));
  cfg.norm = static_cast<NormKind>(r.u32());
  cfg.norm_groups = static_cast<int>(r.u32());
  cfg.injection = static_cast<InjectionKind>(r.u32());
  cfg.seed = r.u64();
  const auto at_count = r.offset();
  const std::uint64_t per = r.u64();
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config invalid: ") + e.what(), at_count);
  }
  if (per != param_count(cfg)) throw FormatError("checkpoint parameter count does not match its config", at_count);
  if (r.remaining() != n_blocks * per * 4)
    throw FormatError("checkpoint payload length does not match header", r.offset());
  for (std::uint32_t b = 0; b < n_blocks; ++b) {
    IEBParams<Real> p(cfg);
    for (auto& v : p.flat) v = static_cast<Real>(r.f32());
    ck.blocks.push_back(std::move(p));
  }
  return ck;
}

template <class Real>
Checkpoint<Real> load_checkpoint(const std::string& path) {
  return decode_checkpoint<Real>(io::Reader::from_file(path));
}

}  // namespace icenet
