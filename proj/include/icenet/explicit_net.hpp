#pragma once

#include <cstdint>
#include <vector>

#include "icenet/equilibrium_block.hpp"
#include "icenet/error.hpp"
#include "icenet/rng.hpp"
#include "icenet/tensor.hpp"

namespace icenet {

/// Explicit stack of n independently parameterised blocks (ECENet).
struct ECENetConfig {
  int n_blocks = 4;
  IEBConfig block_cfg;
  std::uint64_t seed = 11;

  void validate() const {
    if (n_blocks < 1) throw ConfigError("ecenet config: n_blocks must be >= 1");
    block_cfg.validate();
  }
};

template <class Real>
using ECENetParams = std::vector<IEBParams<Real>>;

inline std::size_t ecenet_param_count(const ECENetConfig& cfg) {
  cfg.validate();
  return static_cast<std::size_t>(cfg.n_blocks) * param_count(cfg.block_cfg);
}

template <class Real>
std::size_t ecenet_param_count(const ECENetParams<Real>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

template <class Real>
ECENetParams<Real> init_ecenet(const ECENetConfig& cfg) {
  cfg.validate();
  ECENetParams<Real> out;
  for (int i = 0; i < cfg.n_blocks; ++i)
    out.push_back(init_params<Real>(cfg.block_cfg.with_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(i)))));
  return out;
}

/// z0 = x, z_{i+1} = block_i(z_i, x); the estimate is z_n.
template <class Real>
Tensor3<Real> ecenet_forward(const Tensor3<Real>& x, const ECENetParams<Real>& params) {
  if (params.empty()) throw ConfigError("ecenet_forward: no blocks");
  BlockWorkspace<Real> ws;
  Tensor3<Real> z = x;
  for (const auto& p : params) z = ws.forward(z, x, p);
  return z;
}

/// Reverse-mode record of an ECENet forward pass: one workspace per block,
/// so retained storage grows linearly with depth.
template <class Real>
class ECENetTape {
 public:
  const Tensor3<Real>& forward(const Tensor3<Real>& x, const ECENetParams<Real>& params) {
    if (params.empty()) throw ConfigError("ecenet forward: no blocks");
    params_ = &params;
    blocks_.resize(params.size());
    const Tensor3<Real>* z = &x;
    for (std::size_t i = 0; i < params.size(); ++i) z = &blocks_[i].forward(*z, x, params[i]);
    return *z;
  }

  /// Accumulates dL/dtheta_i for every block into grads (same shapes as params).
  void backward(const Tensor3<Real>& grad_out, ECENetParams<Real>& grads) {
    if (!params_ || grads.size() != params_->size()) throw ShapeError("ecenet backward: gradient list mismatch");
    Tensor3<Real> g = grad_out, dz;
    for (std::size_t i = blocks_.size(); i-- > 0;) {
      blocks_[i].backward(g, i > 0 ? &dz : nullptr, &grads[i]);
      if (i > 0) g = dz;
    }
  }

  std::size_t retained_tensors() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.retained_tensors();
    return n;
  }

 private:
  const ECENetParams<Real>* params_ = nullptr;
  std::vector<BlockWorkspace<Real>> blocks_;
};

}  // namespace icenet
