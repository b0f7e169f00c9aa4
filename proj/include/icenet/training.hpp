#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "icenet/classical.hpp"
#include "icenet/csv.hpp"
#include "icenet/error.hpp"
#include "icenet/explicit_net.hpp"
#include "icenet/fixed_point.hpp"
#include "icenet/ofdm_frame.hpp"
#include "icenet/rng.hpp"

namespace icenet {

struct TrainConfig {
  double lr_init = 1e-3;
  double lr_final = 1e-5;
  int epochs = 100;
  int cosine_period_epochs = 50;
  int batch_size = 20;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int n_train = 1500;
  int n_val = 300;
  int n_test = 200;
  double snr_lo_db = -10.0;
  double snr_hi_db = 15.0;
  double grad_clip_norm = 1.0;
  double max_divergence_rate = 0.2;
  std::uint64_t seed = 2024;

  void validate() const {
    if (!(lr_final > 0.0 && lr_final <= lr_init)) throw ConfigError("train config: need 0 < lr_final <= lr_init");
    if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
    if (cosine_period_epochs < 1) throw ConfigError("train config: cosine_period_epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (n_train < 1 || n_val < 0 || n_test < 0) throw ConfigError("train config: invalid split sizes");
  }
};

/// Cosine annealing restarted every `cosine_period_epochs`.
inline double lr_at(int epoch, const TrainConfig& cfg) {
  const int period = cfg.cosine_period_epochs;
  const double phase = static_cast<double>(epoch % period) / static_cast<double>(period);
  return cfg.lr_final + 0.5 * (cfg.lr_init - cfg.lr_final) * (1.0 + std::cos(std::numbers::pi * phase));
}

/// Raised when too many samples in one epoch produce non-finite iterates.
class TrainingDivergedError : public NumericError {
 public:
  using NumericError::NumericError;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_nmse;
  std::vector<double> lr;
  std::vector<double> mean_iters;  // forward iterations on the validation set; empty rows for explicit models
  std::vector<int> divergence_flags;
  std::vector<int> skipped_batches;
  double wall_time_s = 0.0;
  int best_epoch = -1;
  double best_val_nmse = 0.0;
  bool implicit = true;

  /// epoch,lr,train_loss,val_nmse,mean_iters
  std::string to_csv() const {
    CsvWriter csv({"epoch", "lr", "train_loss", "val_nmse", "mean_iters"});
    for (std::size_t e = 0; e < train_loss.size(); ++e) {
      csv.row({std::to_string(e), fmt_real(lr[e]), fmt_real(train_loss[e]), fmt_real(val_nmse[e]),
               implicit ? fmt_real(mean_iters[e]) : std::string()});
    }
    return csv.str();
  }
};

/// Adam over a flat parameter vector.
template <class Real>
class Adam {
 public:
  Adam(std::size_t n, const TrainConfig& cfg) : m_(n, 0.0), v_(n, 0.0), cfg_(cfg) {}

  void step(Real* params, const Real* grad, double lr) {
    ++t_;
    const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, t_), c2 = 1.0 - std::pow(b2, t_);
    for (std::size_t i = 0; i < m_.size(); ++i) {
      const double g = static_cast<double>(grad[i]);
      m_[i] = b1 * m_[i] + (1.0 - b1) * g;
      v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
      const double mh = m_[i] / c1, vh = v_[i] / c2;
      params[i] = static_cast<Real>(static_cast<double>(params[i]) - lr * mh / (std::sqrt(vh) + cfg_.adam_eps));
    }
  }

 private:
  std::vector<double> m_, v_;
  TrainConfig cfg_;
  int t_ = 0;
};

/// Mean squared error over all cells of the estimate planes.
template <class Real>
double plane_mse(const Tensor3<Real>& est, const Tensor3<Real>& truth) {
  require_same_shape(est, truth, "plane_mse");
  double s = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double d = static_cast<double>(est[i]) - static_cast<double>(truth[i]);
    s += d * d;
  }
  return s / static_cast<double>(est.size());
}

namespace detail {

inline std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

template <class Real>
double global_norm(const std::vector<IEBParams<Real>>& grads) {
  double s = 0.0;
  for (const auto& g : grads)
    for (Real v : g.flat) s += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(s);
}

// Gradient of the batch-mean MSE for one sample: 2 (est - y) / (cells * batch).
inline Tensor3<float> mse_grad(const Tensor3<float>& est, const Tensor3<float>& y, std::size_t batch) {
  Tensor3<float> g(est.channels(), est.rows(), est.cols());
  const double scale = 2.0 / (static_cast<double>(est.size()) * static_cast<double>(batch));
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<float>(scale * (est[i] - y[i]));
  return g;
}

/// Shared optimisation loop. `Model` supplies:
///   std::vector<IEBParams<float>>& blocks();
///   std::optional<double> accumulate(const FrameSample&, std::size_t batch, grads&, int& flags, bool& skip)
///   double evaluate(const std::vector<FrameSample>&, double& mean_iters)
template <class Model>
TrainReport run_training(Model& model, const std::vector<FrameSample>& train, const std::vector<FrameSample>& val,
                         const TrainConfig& cfg, std::vector<IEBParams<float>>& best) {
  cfg.validate();
  if (train.empty()) throw ArgumentError("train: empty training set");
  const auto t0 = std::chrono::steady_clock::now();
  auto& blocks = model.blocks();
  std::vector<Adam<float>> opt;
  for (const auto& b : blocks) opt.emplace_back(b.size(), cfg);

  TrainReport rep;
  rep.implicit = model.implicit();
  best = blocks;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    const auto order = shuffled_order(train.size(), mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0.0;
    std::size_t loss_n = 0;
    int flags = 0, skipped = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t bsz = end - start;
      std::vector<IEBParams<float>> grads;
      for (const auto& b : blocks) grads.push_back(b.zeros_like());
      bool skip = false;
      for (std::size_t i = start; i < end; ++i) {
        const auto loss = model.accumulate(train[order[i]], bsz, grads, flags, skip);
        if (loss) {
          loss_sum += *loss;
          ++loss_n;
        }
      }
      if (skip) {
        ++skipped;
        continue;
      }
      const double norm = global_norm(grads);
      if (!std::isfinite(norm)) {
        ++skipped;
        continue;
      }
      if (norm > cfg.grad_clip_norm) {
        const float s = static_cast<float>(cfg.grad_clip_norm / norm);
        for (auto& g : grads)
          for (auto& v : g.flat) v *= s;
      }
      for (std::size_t b = 0; b < blocks.size(); ++b) opt[b].step(blocks[b].flat.data(), grads[b].flat.data(), lr);
    }
    if (static_cast<double>(flags) > cfg.max_divergence_rate * static_cast<double>(train.size()))
      throw TrainingDivergedError("training aborted: " + std::to_string(flags) + " of " +
                                  std::to_string(train.size()) + " samples diverged in epoch " + std::to_string(epoch));
    double mean_iters = 0.0;
    const double val_nmse = val.empty() ? 0.0 : model.evaluate(val, mean_iters);
    rep.train_loss.push_back(loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0);
    rep.val_nmse.push_back(val_nmse);
    rep.lr.push_back(lr);
    rep.mean_iters.push_back(mean_iters);
    rep.divergence_flags.push_back(flags);
    rep.skipped_batches.push_back(skipped);
    if (rep.best_epoch < 0 || val_nmse < rep.best_val_nmse) {
      rep.best_epoch = epoch;
      rep.best_val_nmse = val_nmse;
      best = blocks;
    }
  }
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace detail

/// Mean NMSE and mean forward iterations of an equilibrium model over samples.
inline double evaluate_icenet(const std::vector<FrameSample>& samples, const IEBParams<float>& params,
                              const SolveConfig& solve, double* mean_iters = nullptr) {
  BlockWorkspace<float> ws;
  std::vector<double> errs;
  double iters = 0.0;
  for (const auto& s : samples) {
    Tensor3<float> est;
    try {
      auto res = deq_forward(s.x, params, solve, &ws);
      iters += res.iters_used;
      est = std::move(res.z_star);
    } catch (const DivergenceError& e) {
      iters += solve.max_iters;
      est = Tensor3<float>(2, s.x.rows(), s.x.cols());
      for (std::size_t i = 0; i < est.size() && i < e.last_finite().size(); ++i)
        est[i] = static_cast<float>(e.last_finite()[i]);
    }
    errs.push_back(nmse(est, s.y));
  }
  if (mean_iters) *mean_iters = samples.empty() ? 0.0 : iters / static_cast<double>(samples.size());
  return mean_of(errs);
}

inline double evaluate_ecenet(const std::vector<FrameSample>& samples, const ECENetParams<float>& params) {
  std::vector<double> errs;
  for (const auto& s : samples) errs.push_back(nmse(ecenet_forward(s.x, params), s.y));
  return mean_of(errs);
}

struct IcenetTrainResult {
  TrainReport report;
  IEBParams<float> params;  // best validation epoch
};

struct EcenetTrainResult {
  TrainReport report;
  ECENetParams<float> params;
};

/// Trains the equilibrium model; gradients come from the implicit backward pass.
inline IcenetTrainResult train_icenet(const std::vector<FrameSample>& train, const std::vector<FrameSample>& val,
                                      const IEBConfig& block_cfg, const TrainConfig& cfg, const SolveConfig& solve,
                                      std::optional<SolveConfig> backward = std::nullopt) {
  struct Model {
    std::vector<IEBParams<float>> params;
    SolveConfig solve, bw;
    BlockWorkspace<float> ws;

    bool implicit() const { return true; }
    std::vector<IEBParams<float>>& blocks() { return params; }

    std::optional<double> accumulate(const FrameSample& s, std::size_t bsz, std::vector<IEBParams<float>>& grads,
                                     int& flags, bool& skip) {
      SolveResult<float> res;
      try {
        res = deq_forward(s.x, params[0], solve, &ws);
      } catch (const DivergenceError&) {
        ++flags;
        return std::nullopt;
      }
      const double loss = plane_mse(res.z_star, s.y);
      try {
        const auto g = deq_backward(res.z_star, s.x, params[0], detail::mse_grad(res.z_star, s.y, bsz), bw, &ws);
        for (std::size_t i = 0; i < g.grad.flat.size(); ++i) grads[0].flat[i] += g.grad.flat[i];
      } catch (const DivergenceError&) {
        skip = true;
      }
      return loss;
    }

    double evaluate(const std::vector<FrameSample>& v, double& mean_iters) {
      return evaluate_icenet(v, params[0], solve, &mean_iters);
    }
  };
  Model model;
  model.params = {init_params<float>(block_cfg)};
  model.solve = solve;
  model.bw = backward.value_or(default_backward_config(solve));
  std::vector<IEBParams<float>> best;
  IcenetTrainResult out;
  out.report = detail::run_training(model, train, val, cfg, best);
  out.params = best.front();
  return out;
}

/// Trains the explicit stack with ordinary reverse accumulation.
inline EcenetTrainResult train_ecenet(const std::vector<FrameSample>& train, const std::vector<FrameSample>& val,
                                      const ECENetConfig& net_cfg, const TrainConfig& cfg) {
  struct Model {
    std::vector<IEBParams<float>> params;
    ECENetTape<float> tape;

    bool implicit() const { return false; }
    std::vector<IEBParams<float>>& blocks() { return params; }

    std::optional<double> accumulate(const FrameSample& s, std::size_t bsz, std::vector<IEBParams<float>>& grads,
                                     int& flags, bool&) {
      Tensor3<float> est;
      try {
        est = tape.forward(s.x, params);
      } catch (const NumericError&) {
        ++flags;
        return std::nullopt;
      }
      if (!est.all_finite()) {
        ++flags;
        return std::nullopt;
      }
      tape.backward(detail::mse_grad(est, s.y, bsz), grads);
      return plane_mse(est, s.y);
    }

    double evaluate(const std::vector<FrameSample>& v, double& mean_iters) {
      mean_iters = static_cast<double>(params.size());
      return evaluate_ecenet(v, params);
    }
  };
  Model model;
  model.params = init_ecenet<float>(net_cfg);
  std::vector<IEBParams<float>> best;
  EcenetTrainResult out;
  out.report = detail::run_training(model, train, val, cfg, best);
  out.params = best;
  return out;
}

}  // namespace icenet
