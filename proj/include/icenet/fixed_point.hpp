#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "icenet/equilibrium_block.hpp"
#include "icenet/error.hpp"
#include "icenet/tensor.hpp"

namespace icenet {

/// Stopping and acceleration settings. `eps` is the relative-residual
/// tolerance and `max_iters` the iteration cap (the adaptive knobs).
struct SolveConfig {
  double eps = 1e-2;
  int max_iters = 10;
  int history_m = 5;
  double tikhonov_lambda = 1e-4;
  double mixing_beta = 1.0;
  double denom_floor = 1e-8;

  void validate() const {
    if (!(eps > 0.0)) throw ConfigError("solve config: eps must be > 0");
    if (max_iters < 1) throw ConfigError("solve config: max_iters must be >= 1");
    if (history_m < 1) throw ConfigError("solve config: history_m must be >= 1");
    if (!(denom_floor >= 0.0)) throw ConfigError("solve config: denom_floor must be >= 0");
  }
};

template <class Real>
struct SolveResult {
  Tensor3<Real> z_star;
  int iters_used = 0;
  std::vector<double> residual_trace;
  bool converged = false;
  /// Peak number of tensors alive at once during the solve, on top of those
  /// alive before it (solver state plus anything the map allocates).
  std::size_t peak_retained = 0;
};

/// ||f(z) - z|| / (||f(z)|| + floor).
template <class Real>
double relative_residual(const Tensor3<Real>& z, const Tensor3<Real>& fz, double floor) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double f = static_cast<double>(fz[i]);
    const double d = f - static_cast<double>(z[i]);
    num += d * d;
    den += f * f;
  }
  return std::sqrt(num) / (std::sqrt(den) + floor);
}

namespace detail {

template <class Real>
std::vector<double> to_double(const Tensor3<Real>& t) {
  return std::vector<double>(t.begin(), t.end());
}

template <class Real, class Map>
Tensor3<Real> evaluate_checked(Map& f, const Tensor3<Real>& z, const std::vector<double>& trace, const char* who) {
  Tensor3<Real> fz = f(z);
  if (!fz.same_shape(z)) throw ShapeError(std::string(who) + ": map changed the state shape");
  if (!fz.all_finite()) throw DivergenceError(std::string(who) + ": non-finite iterate", trace, to_double(z));
  return fz;
}

}  // namespace detail

/// Plain fixed-point iteration z <- f(z).
///
/// Iteration k evaluates f at the current iterate. If its relative residual
/// is within eps, that iterate is returned as converged; otherwise the
/// iterate advances to f(z). When the cap is reached the last f(z) is returned.
template <class Real, class Map>
SolveResult<Real> picard_solve(Map&& f, const Tensor3<Real>& z0, const SolveConfig& cfg) {
  cfg.validate();
  TensorCensus::Scope census;
  SolveResult<Real> res;
  Tensor3<Real> z = z0;
  for (int k = 1; k <= cfg.max_iters; ++k) {
    Tensor3<Real> fz = detail::evaluate_checked(f, z, res.residual_trace, "picard_solve");
    const double r = relative_residual(z, fz, cfg.denom_floor);
    res.residual_trace.push_back(r);
    res.iters_used = k;
    if (r <= cfg.eps) {
      res.converged = true;
      break;
    }
    z = std::move(fz);
  }
  res.z_star = std::move(z);
  res.peak_retained = census.peak_above_base();
  return res;
}

/// Anderson-accelerated fixed-point iteration.
///
/// Keeps the last `history_m` pairs (z_i, f(z_i)). Each step solves
///   min_a ||sum a_i g_i||^2 + lambda' ||a||^2  s.t. sum a_i = 1,  g_i = f(z_i) - z_i
/// through its normal equations and moves to sum a_i ((1-beta) z_i + beta f(z_i)).
/// The Tikhonov weight is lambda' = lambda * mean(diag(G^T G)) so the
/// regularisation keeps the same relative strength as residuals shrink.
/// History storage is allocated up front, so memory does not grow with the
/// number of iterations. Stopping rule and return value match picard_solve.
template <class Real, class Map>
SolveResult<Real> anderson_solve(Map&& f, const Tensor3<Real>& z0, const SolveConfig& cfg) {
  cfg.validate();
  if (!(cfg.tikhonov_lambda > 0.0)) throw ConfigError("anderson_solve: tikhonov_lambda must be > 0");
  const int m = cfg.history_m;
  const std::size_t n = z0.size();
  TensorCensus::Scope census;

  std::vector<Tensor3<Real>> zs(m, Tensor3<Real>(z0.channels(), z0.rows(), z0.cols()));
  std::vector<Tensor3<Real>> fs(m, Tensor3<Real>(z0.channels(), z0.rows(), z0.cols()));
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m, m);  // <g_i, g_j> between history slots

  SolveResult<Real> res;
  Tensor3<Real> z = z0;
  int filled = 0;
  for (int k = 1; k <= cfg.max_iters; ++k) {
    Tensor3<Real> fz = detail::evaluate_checked(f, z, res.residual_trace, "anderson_solve");
    const double r = relative_residual(z, fz, cfg.denom_floor);
    res.residual_trace.push_back(r);
    res.iters_used = k;
    if (r <= cfg.eps) {
      res.converged = true;
      break;
    }
    const int slot = (k - 1) % m;
    zs[slot] = std::move(z);
    fs[slot] = std::move(fz);
    filled = std::min(filled + 1, m);
    for (int j = 0; j < filled; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double gs = static_cast<double>(fs[slot][i]) - static_cast<double>(zs[slot][i]);
        const double gj = static_cast<double>(fs[j][i]) - static_cast<double>(zs[j][i]);
        acc += gs * gj;
      }
      gram(slot, j) = gram(j, slot) = acc;
    }

    Eigen::MatrixXd H = gram.topLeftCorner(filled, filled);
    const double scale = H.diagonal().mean();
    H.diagonal().array() += cfg.tikhonov_lambda * (scale > 0.0 ? scale : 1.0);
    if (!H.allFinite())
      throw DivergenceError("anderson_solve: residual history overflowed", res.residual_trace,
                            detail::to_double(zs[slot]));
    const Eigen::VectorXd w = H.ldlt().solve(Eigen::VectorXd::Ones(filled));
    const double wsum = w.sum();
    if (!std::isfinite(wsum) || wsum == 0.0) throw NumericError("anderson_solve: degenerate coefficient system");
    const Eigen::VectorXd alpha = w / wsum;

    Tensor3<Real> next(z0.channels(), z0.rows(), z0.cols());
    const double beta = cfg.mixing_beta;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < filled; ++j)
        acc += alpha[j] * ((1.0 - beta) * static_cast<double>(zs[j][i]) + beta * static_cast<double>(fs[j][i]));
      next[i] = static_cast<Real>(acc);
    }
    z = std::move(next);
  }
  res.z_star = std::move(z);
  res.peak_retained = census.peak_above_base();
  return res;
}

/// Equilibrium forward pass: solves z = f(z, x) from z0 = x.
template <class Real>
SolveResult<Real> deq_forward(const Tensor3<Real>& x, const IEBParams<Real>& params, const SolveConfig& cfg,
                              BlockWorkspace<Real>* workspace = nullptr) {
  BlockWorkspace<Real> local;
  BlockWorkspace<Real>& ws = workspace ? *workspace : local;
  return anderson_solve([&](const Tensor3<Real>& z) { return ws.forward(z, x, params); }, x, cfg);
}

template <class Real>
struct DeqGradient {
  IEBParams<Real> grad;
  int adjoint_iters = 0;
  bool adjoint_converged = false;
};

/// Backward settings used when none are given: forward eps and twice its cap.
inline SolveConfig default_backward_config(const SolveConfig& forward_cfg) {
  SolveConfig bw = forward_cfg;
  bw.max_iters = 2 * forward_cfg.max_iters;
  return bw;
}

/// Solves the adjoint fixed point u = vjp(u) + grad_out from u0 = grad_out,
/// where vjp(u) = (df/dz)^T u at the equilibrium.
template <class Real, class Vjp>
SolveResult<Real> adjoint_solve(Vjp&& vjp, const Tensor3<Real>& grad_out, const SolveConfig& cfg) {
  return anderson_solve(
      [&](const Tensor3<Real>& u) {
        Tensor3<Real> v = vjp(u);
        require_same_shape(v, grad_out, "adjoint_solve");
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += grad_out[i];
        return v;
      },
      grad_out, cfg);
}

/// Implicit-function-theorem gradient through the equilibrium: solves the
/// adjoint equation at z_star, then returns (df/dtheta)^T u. Only z_star, x
/// and one block workspace are held; no forward iterates are needed.
template <class Real>
DeqGradient<Real> deq_backward(const Tensor3<Real>& z_star, const Tensor3<Real>& x, const IEBParams<Real>& params,
                               const Tensor3<Real>& grad_out, const SolveConfig& cfg_bw,
                               BlockWorkspace<Real>* workspace = nullptr) {
  require_same_shape(z_star, grad_out, "deq_backward");
  BlockWorkspace<Real> local;
  BlockWorkspace<Real>& ws = workspace ? *workspace : local;
  ws.forward(z_star, x, params);

  DeqGradient<Real> out;
  out.grad = params.zeros_like();
  if (squared_norm(grad_out) == 0.0) {
    out.adjoint_converged = true;
    return out;
  }
  Tensor3<Real> dz;
  auto sol = adjoint_solve(
      [&](const Tensor3<Real>& u) {
        ws.backward(u, &dz, nullptr);
        return dz;
      },
      grad_out, cfg_bw);
  out.adjoint_iters = sol.iters_used;
  out.adjoint_converged = sol.converged;
  ws.backward(sol.z_star, nullptr, &out.grad);
  return out;
}

}  // namespace icenet
