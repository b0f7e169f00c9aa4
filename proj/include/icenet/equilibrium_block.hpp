#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "icenet/error.hpp"
#include "icenet/rng.hpp"
#include "icenet/tensor.hpp"

namespace icenet {

enum class NormKind : std::uint32_t { group_norm = 0, weight_scaled = 1 };
enum class InjectionKind : std::uint32_t { additive_projection = 0 };

/// Architecture of the weight-tied block f(z, x).
struct IEBConfig {
  int hidden_width = 32;
  int n_sub_blocks = 4;
  std::vector<int> kernel_sizes{3, 3, 3, 5};
  NormKind norm = NormKind::group_norm;
  int norm_groups = 8;
  InjectionKind injection = InjectionKind::additive_projection;
  std::uint64_t seed = 7;

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("block config: " + m); };
    if (hidden_width < 1) fail("hidden_width must be >= 1");
    if (n_sub_blocks < 1) fail("n_sub_blocks must be >= 1");
    if (static_cast<int>(kernel_sizes.size()) != n_sub_blocks) fail("n_sub_blocks must equal len(kernel_sizes)");
    for (int k : kernel_sizes)
      if (k < 1 || k % 2 == 0) fail("kernel sizes must be odd and >= 1");
    const int last = kernel_sizes.back();
    for (int k : kernel_sizes)
      if (k > last) fail("the last kernel must be the largest");
    if (norm == NormKind::group_norm && (norm_groups < 1 || hidden_width % norm_groups != 0))
      fail("hidden_width must be divisible by norm_groups");
  }

  /// Same-architecture config with a different seed.
  IEBConfig with_seed(std::uint64_t s) const {
    IEBConfig c = *this;
    c.seed = s;
    return c;
  }
};

/// Offsets of every tensor inside the flat parameter vector, in canonical
/// checkpoint order: in.w[H,2] in.b[H] inj.w[H,2], then per stage
/// conv.w[H,H,k,k] conv.b[H] norm.gamma[H] norm.beta[H], then out.w[2,H] out.b[2].
struct ParamLayout {
  struct Stage {
    std::size_t conv_w, conv_b, gamma, beta;
    int kernel;
  };
  std::size_t in_w = 0, in_b = 0, inj_w = 0;
  std::vector<Stage> stages;
  std::size_t out_w = 0, out_b = 0;
  std::size_t total = 0;

  static ParamLayout from(const IEBConfig& cfg) {
    cfg.validate();
    const std::size_t H = static_cast<std::size_t>(cfg.hidden_width);
    ParamLayout L;
    std::size_t off = 0;
    auto take = [&](std::size_t n) {
      const std::size_t at = off;
      off += n;
      return at;
    };
    L.in_w = take(H * 2);
    L.in_b = take(H);
    L.inj_w = take(H * 2);
    for (int k : cfg.kernel_sizes) {
      Stage s;
      s.kernel = k;
      s.conv_w = take(H * H * static_cast<std::size_t>(k * k));
      s.conv_b = take(H);
      s.gamma = take(H);
      s.beta = take(H);
      L.stages.push_back(s);
    }
    L.out_w = take(2 * H);
    L.out_b = take(2);
    L.total = off;
    return L;
  }
};

/// Trainable parameters of one block, viewed as a flat vector. Gradients use
/// the same type and layout.
template <class Real>
struct IEBParams {
  IEBConfig config;
  ParamLayout layout;
  AlignedVector<Real> flat;

  IEBParams() = default;
  explicit IEBParams(const IEBConfig& cfg) : config(cfg), layout(ParamLayout::from(cfg)), flat(layout.total, Real(0)) {}

  std::size_t size() const { return flat.size(); }

  using Mat = Eigen::Map<RowMatrix<Real>>;
  using CMat = Eigen::Map<const RowMatrix<Real>>;
  using Vec = Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, 1>>;
  using CVec = Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, 1>>;

  Mat mat(std::size_t off, int r, int c) { return Mat(flat.data() + off, r, c); }
  CMat mat(std::size_t off, int r, int c) const { return CMat(flat.data() + off, r, c); }
  Vec vec(std::size_t off, int n) { return Vec(flat.data() + off, n); }
  CVec vec(std::size_t off, int n) const { return CVec(flat.data() + off, n); }

  IEBParams zeros_like() const {
    IEBParams g = *this;
    std::fill(g.flat.begin(), g.flat.end(), Real(0));
    return g;
  }

  template <class Other>
  IEBParams<Other> cast() const {
    IEBParams<Other> o(config);
    std::transform(flat.begin(), flat.end(), o.flat.begin(), [](Real v) { return static_cast<Other>(v); });
    return o;
  }

  bool all_finite() const {
    return std::all_of(flat.begin(), flat.end(), [](Real v) { return std::isfinite(v); });
  }

  friend bool operator==(const IEBParams& a, const IEBParams& b) { return a.flat == b.flat; }
};

/// Total trainable scalars for an architecture; independent of any solver setting.
inline std::size_t param_count(const IEBConfig& cfg) { return ParamLayout::from(cfg).total; }

template <class Real>
std::size_t param_count(const IEBParams<Real>& p) {
  return p.flat.size();
}

/// Seeded fan-in scaled initialisation. Norm gains start at 1 and biases at
/// 0; the readout is additionally scaled by 0.1 so the map starts close to a
/// contraction in z.
template <class Real>
IEBParams<Real> init_params(const IEBConfig& cfg) {
  IEBParams<Real> p(cfg);
  Rng rng(mix_seed(cfg.seed, 0x1ebULL));
  const int H = cfg.hidden_width;
  auto fill_normal = [&](std::size_t off, std::size_t n, double stddev) {
    for (std::size_t i = 0; i < n; ++i) p.flat[off + i] = static_cast<Real>(stddev * rng.normal());
  };
  fill_normal(p.layout.in_w, 2 * H, std::sqrt(1.0 / 4.0));
  fill_normal(p.layout.inj_w, 2 * H, std::sqrt(1.0 / 4.0));
  for (const auto& s : p.layout.stages) {
    const double fan_in = static_cast<double>(H) * s.kernel * s.kernel;
    fill_normal(s.conv_w, static_cast<std::size_t>(H) * H * s.kernel * s.kernel, std::sqrt(2.0 / fan_in));
    for (int c = 0; c < H; ++c) p.flat[s.gamma + c] = Real(1);
  }
  fill_normal(p.layout.out_w, 2 * H, 0.1 * std::sqrt(2.0 / H));
  return p;
}

namespace detail {

inline constexpr double kNormFloor = 1e-5;

// [C, H*W] -> [C*k*k, H*W] patches with zero "same" padding.
template <class Real>
void im2col(const Real* in, int C, int H, int W, int k, Real* col) {
  const int pad = k / 2;
  const int P = H * W;
  for (int c = 0; c < C; ++c) {
    const Real* src = in + static_cast<std::size_t>(c) * P;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        Real* dst = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * P;
        const int dy = ky - pad, dx = kx - pad;
        for (int y = 0; y < H; ++y) {
          const int sy = y + dy;
          Real* row = dst + static_cast<std::size_t>(y) * W;
          if (sy < 0 || sy >= H) {
            std::fill(row, row + W, Real(0));
            continue;
          }
          const Real* srow = src + static_cast<std::size_t>(sy) * W;
          for (int x = 0; x < W; ++x) {
            const int sx = x + dx;
            row[x] = (sx >= 0 && sx < W) ? srow[sx] : Real(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add patches back to [C, H*W].
template <class Real>
void col2im(const Real* col, int C, int H, int W, int k, Real* out) {
  const int pad = k / 2;
  const int P = H * W;
  std::fill(out, out + static_cast<std::size_t>(C) * P, Real(0));
  for (int c = 0; c < C; ++c) {
    Real* dst = out + static_cast<std::size_t>(c) * P;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Real* src = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * P;
        const int dy = ky - pad, dx = kx - pad;
        for (int y = 0; y < H; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= H) continue;
          const Real* row = src + static_cast<std::size_t>(y) * W;
          Real* drow = dst + static_cast<std::size_t>(sy) * W;
          for (int x = 0; x < W; ++x) {
            const int sx = x + dx;
            if (sx >= 0 && sx < W) drow[sx] += row[x];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Cache for one application of the block: everything the VJPs need, and
/// nothing from earlier applications. Reused across calls to avoid reallocation.
template <class Real>
class BlockWorkspace {
 public:
  using Matrix = RowMatrix<Real>;

  /// Evaluates f(z, x) and caches the intermediates. The returned reference
  /// stays valid until the next call.
  const Tensor3<Real>& forward(const Tensor3<Real>& z, const Tensor3<Real>& x, const IEBParams<Real>& p) {
    require_same_shape(z, x, "block forward");
    if (z.channels() != 2) throw ShapeError("block forward: expected 2 channels, got " + z.shape_string());
    if (!z.all_finite() || !x.all_finite()) throw NumericError("block forward: non-finite input");
    params_ = &p;
    const auto& cfg = p.config;
    const int Hc = cfg.hidden_width;
    rows_ = z.rows();
    cols_ = z.cols();
    const int P = rows_ * cols_;
    const int n = static_cast<int>(p.layout.stages.size());
    z_ = z;
    x_ = x;
    h_.resize(n + 1);
    col_.resize(n);
    xhat_.resize(n);
    rstd_.resize(n);

    h_[0].resize(Hc, P);
    h_[0].noalias() = p.mat(p.layout.in_w, Hc, 2) * z.matrix();
    h_[0].noalias() += p.mat(p.layout.inj_w, Hc, 2) * x.matrix();
    h_[0].colwise() += p.vec(p.layout.in_b, Hc);

    for (int i = 0; i < n; ++i) {
      const auto& st = p.layout.stages[i];
      const int k = st.kernel;
      const int kk = Hc * k * k;
      col_[i].resize(kk, P);
      detail::im2col(h_[i].data(), Hc, rows_, cols_, k, col_[i].data());
      Matrix& a = xhat_[i];
      a.resize(Hc, P);
      a.noalias() = p.mat(st.conv_w, Hc, kk) * col_[i];
      a.colwise() += p.vec(st.conv_b, Hc);
      normalize(a, rstd_[i], cfg);
      h_[i + 1].resize(Hc, P);
      const auto gamma = p.vec(st.gamma, Hc);
      const auto beta = p.vec(st.beta, Hc);
      for (int c = 0; c < Hc; ++c) {
        const Real g = gamma[c], b = beta[c];
        const Real* src = a.row(c).data();
        Real* dst = h_[i + 1].row(c).data();
        for (int j = 0; j < P; ++j) dst[j] = std::max(Real(0), g * src[j] + b);
      }
    }
    out_ = Tensor3<Real>(2, rows_, cols_);
    out_.matrix().noalias() = p.mat(p.layout.out_w, 2, Hc) * h_[n];
    out_.matrix().colwise() += p.vec(p.layout.out_b, 2);
    return out_;
  }

  const Tensor3<Real>& output() const { return out_; }

  /// Reverse pass for upstream gradient u. Writes u^T df/dz into dz (if
  /// given), u^T df/dx into dx (if given), and accumulates u^T df/dtheta into
  /// dtheta (if given).
  void backward(const Tensor3<Real>& u, Tensor3<Real>* dz, IEBParams<Real>* dtheta, Tensor3<Real>* dx = nullptr) {
    if (!params_) throw Error("block backward called before forward");
    if (u.channels() != 2 || u.rows() != rows_ || u.cols() != cols_)
      throw ShapeError("block backward: upstream gradient shape " + u.shape_string());
    const auto& p = *params_;
    const auto& cfg = p.config;
    const int Hc = cfg.hidden_width;
    const int P = rows_ * cols_;
    const int n = static_cast<int>(p.layout.stages.size());

    if (dtheta) {
      dtheta->mat(p.layout.out_w, 2, Hc).noalias() += u.matrix() * h_[n].transpose();
      dtheta->vec(p.layout.out_b, 2) += u.matrix().rowwise().sum();
    }
    dh_.resize(Hc, P);
    dh_.noalias() = p.mat(p.layout.out_w, 2, Hc).transpose() * u.matrix();

    for (int i = n - 1; i >= 0; --i) {
      const auto& st = p.layout.stages[i];
      const int k = st.kernel;
      const int kk = Hc * k * k;
      const auto gamma = p.vec(st.gamma, Hc);
      // Through the rectifier: active where the output is positive.
      for (int c = 0; c < Hc; ++c) {
        const Real* hv = h_[i + 1].row(c).data();
        Real* d = dh_.row(c).data();
        for (int j = 0; j < P; ++j)
          if (!(hv[j] > Real(0))) d[j] = Real(0);
      }
      if (dtheta) {
        auto dg = dtheta->vec(st.gamma, Hc);
        auto db = dtheta->vec(st.beta, Hc);
        for (int c = 0; c < Hc; ++c) {
          dg[c] += (dh_.row(c).array() * xhat_[i].row(c).array()).sum();
          db[c] += dh_.row(c).sum();
        }
      }
      for (int c = 0; c < Hc; ++c) dh_.row(c) *= gamma[c];
      normalize_backward(dh_, xhat_[i], rstd_[i], cfg);
      if (dtheta) {
        dtheta->mat(st.conv_w, Hc, kk).noalias() += dh_ * col_[i].transpose();
        dtheta->vec(st.conv_b, Hc) += dh_.rowwise().sum();
      }
      dcol_.resize(kk, P);
      dcol_.noalias() = p.mat(st.conv_w, Hc, kk).transpose() * dh_;
      next_.resize(Hc, P);
      detail::col2im(dcol_.data(), Hc, rows_, cols_, k, next_.data());
      dh_.swap(next_);
    }
    if (dtheta) {
      dtheta->mat(p.layout.in_w, Hc, 2).noalias() += dh_ * z_.matrix().transpose();
      dtheta->vec(p.layout.in_b, Hc) += dh_.rowwise().sum();
      dtheta->mat(p.layout.inj_w, Hc, 2).noalias() += dh_ * x_.matrix().transpose();
    }
    if (dz) {
      *dz = Tensor3<Real>(2, rows_, cols_);
      dz->matrix().noalias() = p.mat(p.layout.in_w, Hc, 2).transpose() * dh_;
    }
    if (dx) {
      *dx = Tensor3<Real>(2, rows_, cols_);
      dx->matrix().noalias() = p.mat(p.layout.inj_w, Hc, 2).transpose() * dh_;
    }
  }

  /// Number of tensors held in this workspace (scratch for the reverse pass included).
  std::size_t retained_tensors() const {
    return 3 /* z, x, out */ + h_.size() + col_.size() + xhat_.size() + 3 /* dh, dcol, next */;
  }

 private:
  // In-place normalisation of pre-activations a -> xhat, recording 1/std per group.
  static void normalize(Matrix& a, std::vector<Real>& rstd, const IEBConfig& cfg) {
    if (cfg.norm == NormKind::weight_scaled) {
      rstd.clear();
      return;
    }
    const int G = cfg.norm_groups;
    const int cpg = cfg.hidden_width / G;
    const double m = static_cast<double>(cpg) * a.cols();
    rstd.assign(G, Real(0));
    for (int g = 0; g < G; ++g) {
      auto blk = a.middleRows(g * cpg, cpg);
      double mean = 0.0;
      for (int c = 0; c < cpg; ++c) mean += blk.row(c).template cast<double>().sum();
      mean /= m;
      double var = 0.0;
      for (int c = 0; c < cpg; ++c) var += (blk.row(c).template cast<double>().array() - mean).square().sum();
      var = std::max(0.0, var / m);
      const double r = 1.0 / std::sqrt(var + detail::kNormFloor);
      rstd[g] = static_cast<Real>(r);
      blk.array() = (blk.array() - static_cast<Real>(mean)) * static_cast<Real>(r);
    }
  }

  // d(xhat) -> d(a), in place.
  static void normalize_backward(Matrix& d, const Matrix& xhat, const std::vector<Real>& rstd, const IEBConfig& cfg) {
    if (cfg.norm == NormKind::weight_scaled) return;
    const int G = cfg.norm_groups;
    const int cpg = cfg.hidden_width / G;
    const double m = static_cast<double>(cpg) * d.cols();
    for (int g = 0; g < G; ++g) {
      auto db = d.middleRows(g * cpg, cpg);
      const auto xb = xhat.middleRows(g * cpg, cpg);
      double sum_d = 0.0, sum_dx = 0.0;
      for (int c = 0; c < cpg; ++c) {
        sum_d += db.row(c).template cast<double>().sum();
        sum_dx += (db.row(c).template cast<double>().array() * xb.row(c).template cast<double>().array()).sum();
      }
      const Real mean_d = static_cast<Real>(sum_d / m);
      const Real mean_dx = static_cast<Real>(sum_dx / m);
      db.array() = rstd[g] * (db.array() - mean_d - xb.array() * mean_dx);
    }
  }

  const IEBParams<Real>* params_ = nullptr;
  int rows_ = 0, cols_ = 0;
  Tensor3<Real> z_, x_, out_;
  std::vector<Matrix> h_, col_, xhat_;
  std::vector<std::vector<Real>> rstd_;
  Matrix dh_, dcol_, next_;
};

/// f(z, x): h0 = W_in z + b_in + W_inj x; h_{i+1} = relu(norm(conv_i(h_i)));
/// output = W_out h_n + b_out. Shape preserving; no skip from z to the output.
template <class Real>
Tensor3<Real> forward(const Tensor3<Real>& z, const Tensor3<Real>& x, const IEBParams<Real>& params) {
  BlockWorkspace<Real> ws;
  return ws.forward(z, x, params);
}

/// u^T df/dz at (z, x).
template <class Real>
Tensor3<Real> vjp_z(const Tensor3<Real>& z, const Tensor3<Real>& x, const IEBParams<Real>& params,
                    const Tensor3<Real>& u) {
  BlockWorkspace<Real> ws;
  ws.forward(z, x, params);
  Tensor3<Real> dz;
  ws.backward(u, &dz, nullptr);
  return dz;
}

/// u^T df/dtheta at (z, x), shaped like the parameters.
template <class Real>
IEBParams<Real> vjp_theta(const Tensor3<Real>& z, const Tensor3<Real>& x, const IEBParams<Real>& params,
                          const Tensor3<Real>& u) {
  BlockWorkspace<Real> ws;
  ws.forward(z, x, params);
  IEBParams<Real> g = params.zeros_like();
  ws.backward(u, nullptr, &g);
  return g;
}

}  // namespace icenet
