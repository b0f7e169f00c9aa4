#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "icenet/error.hpp"

namespace icenet {

template <class Real>
using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Real>
using AlignedVector = std::vector<Real, Eigen::aligned_allocator<Real>>;

/// Per-thread count of live tensors that own storage. Used to check memory
/// contracts structurally (e.g. solver state does not grow with iterations).
class TensorCensus {
 public:
  static std::size_t live() noexcept { return live_; }
  static std::size_t peak() noexcept { return peak_; }

  /// Measures the peak number of tensors allocated on top of those alive at
  /// construction; restores the enclosing peak on destruction.
  class Scope {
   public:
    Scope() noexcept : base_(live_), outer_peak_(peak_) { peak_ = live_; }
    ~Scope() { peak_ = std::max(outer_peak_, peak_); }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;
    std::size_t peak_above_base() const noexcept { return peak_ - base_; }

   private:
    std::size_t base_, outer_peak_;
  };

 private:
  template <class>
  friend class Tensor3;
  static void acquire() noexcept {
    if (++live_ > peak_) peak_ = live_;
  }
  static void release() noexcept { --live_; }
  static inline thread_local std::size_t live_ = 0;
  static inline thread_local std::size_t peak_ = 0;
};

/// Dense 3-D tensor laid out row-major as [channel, row, column].
///
/// For grids the rows are subcarriers and the columns are OFDM symbols, so a
/// channel estimate is a Tensor3 of shape [2, n_subcarriers, n_symbols] with
/// the real part in channel 0 and the imaginary part in channel 1.
template <class Real>
class Tensor3 {
 public:
  using value_type = Real;
  using MatrixMap = Eigen::Map<RowMatrix<Real>, Eigen::Aligned16>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix<Real>, Eigen::Aligned16>;

  Tensor3() = default;
  Tensor3(int channels, int rows, int cols, Real fill = Real(0))
      : channels_(channels), rows_(rows), cols_(cols) {
    if (channels < 0 || rows < 0 || cols < 0) throw ShapeError("negative tensor extent");
    data_.assign(static_cast<std::size_t>(channels) * rows * cols, fill);
    sync_census();
  }
  Tensor3(const Tensor3& o) : channels_(o.channels_), rows_(o.rows_), cols_(o.cols_), data_(o.data_) { sync_census(); }
  Tensor3(Tensor3&& o) noexcept
      : channels_(o.channels_), rows_(o.rows_), cols_(o.cols_), data_(std::move(o.data_)), counted_(o.counted_) {
    o.counted_ = false;
    o.data_.clear();
  }
  Tensor3& operator=(const Tensor3& o) {
    if (this != &o) {
      channels_ = o.channels_;
      rows_ = o.rows_;
      cols_ = o.cols_;
      data_ = o.data_;
      sync_census();
    }
    return *this;
  }
  Tensor3& operator=(Tensor3&& o) noexcept {
    if (this != &o) {
      if (counted_) TensorCensus::release();
      channels_ = o.channels_;
      rows_ = o.rows_;
      cols_ = o.cols_;
      data_ = std::move(o.data_);
      counted_ = o.counted_;
      o.counted_ = false;
      o.data_.clear();
    }
    return *this;
  }
  ~Tensor3() {
    if (counted_) TensorCensus::release();
  }

  int channels() const noexcept { return channels_; }
  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  int plane_size() const noexcept { return rows_ * cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  Real* data() noexcept { return data_.data(); }
  const Real* data() const noexcept { return data_.data(); }
  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  Real& operator()(int c, int r, int k) noexcept { return data_[index(c, r, k)]; }
  Real operator()(int c, int r, int k) const noexcept { return data_[index(c, r, k)]; }
  Real& operator[](std::size_t i) noexcept { return data_[i]; }
  Real operator[](std::size_t i) const noexcept { return data_[i]; }

  /// View as a [channels, rows*cols] matrix.
  MatrixMap matrix() noexcept { return MatrixMap(data_.data(), channels_, plane_size()); }
  ConstMatrixMap matrix() const noexcept { return ConstMatrixMap(data_.data(), channels_, plane_size()); }

  bool same_shape(const Tensor3& o) const noexcept {
    return channels_ == o.channels_ && rows_ == o.rows_ && cols_ == o.cols_;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
  }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  std::string shape_string() const {
    return "[" + std::to_string(channels_) + "," + std::to_string(rows_) + "," + std::to_string(cols_) + "]";
  }

  template <class Other>
  Tensor3<Other> cast() const {
    Tensor3<Other> out(channels_, rows_, cols_);
    std::transform(data_.begin(), data_.end(), out.begin(), [](Real v) { return static_cast<Other>(v); });
    return out;
  }

  friend bool operator==(const Tensor3& a, const Tensor3& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  std::size_t index(int c, int r, int k) const noexcept {
    return (static_cast<std::size_t>(c) * rows_ + r) * cols_ + k;
  }

  void sync_census() noexcept {
    const bool owns = !data_.empty();
    if (owns && !counted_) TensorCensus::acquire();
    if (!owns && counted_) TensorCensus::release();
    counted_ = owns;
  }

  int channels_ = 0;
  int rows_ = 0;
  int cols_ = 0;
  AlignedVector<Real> data_;
  bool counted_ = false;
};

template <class Real>
void require_same_shape(const Tensor3<Real>& a, const Tensor3<Real>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape " + a.shape_string() + " vs " + b.shape_string());
  }
}

template <class Real>
double squared_norm(const Tensor3<Real>& t) {
  double s = 0.0;
  for (Real v : t) s += static_cast<double>(v) * static_cast<double>(v);
  return s;
}

template <class Real>
double dot(const Tensor3<Real>& a, const Tensor3<Real>& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

}  // namespace icenet
