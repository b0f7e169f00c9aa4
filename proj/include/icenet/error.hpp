#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace icenet {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value violates a stated bound.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An argument is outside the accepted range (e.g. a lag or window length).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a singular system.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A required file or checkpoint could not be found.
class ResolutionError : public Error {
 public:
  explicit ResolutionError(const std::string& path)
      : Error("missing artifact: " + path), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Malformed on-disk data. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// A fixed-point iteration produced a non-finite iterate.
///
/// The residual trace up to the failure and the last finite iterate are kept
/// so that a training loop can fall back to it.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<double> trace, std::vector<double> last_finite)
      : Error(what), trace_(std::move(trace)), last_finite_(std::move(last_finite)) {}
  const std::vector<double>& trace() const noexcept { return trace_; }
  const std::vector<double>& last_finite() const noexcept { return last_finite_; }

 private:
  std::vector<double> trace_;
  std::vector<double> last_finite_;
};

}  // namespace icenet
