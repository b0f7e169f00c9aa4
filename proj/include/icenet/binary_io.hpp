#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "icenet/error.hpp"

namespace icenet::io {

/// Little-endian byte sink.
class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  void zeros(std::size_t n) { buf_.insert(buf_.end(), n, '\0'); }

  const std::vector<char>& buffer() const { return buf_; }

  void write_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ResolutionError(path);
    os.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!os) throw Error("write failed: " + path);
  }

 private:
  std::vector<char> buf_;
};

/// Little-endian byte source with offset-carrying errors.
class Reader {
 public:
  explicit Reader(std::vector<char> buf) : buf_(std::move(buf)) {}

  static Reader from_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ResolutionError(path);
    std::vector<char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return Reader(std::move(buf));
  }

  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string tag(std::size_t n) {
    need(n, "tag");
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void skip(std::size_t n) {
    need(n, "reserved block");
    pos_ += n;
  }

  std::size_t offset() const { return pos_; }
  std::size_t size() const { return buf_.size(); }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (pos_ + n > buf_.size()) throw FormatError(std::string("truncated input reading ") + what, pos_);
  }

  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace icenet::io
