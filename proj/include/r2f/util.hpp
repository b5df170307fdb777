#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace r2f {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor/layer shape violations (always name the offending dimensions).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed serialized data (model files, packets, wire frames).
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// Protocol state machine or transport violations.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration files or values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

using Bytes = std::vector<uint8_t>;
using ByteSpan = std::span<const uint8_t>;

// ---------------------------------------------------------------------------
// Little-endian byte IO. All multi-byte integers on disk and on the wire are
// little-endian regardless of host order.
// ---------------------------------------------------------------------------

class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void i8(int8_t v) { buf_.push_back(static_cast<uint8_t>(v)); }
  void u16(uint16_t v) { le(v); }
  void u32(uint32_t v) { le(v); }
  void u64(uint64_t v) { le(v); }
  void i16(int16_t v) { le(static_cast<uint16_t>(v)); }
  void i32(int32_t v) { le(static_cast<uint32_t>(v)); }

  /// Unsigned LEB128.
  void varint(uint64_t v) {
    while (v >= 0x80) {
      buf_.push_back(static_cast<uint8_t>(v) | 0x80);
      v >>= 7;
    }
    buf_.push_back(static_cast<uint8_t>(v));
  }

  void bytes(ByteSpan s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void bytes(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void str(const std::string& s) { bytes(s.data(), s.size()); }

  const Bytes& data() const { return buf_; }
  Bytes take() { return std::move(buf_); }
  size_t size() const { return buf_.size(); }

 private:
  template <typename T>
  void le(T v) {
    for (size_t i = 0; i < sizeof(T); ++i)
      buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  Bytes buf_;
};

/// Cursor over a byte span. Every read is bounds-checked and throws
/// DecodeError on overrun, so decoders are total.
class ByteReader {
 public:
  explicit ByteReader(ByteSpan s) : s_(s) {}

  uint8_t u8() { return take(1)[0]; }
  int8_t i8() { return static_cast<int8_t>(u8()); }
  uint16_t u16() { return le<uint16_t>(); }
  uint32_t u32() { return le<uint32_t>(); }
  uint64_t u64() { return le<uint64_t>(); }
  int16_t i16() { return static_cast<int16_t>(le<uint16_t>()); }
  int32_t i32() { return static_cast<int32_t>(le<uint32_t>()); }

  uint64_t varint() {
    uint64_t v = 0;
    int shift = 0;
    for (int i = 0; i < 10; ++i) {
      uint8_t b = u8();
      v |= static_cast<uint64_t>(b & 0x7F) << shift;
      if (!(b & 0x80)) return v;
      shift += 7;
    }
    throw DecodeError("varint longer than 10 bytes");
  }

  ByteSpan raw(size_t n) { return take(n); }

  size_t remaining() const { return s_.size() - pos_; }
  size_t position() const { return pos_; }
  bool done() const { return pos_ == s_.size(); }

  void expect_done(const char* what) const {
    if (!done())
      throw DecodeError(std::string(what) + ": " +
                        std::to_string(remaining()) + " trailing bytes");
  }

 private:
  ByteSpan take(size_t n) {
    if (pos_ + n > s_.size())
      throw DecodeError("truncated payload: need " + std::to_string(n) +
                        " bytes at offset " + std::to_string(pos_) +
                        ", have " + std::to_string(s_.size() - pos_));
    ByteSpan r = s_.subspan(pos_, n);
    pos_ += n;
    return r;
  }
  template <typename T>
  T le() {
    ByteSpan b = take(sizeof(T));
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<uint64_t>(b[i]) << (8 * i));
    return v;
  }
  ByteSpan s_;
  size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Small statistics helpers used by tests and the harness.
// ---------------------------------------------------------------------------

Bytes read_file(const std::string& path);
void write_file(const std::string& path, ByteSpan data);

double mean(std::span<const double> xs);
/// Sample standard deviation (n-1 denominator); 0 for n < 2.
double stddev(std::span<const double> xs);

/// One-sided paired t-test p-value for H1: mean(a - b) > 0.
/// Uses the Student t distribution via the regularized incomplete beta.
double paired_t_pvalue(std::span<const double> a, std::span<const double> b);

/// Two-sample Kolmogorov-Smirnov statistic (samples are sorted internally).
double ks_statistic(std::vector<double> a, std::vector<double> b);

}  // namespace r2f
