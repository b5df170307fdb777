#pragma once

#include <cmath>
#include <cstdint>

#include "r2f/tensor.hpp"
#include "r2f/util.hpp"

namespace r2f {

// Fixed-point format: value = q * 2^e with q an int8 in [-128, 127] and a
// per-tensor exponent e in [-16, 0]. Rounding is half-away-from-zero.

constexpr int kQMin = -128;
constexpr int kQMax = 127;
constexpr int kExpMin = -16;
constexpr int kExpMax = 0;

inline void check_exponent(int e, const char* what) {
  if (e < kExpMin || e > kExpMax)
    throw ConfigError(std::string(what) + " exponent " + std::to_string(e) +
                      " outside [" + std::to_string(kExpMin) + ", " +
                      std::to_string(kExpMax) + "]");
}

inline int8_t clamp_q(int64_t v) {
  if (v < kQMin) return static_cast<int8_t>(kQMin);
  if (v > kQMax) return static_cast<int8_t>(kQMax);
  return static_cast<int8_t>(v);
}

/// Round half away from zero to the nearest integer, then saturate.
inline int8_t quantize_value(double x, int e) {
  check_exponent(e, "quantize");
  double scaled = x * std::ldexp(1.0, -e);
  double rounded =
      scaled >= 0.0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5);
  if (rounded < kQMin) return static_cast<int8_t>(kQMin);
  if (rounded > kQMax) return static_cast<int8_t>(kQMax);
  return static_cast<int8_t>(rounded);
}

inline double dequantize_value(int8_t q, int e) {
  return static_cast<double>(q) * std::ldexp(1.0, e);
}

/// Right shift with half-away-from-zero rounding; requantizes int32
/// accumulators to int8. shift must be >= 0 (checked by the layer setup).
inline int8_t requantize_acc(int32_t acc, int shift) {
  if (shift == 0) return clamp_q(acc);
  int64_t v = acc;
  int64_t half = int64_t{1} << (shift - 1);
  int64_t rounded = v >= 0 ? (v + half) >> shift : -((-v + half) >> shift);
  return clamp_q(rounded);
}

inline TensorQ quantize_tensor(const TensorF& t, int e) {
  TensorQ out(t.shape);
  for (size_t i = 0; i < t.data.size(); ++i)
    out.data[i] = quantize_value(t.data[i], e);
  return out;
}

inline TensorF dequantize_tensor(const TensorQ& t, int e) {
  TensorF out(t.shape);
  double s = std::ldexp(1.0, e);
  for (size_t i = 0; i < t.data.size(); ++i)
    out.data[i] = static_cast<float>(t.data[i] * s);
  return out;
}

/// Smallest admissible exponent that covers |x| <= max_abs without
/// saturation. Used when quantizing retrained float weights.
inline int fit_exponent(double max_abs) {
  int e = kExpMin;
  while (e < kExpMax && std::ldexp(1.0, e) * kQMax < max_abs) ++e;
  return e;
}

}  // namespace r2f
