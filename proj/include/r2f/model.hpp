#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "r2f/quant.hpp"
#include "r2f/tensor.hpp"
#include "r2f/util.hpp"

namespace r2f {

enum class LayerKind : uint8_t {
  Conv2D = 1,
  FullyConnected = 2,
  ReLU = 3,
  MaxPool = 4,
  AvgPool = 5,
  ResidualAdd = 6,
  Flatten = 7,
  SoftmaxLoss = 8,
};

const char* layer_kind_name(LayerKind k);

/// One layer of a quantized model. f[] holds kind-specific u16 fields:
///   Conv2D:         f0=in_c f1=out_c f2=kernel f3=stride f4=pad
///   FullyConnected: f0=in_features f1=out_features
///   MaxPool/AvgPool: f0=window f1=stride (0 means stride=window)
///   ResidualAdd:    f0=index of the earlier layer whose output is added
/// Derived fields are filled in by QuantModel::finalize().
struct LayerDesc {
  LayerKind kind = LayerKind::ReLU;
  uint16_t f[6] = {0, 0, 0, 0, 0, 0};
  int8_t w_e = 0;   // weight scale exponent (weighted kinds only)
  int8_t out_e = 0; // output activation scale exponent
  std::vector<int8_t> weights;  // Conv2D: OIHW; FC: [out][in]
  std::vector<int32_t> biases;  // accumulator scale 2^(in_e + w_e)

  // Derived (not serialized).
  Shape in_shape, out_shape;  // per batch item (n = 1)
  int8_t in_e = 0;
  int shift = 0;              // requantization right shift, >= 0
  uint64_t mac_count = 0;     // analytic MACs; 0 for unweighted kinds
  uint64_t op_count = 0;      // cost proxy: MACs, or output elements

  bool weighted() const {
    return kind == LayerKind::Conv2D || kind == LayerKind::FullyConnected;
  }
  uint16_t stride_or(uint16_t dflt) const { return f[3] ? f[3] : dflt; }
  uint16_t pool_stride() const { return f[1] ? f[1] : f[0]; }
};

/// Quantized CNN: the unit deployed to the device and rebuilt from retrained
/// float weights. finalize() must run before any forward pass.
struct QuantModel {
  uint16_t in_c = 1, in_h = 28, in_w = 28;
  int8_t in_e = -7;
  std::vector<LayerDesc> layers;

  /// Propagates shapes and scale exponents through the stack and validates
  /// composition. Throws ShapeError/ConfigError naming the offending layer.
  void finalize();

  Shape input_shape(int batch = 1) const {
    return Shape{batch, in_c, in_h, in_w};
  }
  int layer_count() const { return static_cast<int>(layers.size()); }
  uint64_t total_macs() const;
  uint64_t activation_elems() const;  // sum of per-layer output elements

  Bytes serialize() const;
  static QuantModel deserialize(ByteSpan bytes);
};

/// Float master copy held by the server. Mirrors the quantized topology; the
/// arch member keeps layer descriptors and exponents for re-quantization.
struct FloatModel {
  QuantModel arch;
  std::vector<std::vector<double>> w, b;
};

FloatModel to_float(const QuantModel& m);
/// Re-quantizes with the exponents recorded in arch (fixed-scale scheme, so
/// repeated retrain/deploy cycles stay bit-stable when weights do not move).
QuantModel to_quant(const FloatModel& m);

}  // namespace r2f
