#pragma once

#include <cstdint>
#include <memory>

#include "r2f/tensor.hpp"
#include "r2f/tmr.hpp"
#include "r2f/util.hpp"

namespace r2f {

/// Exact elementwise difference of two q8 tensors; range [-255, 255].
using IncrementTensor = TensorT<int16_t>;

enum class Encoding : uint8_t { Raw = 0, Sparse = 1 };

/// One layer's uplink unit. Wire layout (all little-endian):
///   layer_id u16 | encoding u8 | payload_len u64 | payload
struct IncrementPacket {
  uint16_t layer_id = 0;
  Encoding encoding = Encoding::Raw;
  Bytes payload;
};

constexpr size_t kPacketHeaderBytes = 2 + 1 + 8;

IncrementTensor compute_increment(const TensorQ& actual,
                                  const TensorQ& reference);

/// Sparse increment encoding: nonzero count u32 LE, then per nonzero in flat
/// index order an unsigned LEB128 index gap (first gap = index itself,
/// later gaps = index - previous index) followed by the int16 LE value.
Bytes encode_sparse(const IncrementTensor& inc);
IncrementTensor decode_sparse(ByteSpan payload, Shape shape);

Bytes encode_raw(const TensorQ& t);
TensorQ decode_raw(ByteSpan payload, Shape shape);

/// Saturating add of an increment onto a reference. Exact (no saturation
/// engaged) whenever inc was computed against this same reference.
TensorQ reconstruct(const TensorQ& reference, const IncrementTensor& inc);

/// Sparse when the layer's similarity clears the threshold AND the sparse
/// bytes are strictly smaller than raw; Raw otherwise, so compression never
/// inflates the uplink.
IncrementPacket choose_encoding(const TmrCapture& capture, uint16_t layer_id,
                                double threshold);

Bytes encode_packet(const IncrementPacket& p);
IncrementPacket decode_packet(ByteReader& r);

/// Optional second-stage lossless byte compressor applied to encoded
/// payloads; the default is the identity.
struct ByteCodec {
  virtual ~ByteCodec() = default;
  virtual Bytes compress(ByteSpan in) const {
    return Bytes(in.begin(), in.end());
  }
  virtual Bytes decompress(ByteSpan in) const {
    return Bytes(in.begin(), in.end());
  }
};

}  // namespace r2f
