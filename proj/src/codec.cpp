#include "r2f/codec.hpp"

namespace r2f {

IncrementTensor compute_increment(const TensorQ& actual,
                                  const TensorQ& reference) {
  if (!(actual.shape == reference.shape))
    throw ShapeError("increment shapes " + actual.shape.str() + " vs " +
                     reference.shape.str());
  IncrementTensor inc(actual.shape);
  for (size_t i = 0; i < actual.data.size(); ++i)
    inc.data[i] =
        static_cast<int16_t>(int(actual.data[i]) - int(reference.data[i]));
  return inc;
}

Bytes encode_sparse(const IncrementTensor& inc) {
  ByteWriter w;
  uint32_t nz = 0;
  for (int16_t v : inc.data) nz += v != 0;
  w.u32(nz);
  uint64_t prev = 0;
  bool first = true;
  for (size_t i = 0; i < inc.data.size(); ++i) {
    if (inc.data[i] == 0) continue;
    w.varint(first ? i : i - prev);
    w.i16(inc.data[i]);
    prev = i;
    first = false;
  }
  return w.take();
}

IncrementTensor decode_sparse(ByteSpan payload, Shape shape) {
  ByteReader r(payload);
  IncrementTensor inc(shape);
  const uint64_t elems = shape.size();
  uint32_t nz = r.u32();
  if (nz > elems)
    throw DecodeError("sparse increment declares " + std::to_string(nz) +
                      " nonzeros for " + std::to_string(elems) + " elements");
  uint64_t idx = 0;
  for (uint32_t k = 0; k < nz; ++k) {
    uint64_t gap = r.varint();
    if (k > 0 && gap == 0)
      throw DecodeError("sparse increment: non-monotone index gap");
    idx = k == 0 ? gap : idx + gap;
    if (idx >= elems)
      throw DecodeError("sparse increment: index " + std::to_string(idx) +
                        " past element count " + std::to_string(elems));
    int16_t v = r.i16();
    if (v == 0) throw DecodeError("sparse increment: explicit zero entry");
    if (v < -255 || v > 255)
      throw DecodeError("sparse increment: value " + std::to_string(v) +
                        " outside [-255, 255]");
    inc.data[idx] = v;
  }
  r.expect_done("sparse increment");
  return inc;
}

Bytes encode_raw(const TensorQ& t) {
  Bytes out(t.data.size());
  for (size_t i = 0; i < t.data.size(); ++i)
    out[i] = static_cast<uint8_t>(t.data[i]);
  return out;
}

TensorQ decode_raw(ByteSpan payload, Shape shape) {
  if (payload.size() != shape.size())
    throw DecodeError("raw payload " + std::to_string(payload.size()) +
                      " bytes, shape " + shape.str() + " needs " +
                      std::to_string(shape.size()));
  TensorQ t(shape);
  for (size_t i = 0; i < payload.size(); ++i)
    t.data[i] = static_cast<int8_t>(payload[i]);
  return t;
}

TensorQ reconstruct(const TensorQ& reference, const IncrementTensor& inc) {
  if (!(reference.shape == inc.shape))
    throw ShapeError("reconstruct shapes " + reference.shape.str() + " vs " +
                     inc.shape.str());
  TensorQ out(reference.shape);
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = clamp_q(int(reference.data[i]) + int(inc.data[i]));
  return out;
}

IncrementPacket choose_encoding(const TmrCapture& capture, uint16_t layer_id,
                                double threshold) {
  if (layer_id >= capture.layers.size())
    throw ShapeError("layer_id " + std::to_string(layer_id) +
                     " outside capture of " +
                     std::to_string(capture.layers.size()) + " layers");
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw ConfigError("similarity threshold " + std::to_string(threshold) +
                      " outside [0,1]");
  const TmrLayer& tl = capture.layers[layer_id];
  IncrementPacket p;
  p.layer_id = layer_id;
  if (tl.similarity >= threshold) {
    Bytes sparse = encode_sparse(compute_increment(tl.copy0, tl.voted));
    if (sparse.size() < tl.copy0.size()) {
      p.encoding = Encoding::Sparse;
      p.payload = std::move(sparse);
      return p;
    }
  }
  p.encoding = Encoding::Raw;
  p.payload = encode_raw(tl.copy0);
  return p;
}

Bytes encode_packet(const IncrementPacket& p) {
  ByteWriter w;
  w.u16(p.layer_id);
  w.u8(static_cast<uint8_t>(p.encoding));
  w.u64(p.payload.size());
  w.bytes(p.payload);
  return w.take();
}

IncrementPacket decode_packet(ByteReader& r) {
  IncrementPacket p;
  p.layer_id = r.u16();
  uint8_t enc = r.u8();
  if (enc > 1)
    throw DecodeError("packet encoding flag " + std::to_string(enc));
  p.encoding = static_cast<Encoding>(enc);
  uint64_t len = r.u64();
  if (len > r.remaining())
    throw DecodeError("packet payload length " + std::to_string(len) +
                      " exceeds remaining " + std::to_string(r.remaining()));
  ByteSpan s = r.raw(len);
  p.payload.assign(s.begin(), s.end());
  return p;
}

}  // namespace r2f
