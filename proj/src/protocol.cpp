#include "r2f/protocol.hpp"

#include <cstring>

namespace r2f {

Bytes encode_message(const Message& m) {
  ByteWriter w;
  w.bytes(kMsgMagic, 4);
  w.u8(static_cast<uint8_t>(m.type));
  w.u32(m.device_id);
  w.u64(m.payload.size());
  w.bytes(m.payload);
  return w.take();
}

Message decode_message(ByteSpan bytes) {
  ByteReader r(bytes);
  ByteSpan magic = r.raw(4);
  if (std::memcmp(magic.data(), kMsgMagic, 4) != 0)
    throw DecodeError("bad magic");
  Message m;
  uint8_t t = r.u8();
  if (t < 1 || t > 6)
    throw DecodeError("unknown message type " + std::to_string(t));
  m.type = static_cast<MsgType>(t);
  m.device_id = r.u32();
  uint64_t len = r.u64();
  if (len != r.remaining())
    throw DecodeError("payload length " + std::to_string(len) +
                      " does not match remaining " +
                      std::to_string(r.remaining()) + " bytes");
  ByteSpan p = r.raw(len);
  m.payload.assign(p.begin(), p.end());
  return m;
}

Message make_error(uint32_t device_id, ErrCode code,
                   const std::string& reason) {
  Message m;
  m.type = MsgType::Error;
  m.device_id = device_id;
  ByteWriter w;
  w.u8(static_cast<uint8_t>(code));
  w.str(reason);
  m.payload = w.take();
  return m;
}

std::pair<ErrCode, std::string> parse_error(const Message& m) {
  if (m.type != MsgType::Error) throw ProtocolError("not an Error message");
  ByteReader r(m.payload);
  uint8_t code = r.u8();
  if (code < 1 || code > 4)
    throw DecodeError("unknown error code " + std::to_string(code));
  ByteSpan rest = r.raw(r.remaining());
  return {static_cast<ErrCode>(code),
          std::string(rest.begin(), rest.end())};
}

Bytes GetDataReq::encode() const {
  ByteWriter w;
  w.u8(retransmit);
  w.u32(iteration);
  w.u16(batch_size);
  return w.take();
}

GetDataReq GetDataReq::decode(ByteSpan bytes) {
  ByteReader r(bytes);
  GetDataReq q;
  q.retransmit = r.u8();
  if (q.retransmit > 1)
    throw DecodeError("retransmit flag " + std::to_string(q.retransmit));
  q.iteration = r.u32();
  q.batch_size = r.u16();
  if (q.batch_size == 0) throw DecodeError("zero batch size");
  r.expect_done("GetData");
  return q;
}

Bytes BatchPayload::encode() const {
  ByteWriter w;
  w.u8(mode);
  w.u16(batch_size);
  for (uint64_t id : sample_ids) w.u64(id);
  if (mode == 1) {
    for (uint16_t l : labels) w.u16(l);
    Bytes in = encode_raw(inputs);
    w.u64(in.size());
    w.bytes(in);
  }
  Bytes fin = encode_raw(final_outputs);
  w.u64(fin.size());
  w.bytes(fin);
  if (mode == 1) {
    w.u16(static_cast<uint16_t>(packets.size()));
    for (const auto& p : packets) w.bytes(encode_packet(p));
  }
  return w.take();
}

BatchPayload BatchPayload::decode(ByteSpan bytes, const QuantModel& m) {
  ByteReader r(bytes);
  BatchPayload bp;
  bp.mode = r.u8();
  if (bp.mode > 1) throw DecodeError("payload mode " + std::to_string(bp.mode));
  bp.batch_size = r.u16();
  if (bp.batch_size == 0) throw DecodeError("zero batch size");
  const int n = bp.batch_size;
  bp.sample_ids.resize(n);
  for (auto& id : bp.sample_ids) id = r.u64();
  if (bp.mode == 1) {
    bp.labels.resize(n);
    for (auto& l : bp.labels) l = r.u16();
    uint64_t in_len = r.u64();
    Shape in_shape = m.input_shape(n);
    if (in_len != in_shape.size())
      throw DecodeError("input blob " + std::to_string(in_len) +
                        " bytes, expected " + std::to_string(in_shape.size()));
    bp.inputs = decode_raw(r.raw(in_len), in_shape);
  }
  uint64_t fin_len = r.u64();
  if (m.layers.empty()) throw DecodeError("empty model");
  Shape fin_shape = m.layers.back().out_shape;
  fin_shape.n = n;
  if (fin_len != fin_shape.size())
    throw DecodeError("final output blob " + std::to_string(fin_len) +
                      " bytes, expected " + std::to_string(fin_shape.size()));
  bp.final_outputs = decode_raw(r.raw(fin_len), fin_shape);
  if (bp.mode == 1) {
    uint16_t count = r.u16();
    if (count != m.layers.size())
      throw DecodeError("payload carries " + std::to_string(count) +
                        " packets for " + std::to_string(m.layers.size()) +
                        " layers");
    int prev = -1;
    bp.packets.reserve(count);
    for (int i = 0; i < count; ++i) {
      IncrementPacket p = decode_packet(r);
      if (int(p.layer_id) <= prev)
        throw DecodeError("packet layer ids not strictly increasing at " +
                          std::to_string(p.layer_id));
      if (p.layer_id >= m.layers.size())
        throw DecodeError("packet layer id " + std::to_string(p.layer_id) +
                          " out of range");
      // Raw payloads must match the layer's batched output size exactly.
      if (p.encoding == Encoding::Raw) {
        Shape s = m.layers[p.layer_id].out_shape;
        s.n = n;
        if (p.payload.size() != s.size())
          throw DecodeError("raw packet for layer " +
                            std::to_string(p.layer_id) + " has " +
                            std::to_string(p.payload.size()) + " bytes, layer " +
                            "output needs " + std::to_string(s.size()));
      }
      prev = p.layer_id;
      bp.packets.push_back(std::move(p));
    }
  }
  r.expect_done("batch payload");
  return bp;
}

ChannelConfig ChannelConfig::profile(const std::string& name) {
  ChannelConfig c;
  if (name == "lora") {
    c.up_bps = 50e3;
    c.down_bps = 50e3;
  } else if (name == "wpan") {
    c.up_bps = 800e3;
    c.down_bps = 800e3;
  } else if (name == "hspa") {
    c.up_bps = 5.76e6;
    c.down_bps = 21.1e6;
  } else if (name == "lte") {
    c.up_bps = 50e6;
    c.down_bps = 150e6;
  } else {
    throw ConfigError("unknown channel profile '" + name + "'");
  }
  return c;
}

void ChannelConfig::validate() const {
  if (!(up_bps > 0) || !(down_bps > 0))
    throw ConfigError("channel rates must be positive");
  if (!(latency_s >= 0)) throw ConfigError("channel latency must be >= 0");
}

double transmit_time(uint64_t bytes, Direction d, const ChannelConfig& ch) {
  double rate = d == Direction::Up ? ch.up_bps : ch.down_bps;
  return ch.latency_s + 8.0 * double(bytes) / rate;
}

double SimChannel::send(uint64_t bytes, Direction d) {
  const int di = static_cast<int>(d);
  double air = 8.0 * double(bytes) /
               (d == Direction::Up ? ch_.up_bps : ch_.down_bps);
  double start = std::max(now_, busy_[di]);
  busy_[di] = start + air;
  double delivery = start + air + ch_.latency_s;
  now_ = delivery;
  (d == Direction::Up ? bytes_up_ : bytes_down_) += bytes;
  return delivery;
}

}  // namespace r2f
