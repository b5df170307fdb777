#pragma once

#include <string>
#include <vector>

#include "r2f/codec.hpp"
#include "r2f/model.hpp"
#include "r2f/util.hpp"

namespace r2f {

enum class MsgType : uint8_t {
  SetMode = 1,
  DeployModel = 2,
  GetData = 3,
  DataResponse = 4,
  Ack = 5,
  Error = 6,
};

constexpr uint8_t kMsgMagic[4] = {'R', '2', 'F', '1'};
constexpr size_t kMsgHeaderBytes = 4 + 1 + 4 + 8;  // magic, type, device, len

/// Framed wire unit: magic | msg_type u8 | device_id u32 LE | payload_len
/// u64 LE | payload.
struct Message {
  MsgType type = MsgType::Ack;
  uint32_t device_id = 0;
  Bytes payload;
};

Bytes encode_message(const Message& m);
Message decode_message(ByteSpan bytes);

enum class ErrCode : uint8_t {
  BadMode = 1,
  BadModel = 2,
  BadRequest = 3,
  Internal = 4,
};

Message make_error(uint32_t device_id, ErrCode code, const std::string& reason);
/// Decodes an Error payload into (code, reason).
std::pair<ErrCode, std::string> parse_error(const Message& m);

/// Device operating mode carried by SetMode.
enum class DeviceMode : uint8_t { Inference = 0, Training = 1 };

/// GetData request payload: retransmit u8 | iteration u32 | batch_size u16.
struct GetDataReq {
  uint8_t retransmit = 0;
  uint32_t iteration = 0;
  uint16_t batch_size = 16;

  Bytes encode() const;
  static GetDataReq decode(ByteSpan bytes);
};

/// DataResponse payload. Training mode carries inputs, labels and the
/// per-layer packet list; inference mode carries final outputs only.
/// Layout: mode u8 | batch_size u16 | ids u64[] |
///   [training: labels u16[] | input_len u64 + input bytes]
///   final_len u64 + final output bytes |
///   [training: packet_count u16 | packets].
struct BatchPayload {
  uint8_t mode = 1;
  uint16_t batch_size = 0;
  std::vector<uint64_t> sample_ids;
  std::vector<uint16_t> labels;
  TensorQ inputs;
  TensorQ final_outputs;
  std::vector<IncrementPacket> packets;

  Bytes encode() const;
  /// Shapes come from the deployed model; packet layer_ids must be strictly
  /// increasing and cover every layer in training mode.
  static BatchPayload decode(ByteSpan bytes, const QuantModel& m);
};

// ---------------------------------------------------------------------------
// Channel model.
// ---------------------------------------------------------------------------

enum class Direction : uint8_t { Up = 0, Down = 1 };

struct ChannelConfig {
  double up_bps = 800e3;
  double down_bps = 800e3;
  double latency_s = 0.0;

  /// Presets: lora 50k/50k, wpan 800k/800k, hspa 21.1M down / 5.76M up,
  /// lte 150M down / 50M up.
  static ChannelConfig profile(const std::string& name);
  void validate() const;
};

/// latency + 8*bytes / rate of the given direction.
double transmit_time(uint64_t bytes, Direction d, const ChannelConfig& ch);

/// Virtual-clock FIFO channel: each direction is serialized by a busy-until
/// horizon, deliveries never sleep.
class SimChannel {
 public:
  explicit SimChannel(ChannelConfig ch) : ch_(ch) { ch_.validate(); }

  /// Schedules a transmission; returns the delivery timestamp and advances
  /// the clock to it (stop-and-wait usage).
  double send(uint64_t bytes, Direction d);
  double now() const { return now_; }
  void advance_by(double dt) { now_ += dt; }
  uint64_t bytes_up() const { return bytes_up_; }
  uint64_t bytes_down() const { return bytes_down_; }
  const ChannelConfig& config() const { return ch_; }

 private:
  ChannelConfig ch_;
  double now_ = 0.0;
  double busy_[2] = {0.0, 0.0};
  uint64_t bytes_up_ = 0, bytes_down_ = 0;
};

}  // namespace r2f
