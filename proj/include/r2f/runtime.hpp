#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "r2f/backward.hpp"
#include "r2f/dataset.hpp"
#include "r2f/protocol.hpp"
#include "r2f/tmr.hpp"

namespace r2f {

/// Deterministic device/server speed model. Stage seconds are computed from
/// operation counts with these rates, so timing CSVs are byte-reproducible
/// and independent of host load.
struct DeviceRates {
  double mac_rate = 2e8;         // device MACs / s
  double vote_rate = 1e9;        // voted elements / s
  double sub_rate = 5e8;         // increment subtractions / s
  double codec_rate = 2e8;       // encoded/decoded payload bytes / s
  double server_flop_rate = 2e9; // server training FLOPs / s
};

struct TrainingConfig {
  int batch_size = 16;
  int epochs = 1;
  double lr = 1e-3;
  double momentum = 0.9;
  double similarity_threshold = 0.6;
  bool codec_enabled = true;  // false: every layer ships Raw
  FaultConfig fault;
  TmrPolicy policy;
  ChannelConfig channel;
  DeviceRates rates;
  uint64_t seed = 1;  // data order; fault streams come from fault.seed
  int eval_n = 200;

  void validate() const;
};

/// Per-iteration stage seconds and byte meters. The seven stages mirror the
/// retraining pipeline: device forward, voting, increment subtraction,
/// encode+decode, uplink, server backward, model downlink.
struct StageTiming {
  double fp = 0, tmr = 0, increment = 0, codec = 0, uplink = 0, bp = 0,
         downlink = 0;
  uint64_t bytes_up = 0, bytes_down = 0;

  double total() const {
    return fp + tmr + increment + codec + uplink + bp + downlink;
  }
  StageTiming& operator+=(const StageTiming& o);
};

struct ClientStepResult {
  BatchPayload payload;
  StageTiming timing;  // device stages + bytes_up of the encoded response
};

/// Device-side work for one batch: redundant faulty forward per policy,
/// packet selection per layer, payload assembly, modeled stage timing.
ClientStepResult client_step(const QuantModel& m, const TensorQ& inputs,
                             const std::vector<uint16_t>& labels,
                             const std::vector<uint64_t>& sample_ids,
                             const TrainingConfig& cfg, uint64_t exec_base);

struct ServerStepResult {
  double loss = 0;
  StageTiming timing;  // codec decode + bp; downlink filled by the caller
};

/// Server-side work for one batch: recompute clean references chained
/// through the approximated activations, apply Sparse increments / Raw
/// overwrites, dequantize, backward, optimizer step, re-quantize deployed.
ServerStepResult server_step(FloatModel& master, QuantModel& deployed,
                             SgdOptimizer& opt, const BatchPayload& payload,
                             const TrainingConfig& cfg);

// ---------------------------------------------------------------------------
// Device session: the protocol state machine answering server requests.
// ---------------------------------------------------------------------------

class Device {
 public:
  Device(Dataset data, TrainingConfig cfg, uint32_t id = 1);

  /// Handles one request and returns the response. Unexpected or malformed
  /// requests yield an Error message and leave all state unchanged.
  Message handle(const Message& req);

  const std::optional<QuantModel>& model() const { return model_; }
  DeviceMode mode() const { return mode_; }
  uint32_t id() const { return id_; }
  /// Stage timing of the most recent GetData compute (local transports).
  const StageTiming& last_timing() const { return last_timing_; }

 private:
  Message do_get_data(const Message& req);

  Dataset data_;
  TrainingConfig cfg_;
  uint32_t id_;
  std::optional<QuantModel> model_;
  DeviceMode mode_ = DeviceMode::Inference;
  StageTiming last_timing_;
  // Retransmit cache: iteration -> encoded DataResponse.
  uint32_t cached_iteration_ = 0;
  bool has_cache_ = false;
  Bytes cached_response_;
};

/// Request/response transport used by the server-side driver.
struct Transport {
  virtual ~Transport() = default;
  virtual Message roundtrip(const Message& req) = 0;
  /// Device-side compute stages of the most recent GetData, when the
  /// transport can observe them (local transports only).
  virtual const StageTiming* device_timing() const { return nullptr; }
};

/// In-process device behind a simulated channel; meters bytes and advances
/// the virtual clock, and exposes the device's modeled compute timing.
class LocalTransport : public Transport {
 public:
  LocalTransport(Device& dev, SimChannel& ch) : dev_(dev), ch_(ch) {}
  Message roundtrip(const Message& req) override;
  const StageTiming* device_timing() const override {
    return &dev_.last_timing();
  }
  Device& device() { return dev_; }
  SimChannel& channel() { return ch_; }

 private:
  Device& dev_;
  SimChannel& ch_;
};

class SocketTransport;

/// Remote device over a TCP SocketTransport (split-process mode). Device
/// compute timing is not observable across the wire; uplink/downlink stages
/// then reflect only real elapsed transfer time as seen by this side.
class TcpTransport : public Transport {
 public:
  explicit TcpTransport(SocketTransport& s) : s_(s) {}
  Message roundtrip(const Message& req) override;

 private:
  SocketTransport& s_;
};

// ---------------------------------------------------------------------------
// Server driver.
// ---------------------------------------------------------------------------

struct IterationMetrics {
  int epoch = 0, iteration = 0;
  double loss = 0;
  StageTiming timing;
  double clock = 0;  // simulated wall clock after the iteration
};

struct RetrainResult {
  QuantModel model;
  std::vector<IterationMetrics> metrics;
};

/// Sends SetMode(training), then per iteration DeployModel + GetData,
/// feeding each DataResponse to server_step. Decode failures trigger one
/// retransmit; a second failure abandons the batch.
RetrainResult retrain_over(Transport& t, const QuantModel& m0,
                           const TrainingConfig& cfg, size_t dataset_size,
                           const std::function<void(const IterationMetrics&)>&
                               on_iteration = nullptr);

/// Single-process convenience: builds the device and simulated channel.
RetrainResult retrain(const QuantModel& m0, const Dataset& data,
                      const TrainingConfig& cfg);

/// In-process quantization-aware fine-tune: the exact server_step path fed
/// directly, no protocol. The ber-0 baseline for transparency checks.
RetrainResult finetune_inprocess(const QuantModel& m0, const Dataset& data,
                                 const TrainingConfig& cfg);

/// Clean quantization-aware pretraining: finetune_inprocess with faults off
/// and no redundancy. Produces the deployable baseline models.
QuantModel pretrain_clean(const QuantModel& m0, const Dataset& data,
                          int epochs, double lr, double momentum = 0.9,
                          int batch_size = 16);

/// Retraining needs a voted reference to separate the designated faulty
/// output from a near-clean baseline; without one every increment is zero
/// and the server trains on its own clean recompute. Upgrades a None
/// variant to layer-wise protection of all layers; explicit NW/LW policies
/// pass through untouched. Applied by the retraining entry points (CLI,
/// experiment harness), not by the core loop, so raw-policy behavior stays
/// testable.
TrainingConfig retrain_defaults(TrainingConfig cfg);

struct EvalResult {
  double top1 = 0, top5 = 0;
  size_t n = 0;
};

/// n faulty inferences (fresh streams per batch via exec_salt + batch index)
/// using the voted outputs of the given policy; top-1/top-5 exact-fraction.
EvalResult evaluate(const QuantModel& m, const Dataset& data,
                    const FaultConfig& fault, const TmrPolicy& policy,
                    size_t n, uint64_t exec_salt = 0);

}  // namespace r2f
