#include "r2f/runtime.hpp"

#include <algorithm>
#include <cmath>

#include "r2f/channel.hpp"

namespace r2f {

void TrainingConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (!(momentum >= 0 && momentum < 1))
    throw ConfigError("momentum must lie in [0, 1)");
  if (!(similarity_threshold >= 0 && similarity_threshold <= 1))
    throw ConfigError("similarity threshold outside [0,1]");
  if (eval_n < 1) throw ConfigError("eval_n must be >= 1");
  fault.validate();
  channel.validate();
}

StageTiming& StageTiming::operator+=(const StageTiming& o) {
  fp += o.fp;
  tmr += o.tmr;
  increment += o.increment;
  codec += o.codec;
  uplink += o.uplink;
  bp += o.bp;
  downlink += o.downlink;
  bytes_up += o.bytes_up;
  bytes_down += o.bytes_down;
  return *this;
}

namespace {

int copies_for_layer(const TmrPolicy& pol, int layer) {
  if (pol.variant == TmrVariant::NetworkWise) return 3;
  if (pol.variant == TmrVariant::LayerWise && pol.is_protected(layer))
    return pol.independent_faulty ? 4 : 3;
  return 1;
}

}  // namespace

ClientStepResult client_step(const QuantModel& m, const TensorQ& inputs,
                             const std::vector<uint16_t>& labels,
                             const std::vector<uint64_t>& sample_ids,
                             const TrainingConfig& cfg, uint64_t exec_base) {
  if (labels.size() != size_t(inputs.shape.n) ||
      sample_ids.size() != labels.size())
    throw ShapeError("batch of " + std::to_string(inputs.shape.n) +
                     " images vs " + std::to_string(labels.size()) +
                     " labels / " + std::to_string(sample_ids.size()) + " ids");
  const int batch = inputs.shape.n;
  TmrCapture cap = tmr_forward(m, inputs, cfg.fault, cfg.policy, exec_base);

  ClientStepResult r;
  r.payload.mode = 1;
  r.payload.batch_size = static_cast<uint16_t>(batch);
  r.payload.sample_ids = sample_ids;
  r.payload.labels = labels;
  r.payload.inputs = inputs;
  r.payload.final_outputs = cap.layers.back().copy0;
  r.payload.packets.reserve(m.layers.size());
  uint64_t payload_bytes = 0;
  for (int i = 0; i < m.layer_count(); ++i) {
    IncrementPacket p;
    if (cfg.codec_enabled) {
      p = choose_encoding(cap, static_cast<uint16_t>(i),
                          cfg.similarity_threshold);
    } else {
      p.layer_id = static_cast<uint16_t>(i);
      p.encoding = Encoding::Raw;
      p.payload = encode_raw(cap.layers[i].copy0);
    }
    payload_bytes += p.payload.size();
    r.payload.packets.push_back(std::move(p));
  }

  // Modeled stage seconds from operation counts.
  const DeviceRates& rates = cfg.rates;
  uint64_t ops = 0, voted = 0, subs = 0;
  for (int i = 0; i < m.layer_count(); ++i) {
    const LayerDesc& L = m.layers[i];
    int copies = copies_for_layer(cfg.policy, i);
    ops += uint64_t(copies) * L.op_count * batch;
    if (copies >= 3) voted += L.out_shape.size() * batch;
    if (cfg.codec_enabled) subs += L.out_shape.size() * batch;
  }
  r.timing.fp = double(ops) / rates.mac_rate;
  r.timing.tmr = double(voted) / rates.vote_rate;
  r.timing.increment = double(subs) / rates.sub_rate;
  r.timing.codec = double(payload_bytes) / rates.codec_rate;
  r.timing.bytes_up = r.payload.encode().size() + kMsgHeaderBytes;
  return r;
}

ServerStepResult server_step(FloatModel& master, QuantModel& deployed,
                             SgdOptimizer& opt, const BatchPayload& payload,
                             const TrainingConfig& cfg) {
  if (payload.mode != 1)
    throw ProtocolError("server_step needs a training-mode payload");
  if (payload.packets.size() != deployed.layers.size())
    throw DecodeError("payload carries " +
                      std::to_string(payload.packets.size()) +
                      " packets for " + std::to_string(deployed.layers.size()) +
                      " layers");
  const int batch = payload.batch_size;
  ServerStepResult r;

  // Clean reference recompute chained through the approximated activations:
  // Sparse packets add increments onto the recomputed reference, Raw packets
  // overwrite the activation wholesale.
  ActivationsQ approx;
  approx.acts.reserve(deployed.layers.size() + 1);
  approx.exps.reserve(deployed.layers.size() + 1);
  approx.acts.push_back(payload.inputs);
  approx.exps.push_back(deployed.in_e);
  uint64_t codec_bytes = 0;
  for (int i = 0; i < deployed.layer_count(); ++i) {
    const LayerDesc& L = deployed.layers[i];
    const IncrementPacket& pk = payload.packets[i];
    Shape out_shape = L.out_shape;
    out_shape.n = batch;
    TensorQ out;
    if (pk.encoding == Encoding::Sparse) {
      const TensorQ* ref = L.kind == LayerKind::ResidualAdd
                               ? &approx.acts[size_t(L.f[0]) + 1]
                               : nullptr;
      TensorQ recomputed =
          layer_forward(approx.acts.back(), L, MacHook{}, ref, i);
      IncrementTensor inc = decode_sparse(pk.payload, out_shape);
      out = reconstruct(recomputed, inc);
    } else {
      out = decode_raw(pk.payload, out_shape);
    }
    codec_bytes += pk.payload.size();
    approx.acts.push_back(std::move(out));
    approx.exps.push_back(L.out_e);
  }

  ActivationsF acts_f = dequantize_activations(approx);
  r.loss = loss_forward(acts_f.acts.back(), payload.labels);
  GradientSet grads = backward(master, acts_f, payload.labels);
  opt.step(master, grads);
  deployed = to_quant(master);

  r.timing.codec = double(codec_bytes) / cfg.rates.codec_rate;
  // Reference recompute (2 flops/MAC) plus backward (4 flops/MAC).
  r.timing.bp = 6.0 * double(deployed.total_macs()) * batch /
                cfg.rates.server_flop_rate;
  return r;
}

// ---------------------------------------------------------------------------
// Device session.
// ---------------------------------------------------------------------------

Device::Device(Dataset data, TrainingConfig cfg, uint32_t id)
    : data_(std::move(data)), cfg_(std::move(cfg)), id_(id) {
  cfg_.validate();
}

Message Device::handle(const Message& req) {
  try {
    switch (req.type) {
      case MsgType::SetMode: {
        if (req.payload.size() != 1 || req.payload[0] > 1)
          return make_error(id_, ErrCode::BadMode,
                            "mode byte must be 0 (inference) or 1 (training)");
        mode_ = static_cast<DeviceMode>(req.payload[0]);
        return Message{MsgType::Ack, id_, {}};
      }
      case MsgType::DeployModel: {
        QuantModel m;
        try {
          m = QuantModel::deserialize(req.payload);
        } catch (const Error& e) {
          return make_error(id_, ErrCode::BadModel, e.what());
        }
        model_ = std::move(m);  // atomic between batches: replaced only here
        return Message{MsgType::Ack, id_, {}};
      }
      case MsgType::GetData:
        return do_get_data(req);
      default:
        return make_error(id_, ErrCode::BadRequest,
                          "unexpected message type " +
                              std::to_string(uint8_t(req.type)));
    }
  } catch (const Error& e) {
    return make_error(id_, ErrCode::Internal, e.what());
  }
}

Message Device::do_get_data(const Message& req) {
  if (!model_)
    return make_error(id_, ErrCode::BadRequest, "no model deployed");
  if (data_.size() == 0)
    return make_error(id_, ErrCode::BadRequest, "device has no data");
  GetDataReq q;
  try {
    q = GetDataReq::decode(req.payload);
  } catch (const Error& e) {
    return make_error(id_, ErrCode::BadRequest, e.what());
  }
  if (q.retransmit == 1) {
    if (!has_cache_ || cached_iteration_ != q.iteration)
      return make_error(id_, ErrCode::BadRequest,
                        "no cached response for iteration " +
                            std::to_string(q.iteration));
    Message m;
    m.type = MsgType::DataResponse;
    m.device_id = id_;
    m.payload = cached_response_;
    return m;
  }

  const int bs = q.batch_size;
  std::vector<uint64_t> ids(bs);
  std::vector<uint16_t> labels(bs);
  const Shape s = data_.images.shape;
  const size_t row = size_t(s.c) * s.h * s.w;
  TensorQ inputs(Shape{bs, s.c, s.h, s.w});
  for (int i = 0; i < bs; ++i) {
    size_t idx = (size_t(q.iteration) * bs + i) % data_.size();
    ids[i] = idx;
    labels[i] = data_.labels[idx];
    std::copy(data_.images.data.begin() + idx * row,
              data_.images.data.begin() + (idx + 1) * row,
              inputs.data.begin() + size_t(i) * row);
  }

  BatchPayload payload;
  if (mode_ == DeviceMode::Training) {
    ClientStepResult res =
        client_step(*model_, inputs, labels, ids, cfg_, q.iteration);
    payload = std::move(res.payload);
    last_timing_ = res.timing;
  } else {
    TmrCapture cap =
        tmr_forward(*model_, inputs, cfg_.fault, cfg_.policy, q.iteration);
    payload.mode = 0;
    payload.batch_size = static_cast<uint16_t>(bs);
    payload.sample_ids = ids;
    payload.final_outputs = cap.layers.back().voted;
    StageTiming t;
    uint64_t ops = 0;
    for (int i = 0; i < model_->layer_count(); ++i)
      ops += uint64_t(copies_for_layer(cfg_.policy, i)) *
             model_->layers[i].op_count * bs;
    t.fp = double(ops) / cfg_.rates.mac_rate;
    last_timing_ = t;
  }
  Message m;
  m.type = MsgType::DataResponse;
  m.device_id = id_;
  m.payload = payload.encode();
  cached_response_ = m.payload;
  cached_iteration_ = q.iteration;
  has_cache_ = true;
  return m;
}

// ---------------------------------------------------------------------------
// Transports and the server driver.
// ---------------------------------------------------------------------------

Message LocalTransport::roundtrip(const Message& req) {
  Bytes req_b = encode_message(req);
  ch_.send(req_b.size(), Direction::Down);
  Message resp = dev_.handle(req);
  if (req.type == MsgType::GetData) {
    const StageTiming& dt = dev_.last_timing();
    ch_.advance_by(dt.fp + dt.tmr + dt.increment + dt.codec);
  }
  Bytes resp_b = encode_message(resp);
  ch_.send(resp_b.size(), Direction::Up);
  return resp;
}

Message TcpTransport::roundtrip(const Message& req) {
  s_.send_message(req);
  return s_.recv_message();
}

namespace {

/// Accumulates wire meters for one roundtrip into t.
void meter_roundtrip(StageTiming& t, const Message& req, const Message& resp,
                     const ChannelConfig& ch) {
  uint64_t down = encode_message(req).size();
  uint64_t up = encode_message(resp).size();
  t.bytes_down += down;
  t.bytes_up += up;
  t.downlink += transmit_time(down, Direction::Down, ch);
  t.uplink += transmit_time(up, Direction::Up, ch);
}

[[noreturn]] void fail_on_error(const Message& resp, const char* what) {
  if (resp.type == MsgType::Error) {
    auto [code, reason] = parse_error(resp);
    throw ProtocolError(std::string(what) + " rejected: " + reason);
  }
  throw ProtocolError(std::string(what) + " got unexpected response type " +
                      std::to_string(uint8_t(resp.type)));
}

}  // namespace

RetrainResult retrain_over(
    Transport& t, const QuantModel& m0, const TrainingConfig& cfg,
    size_t dataset_size,
    const std::function<void(const IterationMetrics&)>& on_iteration) {
  cfg.validate();
  cfg.policy.validate(m0.layer_count());
  RetrainResult out;
  out.model = m0;
  const size_t iters_per_epoch = dataset_size / size_t(cfg.batch_size);
  if (iters_per_epoch == 0 || cfg.epochs == 0) return out;

  FloatModel master = to_float(m0);
  QuantModel deployed = m0;
  SgdOptimizer opt(cfg.lr, cfg.momentum);
  const ChannelConfig& ch = cfg.channel;

  {
    Message req{MsgType::SetMode, 0, {uint8_t(DeviceMode::Training)}};
    Message resp = t.roundtrip(req);
    if (resp.type != MsgType::Ack) fail_on_error(resp, "SetMode");
  }

  double clock = 0;
  uint32_t global_it = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t it = 0; it < iters_per_epoch; ++it, ++global_it) {
      StageTiming timing;
      Message deploy{MsgType::DeployModel, 0, deployed.serialize()};
      Message dresp = t.roundtrip(deploy);
      if (dresp.type != MsgType::Ack) fail_on_error(dresp, "DeployModel");
      meter_roundtrip(timing, deploy, dresp, ch);

      GetDataReq q;
      q.iteration = global_it;
      q.batch_size = static_cast<uint16_t>(cfg.batch_size);
      Message get{MsgType::GetData, 0, q.encode()};
      Message data = t.roundtrip(get);
      if (data.type != MsgType::DataResponse) fail_on_error(data, "GetData");
      meter_roundtrip(timing, get, data, ch);

      BatchPayload payload;
      bool decoded = false;
      for (int attempt = 0; attempt < 2 && !decoded; ++attempt) {
        try {
          payload = BatchPayload::decode(data.payload, deployed);
          decoded = true;
        } catch (const DecodeError&) {
          if (attempt == 1) break;
          q.retransmit = 1;  // one retransmit, then the batch is dropped
          Message retry{MsgType::GetData, 0, q.encode()};
          data = t.roundtrip(retry);
          if (data.type != MsgType::DataResponse)
            fail_on_error(data, "GetData retransmit");
          meter_roundtrip(timing, retry, data, ch);
        }
      }
      if (!decoded) continue;

      if (const StageTiming* dt = t.device_timing()) {
        timing.fp = dt->fp;
        timing.tmr = dt->tmr;
        timing.increment = dt->increment;
        timing.codec = dt->codec;
      }
      ServerStepResult sres = server_step(master, deployed, opt, payload, cfg);
      timing.codec += sres.timing.codec;
      timing.bp = sres.timing.bp;

      IterationMetrics im;
      im.epoch = epoch;
      im.iteration = int(global_it);
      im.loss = sres.loss;
      im.timing = timing;
      clock += timing.total();
      im.clock = clock;
      out.metrics.push_back(im);
      if (on_iteration) on_iteration(im);
    }
  }
  out.model = deployed;
  return out;
}

RetrainResult retrain(const QuantModel& m0, const Dataset& data,
                      const TrainingConfig& cfg) {
  Device dev(data, cfg);
  SimChannel ch(cfg.channel);
  LocalTransport t(dev, ch);
  return retrain_over(t, m0, cfg, data.size());
}

RetrainResult finetune_inprocess(const QuantModel& m0, const Dataset& data,
                                 const TrainingConfig& cfg) {
  cfg.validate();
  cfg.policy.validate(m0.layer_count());
  RetrainResult out;
  out.model = m0;
  const size_t iters_per_epoch = data.size() / size_t(cfg.batch_size);
  if (iters_per_epoch == 0 || cfg.epochs == 0) return out;

  FloatModel master = to_float(m0);
  QuantModel deployed = m0;
  SgdOptimizer opt(cfg.lr, cfg.momentum);
  const size_t row = data.images.shape.size() / data.images.shape.n;
  uint32_t global_it = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t it = 0; it < iters_per_epoch; ++it, ++global_it) {
      const int bs = cfg.batch_size;
      std::vector<uint64_t> ids(bs);
      std::vector<uint16_t> labels(bs);
      TensorQ inputs(Shape{bs, data.images.shape.c, data.images.shape.h,
                           data.images.shape.w});
      for (int i = 0; i < bs; ++i) {
        size_t idx = (size_t(global_it) * bs + i) % data.size();
        ids[i] = idx;
        labels[i] = data.labels[idx];
        std::copy(data.images.data.begin() + idx * row,
                  data.images.data.begin() + (idx + 1) * row,
                  inputs.data.begin() + size_t(i) * row);
      }
      ClientStepResult cres =
          client_step(deployed, inputs, labels, ids, cfg, global_it);
      ServerStepResult sres =
          server_step(master, deployed, opt, cres.payload, cfg);
      IterationMetrics im;
      im.epoch = epoch;
      im.iteration = int(global_it);
      im.loss = sres.loss;
      im.timing = cres.timing;
      im.timing.codec += sres.timing.codec;
      im.timing.bp = sres.timing.bp;
      im.clock = (out.metrics.empty() ? 0 : out.metrics.back().clock) +
                 im.timing.total();
      out.metrics.push_back(im);
    }
  }
  out.model = deployed;
  return out;
}

QuantModel pretrain_clean(const QuantModel& m0, const Dataset& data,
                          int epochs, double lr, double momentum,
                          int batch_size) {
  TrainingConfig cfg;
  cfg.batch_size = batch_size;
  cfg.epochs = epochs;
  cfg.lr = lr;
  cfg.momentum = momentum;
  cfg.fault.ber = 0.0;
  cfg.policy.variant = TmrVariant::None;
  return finetune_inprocess(m0, data, cfg).model;
}

TrainingConfig retrain_defaults(TrainingConfig cfg) {
  if (cfg.policy.variant == TmrVariant::None) {
    cfg.policy.variant = TmrVariant::LayerWise;
    cfg.policy.protected_layers.clear();
  }
  return cfg;
}

EvalResult evaluate(const QuantModel& m, const Dataset& data,
                    const FaultConfig& fault, const TmrPolicy& policy,
                    size_t n, uint64_t exec_salt) {
  if (n > data.size())
    throw ConfigError("evaluate n=" + std::to_string(n) +
                      " exceeds dataset of " + std::to_string(data.size()));
  policy.validate(m.layer_count());
  fault.validate();
  constexpr size_t kEvalBatch = 16;
  EvalResult r;
  r.n = n;
  if (n == 0) return r;
  size_t top1 = 0, top5 = 0;
  const int classes = m.layers.back().out_shape.size();
  for (size_t start = 0; start < n; start += kEvalBatch) {
    size_t count = std::min(kEvalBatch, n - start);
    TensorQ x = batch_images(data, start, count);
    TmrCapture cap =
        tmr_forward(m, x, fault, policy, exec_salt + start / kEvalBatch);
    const TensorQ& logits = cap.layers.back().voted;
    for (size_t i = 0; i < count; ++i) {
      const int8_t* row = logits.data.data() + i * size_t(classes);
      uint16_t label = data.labels[start + i];
      int rank = 0;
      for (int j = 0; j < classes; ++j) {
        if (row[j] > row[label] || (row[j] == row[label] && j < label)) ++rank;
      }
      top1 += rank < 1;
      top5 += rank < 5;
    }
  }
  r.top1 = double(top1) / double(n);
  r.top5 = double(top5) / double(n);
  return r;
}

}  // namespace r2f
