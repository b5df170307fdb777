#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "r2f/channel.hpp"
#include "r2f/codec.hpp"
#include "r2f/config.hpp"
#include "r2f/dataset.hpp"
#include "r2f/experiments.hpp"
#include "r2f/rng.hpp"
#include "r2f/select.hpp"
#include "r2f/zoo.hpp"

namespace {

using namespace r2f;

/// Flags shared by every subcommand; explicit flags override config values.
/// Each subcommand registers its own option set over the same bound
/// variables; presence is checked across all of them (one parses per run).
struct Common {
  std::string config_path, out_path, profile, tmr_name;
  uint64_t seed = 0;
  double ber = 0, threshold = 0, rmax = 0;
  std::vector<CLI::Option*> o_seed, o_prof, o_ber, o_th, o_tmr, o_rmax;

  void add(CLI::App* s) {
    s->add_option("--config", config_path, "config file (flat key=value)");
    s->add_option("--out", out_path, "output file (default: stdout)");
    o_seed.push_back(s->add_option(
        "--seed", seed, "master seed (data order and fault streams)"));
    o_prof.push_back(
        s->add_option("--profile", profile, "channel preset")
            ->check(CLI::IsMember({"lora", "wpan", "hspa", "lte"})));
    o_ber.push_back(s->add_option("--ber", ber, "fault bit error rate"));
    o_th.push_back(s->add_option(
        "--threshold", threshold, "similarity threshold for sparse encoding"));
    o_tmr.push_back(s->add_option("--tmr", tmr_name, "redundancy variant")
                        ->check(CLI::IsMember({"none", "nw", "lw"})));
    o_rmax.push_back(
        s->add_option("--rmax", rmax, "protection overhead budget"));
  }

  static bool given(const std::vector<CLI::Option*>& os) {
    for (const CLI::Option* o : os)
      if (o->count()) return true;
    return false;
  }

  AppConfig make_config() const {
    AppConfig c =
        config_path.empty() ? AppConfig{} : load_config(config_path);
    if (given(o_seed)) set_master_seed(c, seed);
    if (given(o_prof)) c.train.channel = ChannelConfig::profile(profile);
    if (given(o_ber)) c.train.fault.ber = ber;
    if (given(o_th)) c.train.similarity_threshold = threshold;
    if (given(o_tmr))
      c.train.policy.variant = tmr_name == "none" ? TmrVariant::None
                               : tmr_name == "nw" ? TmrVariant::NetworkWise
                                                  : TmrVariant::LayerWise;
    if (given(o_rmax)) c.select_rmax = rmax;
    return c;
  }
};

QuantModel load_or_build(const AppConfig& c) {
  if (!c.model_path.empty())
    return QuantModel::deserialize(read_file(c.model_path));
  return build_model(c.model_arch, c.train.seed);
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
    return;
  }
  write_file(out_path, ByteSpan(reinterpret_cast<const uint8_t*>(text.data()),
                                text.size()));
}

std::string metrics_csv(const RetrainResult& rr) {
  std::string csv =
      "epoch,iteration,loss,fp,tmr,increment,codec,uplink,bp,downlink,total,"
      "bytes_up,bytes_down,clock\n";
  char buf[512];
  for (const auto& im : rr.metrics) {
    const StageTiming& t = im.timing;
    std::snprintf(buf, sizeof(buf),
                  "%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%llu,"
                  "%llu,%.9g\n",
                  im.epoch, im.iteration, im.loss, t.fp, t.tmr, t.increment,
                  t.codec, t.uplink, t.bp, t.downlink, t.total(),
                  (unsigned long long)t.bytes_up,
                  (unsigned long long)t.bytes_down, im.clock);
    csv += buf;
  }
  return csv;
}

std::string endpoint_from(const std::string& flag, const char* env_var,
                          const std::string& dflt) {
  if (!flag.empty()) return flag;
  if (const char* e = std::getenv(env_var); e && *e) return e;
  return dflt;
}

int do_serve(const Common& com, const std::string& bind_flag) {
  AppConfig cfg = com.make_config();
  std::string ep = endpoint_from(bind_flag, "R2F_BIND", "127.0.0.1:7425");
  auto [host, port] = parse_endpoint(ep, "127.0.0.1");
  QuantModel arch = load_or_build(cfg);
  Device dev(field_data(cfg, arch.in_h), retrain_defaults(cfg.train));
  std::fprintf(stderr, "device listening on %s:%u\n", host.c_str(), port);
  SocketTransport s = SocketTransport::listen_accept(host, port);
  s.set_send_rate(cfg.train.channel.up_bps);
  for (;;) {
    Message req;
    try {
      req = s.recv_message();
    } catch (const ProtocolError&) {
      break;  // peer closed
    }
    s.send_message(dev.handle(req));
  }
  std::fprintf(stderr, "peer disconnected\n");
  return 0;
}

int do_connect(const Common& com, const std::string& connect_flag,
               const std::string& save_path, long long data_n) {
  AppConfig cfg = com.make_config();
  std::string ep =
      endpoint_from(connect_flag, "R2F_CONNECT", "127.0.0.1:7425");
  auto [host, port] = parse_endpoint(ep, "127.0.0.1");
  SocketTransport s = SocketTransport::connect_to(host, port);
  s.set_send_rate(cfg.train.channel.down_bps);
  TcpTransport t(s);
  QuantModel m0 = load_or_build(cfg);
  size_t n = data_n > 0 ? size_t(data_n) : size_t(cfg.data_synth_n);
  auto rr = retrain_over(t, m0, cfg.train, n);
  emit(metrics_csv(rr), com.out_path);
  if (!save_path.empty()) write_file(save_path, rr.model.serialize());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Fault-injected fixed-point CNN retraining over a bandwidth-limited "
      "link: redundant execution, sparse increment uplink, greedy critical-"
      "layer protection."};
  app.require_subcommand(1);

  Common com;

  auto* c_train = app.add_subcommand(
      "train", "retrain over the simulated channel; emits per-iteration CSV");
  std::string save_path;
  int pre_epochs = 3;
  double pre_lr = 0.02;
  long long train_n = 0;
  com.add(c_train);
  c_train->add_option("--save", save_path, "write the retrained model here");
  c_train->add_option("--pretrain-epochs", pre_epochs,
                      "clean pretraining epochs when no model file is given");
  c_train->add_option("--pretrain-lr", pre_lr, "clean pretraining rate");
  c_train->add_option("--train-n", train_n, "cap on training samples");

  auto* c_eval = app.add_subcommand(
      "eval", "accuracy under the configured faults and redundancy");
  com.add(c_eval);

  auto* c_sweep =
      app.add_subcommand("sweep", "run an experiment grid; writes CSV");
  std::string kind;
  std::vector<std::string> kvs;
  com.add(c_sweep);
  c_sweep->add_option("--kind", kind, "experiment kind")->required();
  c_sweep->add_option("--param", kvs, "experiment parameter key=value");

  auto* c_select = app.add_subcommand(
      "select", "greedy critical-layer protection plan under --rmax");
  com.add(c_select);

  auto* c_bench = app.add_subcommand(
      "bench-channel", "modeled transfer seconds per profile and size");
  com.add(c_bench);

  auto* c_codec = app.add_subcommand(
      "codec-stats", "per-layer similarity and encoding on one batch");
  com.add(c_codec);

  auto* c_serve =
      app.add_subcommand("serve", "run the device side over TCP");
  std::string bind_flag;
  com.add(c_serve);
  c_serve->add_option("--bind", bind_flag,
                      "host:port (default $R2F_BIND or 127.0.0.1:7425)");

  auto* c_connect = app.add_subcommand(
      "connect", "run the trainer against a remote device over TCP");
  std::string connect_flag, connect_save;
  long long connect_data_n = 0;
  com.add(c_connect);
  c_connect->add_option("--connect", connect_flag,
                        "host:port (default $R2F_CONNECT or 127.0.0.1:7425)");
  c_connect->add_option("--save", connect_save, "write the retrained model");
  c_connect->add_option("--data-n", connect_data_n,
                        "device dataset size (default data.synth_n)");

  auto* c_gen = app.add_subcommand("gen-data", "write a synthetic IDX pair");
  std::string gen_images = "images.idx", gen_labels = "labels.idx";
  long long gen_n = 512;
  int gen_hw = 28;
  com.add(c_gen);
  c_gen->add_option("--images", gen_images, "IDX image output path");
  c_gen->add_option("--labels", gen_labels, "IDX label output path");
  c_gen->add_option("--n", gen_n, "sample count");
  c_gen->add_option("--hw", gen_hw, "image height/width");

  auto* c_pretrain = app.add_subcommand(
      "pretrain", "clean quantization-aware pretraining; saves the model");
  std::string pre_save = "model.r2fm";
  int pre2_epochs = 3;
  double pre2_lr = 0.02;
  com.add(c_pretrain);
  c_pretrain->add_option("--save", pre_save, "model output path");
  c_pretrain->add_option("--epochs", pre2_epochs, "pretraining epochs");
  c_pretrain->add_option("--lr", pre2_lr, "pretraining rate");

  auto* c_report =
      app.add_subcommand("report", "mean/stddev summary of an experiment CSV");
  std::string report_in;
  com.add(c_report);
  c_report->add_option("--in", report_in, "CSV produced by sweep")->required();

  auto* c_confdoc = app.add_subcommand(
      "config-doc", "print every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int r = app.exit(e);
    return r == 0 ? 0 : 2;
  }

  try {
    if (*c_train) {
      AppConfig cfg = com.make_config();
      QuantModel m0 = load_or_build(cfg);
      Dataset data = field_data(cfg, m0.in_h);
      if (cfg.model_path.empty() && pre_epochs > 0)
        m0 = pretrain_clean(m0, factory_data(cfg, m0.in_h), pre_epochs,
                            pre_lr, 0.9, cfg.train.batch_size);
      Dataset tr = (train_n > 0 && size_t(train_n) < data.size())
                       ? slice(data, 0, size_t(train_n))
                       : data;
      auto rr = retrain(m0, tr, retrain_defaults(cfg.train));
      emit(metrics_csv(rr), com.out_path);
      if (!save_path.empty()) write_file(save_path, rr.model.serialize());
    } else if (*c_eval) {
      AppConfig cfg = com.make_config();
      QuantModel m = load_or_build(cfg);
      Dataset ev = heldout_data(cfg, m.in_h);
      auto res = evaluate(m, ev, cfg.train.fault, cfg.train.policy,
                          size_t(cfg.train.eval_n));
      std::printf("top1=%.6g top5=%.6g n=%zu\n", res.top1, res.top5, res.n);
    } else if (*c_sweep) {
      AppConfig cfg = com.make_config();
      ExperimentSpec spec;
      spec.kind = kind;
      for (const auto& kv : kvs) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos)
          throw ConfigError("--param expects key=value, got '" + kv + "'");
        spec.params[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      spec.out_path =
          com.out_path.empty() ? kind + ".csv" : com.out_path;
      std::string csv = run_experiment(spec, cfg);
      std::fputs(report_csv(csv).c_str(), stdout);
      std::fprintf(stderr, "wrote %s\n", spec.out_path.c_str());
    } else if (*c_select) {
      AppConfig cfg = com.make_config();
      QuantModel m = load_or_build(cfg);
      Dataset ev = heldout_data(cfg, m.in_h);
      auto g = greedy_select(m, ev, cfg.train.fault, cfg.select_rmax,
                             cfg.select_n_eval, cfg.train.seed);
      std::printf("%s\n", plan_to_string(g.plan).c_str());
      std::printf("evaluations=%d extra_compute=%.1f%%\n",
                  g.evaluation_count, g.plan.extra_compute_pct());
    } else if (*c_bench) {
      AppConfig cfg = com.make_config();
      std::string csv = "profile,payload_bytes,uplink_s,downlink_s\n";
      std::vector<std::string> profs =
          Common::given(com.o_prof) ? std::vector<std::string>{com.profile}
                              : std::vector<std::string>{"lora", "wpan",
                                                         "hspa", "lte"};
      char buf[160];
      for (const auto& p : profs) {
        ChannelConfig ch = ChannelConfig::profile(p);
        for (uint64_t bytes : {uint64_t(1000), uint64_t(100000),
                               uint64_t(720000)}) {
          std::snprintf(buf, sizeof(buf), "%s,%llu,%.9g,%.9g\n", p.c_str(),
                        (unsigned long long)bytes,
                        transmit_time(bytes, Direction::Up, ch),
                        transmit_time(bytes, Direction::Down, ch));
          csv += buf;
        }
      }
      emit(csv, com.out_path);
    } else if (*c_codec) {
      AppConfig cfg = com.make_config();
      QuantModel m = load_or_build(cfg);
      Dataset data = field_data(cfg, m.in_h);
      size_t bs = std::min<size_t>(size_t(cfg.train.batch_size), data.size());
      TensorQ x = batch_images(data, 0, bs);
      TmrCapture cap =
          tmr_forward(m, x, cfg.train.fault, cfg.train.policy, 0);
      std::string csv =
          "layer,kind,similarity,encoding,raw_bytes,encoded_bytes\n";
      uint64_t raw_total = 0, enc_total = 0;
      char buf[200];
      for (size_t i = 0; i < cap.layers.size(); ++i) {
        IncrementPacket pkt = choose_encoding(cap, int(i),
                                              cfg.train.similarity_threshold);
        uint64_t raw = cap.layers[i].copy0.size();
        raw_total += raw;
        enc_total += pkt.payload.size();
        std::snprintf(buf, sizeof(buf), "%zu,%s,%.6g,%s,%llu,%zu\n", i,
                      layer_kind_name(m.layers[i].kind),
                      cap.layers[i].similarity,
                      pkt.encoding == Encoding::Sparse ? "sparse" : "raw",
                      (unsigned long long)raw, pkt.payload.size());
        csv += buf;
      }
      std::snprintf(buf, sizeof(buf), "total,,,,%llu,%llu\n",
                    (unsigned long long)raw_total,
                    (unsigned long long)enc_total);
      csv += buf;
      emit(csv, com.out_path);
    } else if (*c_serve) {
      return do_serve(com, bind_flag);
    } else if (*c_connect) {
      return do_connect(com, connect_flag, connect_save, connect_data_n);
    } else if (*c_gen) {
      AppConfig cfg = com.make_config();
      Dataset d = synth_dataset(size_t(gen_n), cfg.data_seed,
                                cfg.data_classes, gen_hw);
      save_idx(d, gen_images, gen_labels);
      std::fprintf(stderr, "wrote %lld samples to %s / %s\n", gen_n,
                   gen_images.c_str(), gen_labels.c_str());
    } else if (*c_pretrain) {
      AppConfig cfg = com.make_config();
      QuantModel m0 = build_model(cfg.model_arch, cfg.train.seed);
      QuantModel m =
          pretrain_clean(m0, factory_data(cfg, m0.in_h), pre2_epochs,
                         pre2_lr, 0.9, cfg.train.batch_size);
      write_file(pre_save, m.serialize());
      FaultConfig clean;
      clean.ber = 0;
      auto res = evaluate(m, heldout_data(cfg, m.in_h), clean, TmrPolicy{},
                          size_t(cfg.train.eval_n));
      std::printf("clean_top1=%.6g clean_top5=%.6g saved=%s\n", res.top1,
                  res.top5, pre_save.c_str());
    } else if (*c_report) {
      Bytes b = read_file(report_in);
      std::string csv(reinterpret_cast<const char*>(b.data()), b.size());
      std::fputs(report_csv(csv).c_str(), stdout);
    } else if (*c_confdoc) {
      std::fputs(config_defaults_doc().c_str(), stdout);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
