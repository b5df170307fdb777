#include "r2f/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "r2f/dataset.hpp"
#include "r2f/rng.hpp"

namespace r2f {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad number '" + v + "'");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  long long x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
  return x;
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("config key '" + key + "': bad unsigned '" + v + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': bad bool '" + v +
                    "' (use true/false/1/0)");
}

void apply_key(AppConfig& c, const std::string& key, const std::string& v) {
  TrainingConfig& t = c.train;
  if (key == "fault.ber") {
    t.fault.ber = parse_double(key, v);
  } else if (key == "fault.seed") {
    t.fault.seed = parse_u64(key, v);
  } else if (key == "fault.sites") {
    t.fault.site_inputs = t.fault.site_weights = t.fault.site_outputs = false;
    if (v == "all") {
      t.fault.site_inputs = t.fault.site_weights = t.fault.site_outputs = true;
    } else if (v != "none") {
      for (const auto& s : split_commas(v)) {
        if (s == "input")
          t.fault.site_inputs = true;
        else if (s == "weight")
          t.fault.site_weights = true;
        else if (s == "output")
          t.fault.site_outputs = true;
        else
          throw ConfigError("config key 'fault.sites': unknown site '" + s +
                            "' (input, weight, output)");
      }
    }
  } else if (key == "fault.mode") {
    if (v == "per_tensor")
      t.fault.mode = FaultMode::PerTensorPerLayer;
    else if (v == "per_mac")
      t.fault.mode = FaultMode::PerMac;
    else
      throw ConfigError("config key 'fault.mode': unknown mode '" + v +
                        "' (per_tensor, per_mac)");
  } else if (key == "tmr.variant") {
    if (v == "none")
      t.policy.variant = TmrVariant::None;
    else if (v == "nw")
      t.policy.variant = TmrVariant::NetworkWise;
    else if (v == "lw")
      t.policy.variant = TmrVariant::LayerWise;
    else
      throw ConfigError("config key 'tmr.variant': unknown variant '" + v +
                        "' (none, nw, lw)");
  } else if (key == "tmr.protected_layers") {
    t.policy.protected_layers.clear();
    if (v != "all") {
      for (const auto& s : split_commas(v))
        t.policy.protected_layers.push_back(int(parse_int(key, s)));
    }
  } else if (key == "tmr.designated_copy") {
    if (v == "copy0")
      t.policy.independent_faulty = false;
    else if (v == "independent")
      t.policy.independent_faulty = true;
    else
      throw ConfigError("config key 'tmr.designated_copy': '" + v +
                        "' (copy0, independent)");
  } else if (key == "codec.enabled") {
    t.codec_enabled = parse_bool(key, v);
  } else if (key == "codec.threshold") {
    t.similarity_threshold = parse_double(key, v);
  } else if (key == "channel.profile") {
    t.channel = ChannelConfig::profile(v);
  } else if (key == "channel.up_bps") {
    t.channel.up_bps = parse_double(key, v);
  } else if (key == "channel.down_bps") {
    t.channel.down_bps = parse_double(key, v);
  } else if (key == "channel.latency_s") {
    t.channel.latency_s = parse_double(key, v);
  } else if (key == "train.batch_size") {
    t.batch_size = int(parse_int(key, v));
  } else if (key == "train.epochs") {
    t.epochs = int(parse_int(key, v));
  } else if (key == "train.lr") {
    t.lr = parse_double(key, v);
  } else if (key == "train.momentum") {
    t.momentum = parse_double(key, v);
  } else if (key == "train.seed") {
    t.seed = parse_u64(key, v);
  } else if (key == "eval.n") {
    t.eval_n = int(parse_int(key, v));
  } else if (key == "model.arch") {
    c.model_arch = v;
  } else if (key == "model.path") {
    c.model_path = v;
  } else if (key == "data.images") {
    c.data_images = v;
  } else if (key == "data.labels") {
    c.data_labels = v;
  } else if (key == "data.synth_n") {
    c.data_synth_n = int(parse_int(key, v));
  } else if (key == "data.classes") {
    c.data_classes = int(parse_int(key, v));
  } else if (key == "data.seed") {
    c.data_seed = parse_u64(key, v);
  } else if (key == "select.rmax") {
    c.select_rmax = parse_double(key, v);
  } else if (key == "select.n_eval") {
    c.select_n_eval = int(parse_int(key, v));
  } else if (key == "device.mac_rate") {
    t.rates.mac_rate = parse_double(key, v);
  } else if (key == "device.vote_rate") {
    t.rates.vote_rate = parse_double(key, v);
  } else if (key == "device.sub_rate") {
    t.rates.sub_rate = parse_double(key, v);
  } else if (key == "device.codec_rate") {
    t.rates.codec_rate = parse_double(key, v);
  } else if (key == "device.server_flop_rate") {
    t.rates.server_flop_rate = parse_double(key, v);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

}  // namespace

AppConfig parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (size_t h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key=value, got '" + line + "'");
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  AppConfig cfg;
  // Profile first so explicit channel.* keys override it at any position.
  for (const auto& [k, v] : entries)
    if (k == "channel.profile") apply_key(cfg, k, v);
  for (const auto& [k, v] : entries)
    if (k != "channel.profile") apply_key(cfg, k, v);
  return cfg;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void set_master_seed(AppConfig& cfg, uint64_t seed) {
  cfg.train.seed = seed;
  cfg.train.fault.seed = seed;
}

Dataset field_data(const AppConfig& cfg, int hw) {
  if (!cfg.data_images.empty())
    return load_idx(cfg.data_images, cfg.data_labels);
  return synth_dataset(size_t(cfg.data_synth_n), cfg.data_seed,
                       cfg.data_classes, hw);
}

Dataset factory_data(const AppConfig& cfg, int hw) {
  if (!cfg.data_images.empty())
    return load_idx(cfg.data_images, cfg.data_labels);
  return synth_dataset(size_t(cfg.data_synth_n),
                       mix_key(cfg.data_seed, 0x707265), cfg.data_classes,
                       hw);
}

Dataset heldout_data(const AppConfig& cfg, int hw) {
  if (!cfg.data_images.empty())
    return load_idx(cfg.data_images, cfg.data_labels);
  return synth_dataset(size_t(std::max(cfg.train.eval_n, 1)),
                       mix_key(cfg.data_seed, 0x6576), cfg.data_classes, hw);
}

std::string config_defaults_doc() {
  AppConfig d;
  char buf[4096];
  std::snprintf(
      buf, sizeof(buf),
      "# Flat key=value configuration; '#' starts a comment.\n"
      "# Fault injection\n"
      "fault.ber=%g              # bit error rate per stored/transferred bit\n"
      "fault.seed=%llu              # fault stream seed\n"
      "fault.sites=all           # comma list of input,weight,output; or "
      "all/none\n"
      "fault.mode=per_tensor     # per_tensor | per_mac\n"
      "# Redundancy policy\n"
      "tmr.variant=none          # none | nw | lw (retraining upgrades none "
      "to lw: increments need a voted reference)\n"
      "tmr.protected_layers=all  # comma list of layer indices, or all\n"
      "tmr.designated_copy=copy0 # copy0 | independent\n"
      "# Increment codec\n"
      "codec.enabled=true\n"
      "codec.threshold=%g      # minimum similarity for sparse encoding\n"
      "# Channel\n"
      "channel.profile=wpan      # lora | wpan | hspa | lte\n"
      "channel.up_bps=%g\n"
      "channel.down_bps=%g\n"
      "channel.latency_s=%g\n"
      "# Training\n"
      "train.batch_size=%d\n"
      "train.epochs=%d\n"
      "train.lr=%g\n"
      "train.momentum=%g\n"
      "train.seed=%llu\n"
      "eval.n=%d                # samples per accuracy evaluation\n"
      "# Model\n"
      "model.arch=tiny-net       # tiny-net | tiny-resnet | toy8\n"
      "model.path=               # load a serialized model instead\n"
      "# Data (IDX files; empty paths use the synthetic set)\n"
      "data.images=\n"
      "data.labels=\n"
      "data.synth_n=%d\n"
      "data.classes=%d\n"
      "data.seed=%llu\n"
      "# Layer selection\n"
      "select.rmax=%g\n"
      "select.n_eval=%d\n"
      "# Modeled device/server speeds\n"
      "device.mac_rate=%g\n"
      "device.vote_rate=%g\n"
      "device.sub_rate=%g\n"
      "device.codec_rate=%g\n"
      "device.server_flop_rate=%g\n",
      d.train.fault.ber, (unsigned long long)d.train.fault.seed,
      d.train.similarity_threshold, d.train.channel.up_bps,
      d.train.channel.down_bps, d.train.channel.latency_s, d.train.batch_size,
      d.train.epochs, d.train.lr, d.train.momentum,
      (unsigned long long)d.train.seed, d.train.eval_n, d.data_synth_n,
      d.data_classes, (unsigned long long)d.data_seed, d.select_rmax,
      d.select_n_eval, d.train.rates.mac_rate, d.train.rates.vote_rate,
      d.train.rates.sub_rate, d.train.rates.codec_rate,
      d.train.rates.server_flop_rate);
  return buf;
}

}  // namespace r2f
