#include "r2f/experiments.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "r2f/dataset.hpp"
#include "r2f/rng.hpp"
#include "r2f/select.hpp"
#include "r2f/zoo.hpp"

namespace r2f {

namespace {

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

const std::string& param(const std::map<std::string, std::string>& p,
                         const std::string& key, const std::string& def) {
  auto it = p.find(key);
  static thread_local std::string hold;
  hold = it == p.end() ? def : it->second;
  return hold;
}

std::vector<double> param_list_d(const std::map<std::string, std::string>& p,
                                 const std::string& key,
                                 const std::string& def) {
  std::vector<double> out;
  for (const auto& s : split(param(p, key, def), ',')) {
    try {
      size_t pos = 0;
      out.push_back(std::stod(s, &pos));
      if (pos != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ConfigError("experiment parameter '" + key + "': bad number '" +
                        s + "'");
    }
  }
  if (out.empty())
    throw ConfigError("experiment parameter '" + key + "': empty grid");
  return out;
}

std::vector<long long> param_list_i(
    const std::map<std::string, std::string>& p, const std::string& key,
    const std::string& def) {
  std::vector<long long> out;
  for (double x : param_list_d(p, key, def)) out.push_back((long long)x);
  return out;
}

long long param_i(const std::map<std::string, std::string>& p,
                  const std::string& key, const std::string& def) {
  return param_list_i(p, key, def).at(0);
}

double param_d(const std::map<std::string, std::string>& p,
               const std::string& key, const std::string& def) {
  return param_list_d(p, key, def).at(0);
}

/// Shared run context: the pretrained base model plus train/eval sets.
struct Ctx {
  AppConfig base;
  QuantModel m0;
  Dataset train;
  Dataset eval;
};

Ctx make_ctx(const AppConfig& base,
             const std::map<std::string, std::string>& p) {
  Ctx ctx{base, QuantModel{}, Dataset{}, Dataset{}};
  if (!base.model_path.empty()) {
    Bytes blob = read_file(base.model_path);
    ctx.m0 = QuantModel::deserialize(blob);
  } else {
    ctx.m0 = build_model(base.model_arch, base.train.seed);
  }
  ctx.train = field_data(base, ctx.m0.in_h);
  ctx.eval = heldout_data(base, ctx.m0.in_h);
  int pe = int(param_i(p, "pretrain_epochs", "3"));
  double plr = param_d(p, "pretrain_lr", "0.02");
  if (pe > 0)
    ctx.m0 = pretrain_clean(ctx.m0, factory_data(base, ctx.m0.in_h), pe, plr,
                            0.9, base.train.batch_size);
  return ctx;
}

Dataset train_subset(const Ctx& ctx,
                     const std::map<std::string, std::string>& p) {
  long long n = param_i(p, "train_n", "0");
  if (n > 0 && size_t(n) < ctx.train.size())
    return slice(ctx.train, 0, size_t(n));
  return ctx.train;
}

TrainingConfig with_seed_ber(const TrainingConfig& t, uint64_t seed,
                             double ber) {
  TrainingConfig c = retrain_defaults(t);
  c.seed = seed;
  c.fault.seed = seed;
  c.fault.ber = ber;
  return c;
}

/// Held-out evaluation faults: independent of the training streams.
FaultConfig eval_fault(const FaultConfig& f, uint64_t seed, double ber) {
  FaultConfig e = f;
  e.seed = mix_key(seed, 0x6576);
  e.ber = ber;
  return e;
}

std::vector<uint64_t> seed_list(const std::map<std::string, std::string>& p) {
  std::vector<uint64_t> out;
  for (long long s : param_list_i(p, "seeds", "1")) out.push_back(uint64_t(s));
  return out;
}

void check_params(const std::string& kind,
                  const std::map<std::string, std::string>& p,
                  std::initializer_list<const char*> extra) {
  std::set<std::string> ok = {"seeds", "pretrain_epochs", "pretrain_lr",
                              "train_n"};
  for (const char* k : extra) ok.insert(k);
  for (const auto& [k, v] : p)
    if (!ok.count(k))
      throw ConfigError("experiment '" + kind + "': unknown parameter '" + k +
                        "'");
}

const TmrPolicy kNoTmr{};  // deployed-model evaluation: single faulty run

std::string run_ber_sweep(const ExperimentSpec& spec, const AppConfig& base) {
  check_params(spec.kind, spec.params, {"bers"});
  auto bers = param_list_d(spec.params, "bers", "0,1e-6,1e-5,1e-4");
  auto seeds = seed_list(spec.params);
  Ctx ctx = make_ctx(base, spec.params);
  std::string csv = "ber,seed,top1,top5\n";
  for (double ber : bers)
    for (uint64_t seed : seeds) {
      auto res = evaluate(ctx.m0, ctx.eval,
                          eval_fault(base.train.fault, seed, ber),
                          base.train.policy, size_t(base.train.eval_n));
      csv += fmt(ber) + "," + std::to_string(seed) + "," + fmt(res.top1) +
             "," + fmt(res.top5) + "\n";
    }
  return csv;
}

std::string run_retrain(const ExperimentSpec& spec, const AppConfig& base) {
  check_params(spec.kind, spec.params, {"bers"});
  auto bers = param_list_d(spec.params, "bers", "1e-4,3e-4");
  auto seeds = seed_list(spec.params);
  Ctx ctx = make_ctx(base, spec.params);
  Dataset tr = train_subset(ctx, spec.params);
  std::string csv = "ber,seed,unretrained_top1,retrained_top1\n";
  for (double ber : bers)
    for (uint64_t seed : seeds) {
      FaultConfig ef = eval_fault(base.train.fault, seed, ber);
      auto before = evaluate(ctx.m0, ctx.eval, ef, kNoTmr,
                             size_t(base.train.eval_n));
      auto rr = retrain(ctx.m0, tr, with_seed_ber(base.train, seed, ber));
      auto after =
          evaluate(rr.model, ctx.eval, ef, kNoTmr, size_t(base.train.eval_n));
      csv += fmt(ber) + "," + std::to_string(seed) + "," + fmt(before.top1) +
             "," + fmt(after.top1) + "\n";
    }
  return csv;
}

std::string run_matched(const ExperimentSpec& spec, const AppConfig& base) {
  check_params(spec.kind, spec.params, {"train_bers", "eval_bers"});
  auto tbs = param_list_d(spec.params, "train_bers", "1e-6,5e-5");
  auto ebs = param_list_d(spec.params, "eval_bers", "1e-6,5e-5");
  auto seeds = seed_list(spec.params);
  Ctx ctx = make_ctx(base, spec.params);
  Dataset tr = train_subset(ctx, spec.params);
  std::string csv = "train_ber,eval_ber,seed,top1\n";
  for (double tb : tbs)
    for (uint64_t seed : seeds) {
      auto rr = retrain(ctx.m0, tr, with_seed_ber(base.train, seed, tb));
      for (double eb : ebs) {
        auto res = evaluate(rr.model, ctx.eval,
                            eval_fault(base.train.fault, seed, eb), kNoTmr,
                            size_t(base.train.eval_n));
        csv += fmt(tb) + "," + fmt(eb) + "," + std::to_string(seed) + "," +
               fmt(res.top1) + "\n";
      }
    }
  return csv;
}

std::string run_time_decomposition(const ExperimentSpec& spec,
                                   const AppConfig& base) {
  check_params(spec.kind, spec.params, {"bers", "profiles"});
  auto bers = param_list_d(spec.params, "bers", "1e-6,1e-4");
  auto profiles = split(param(spec.params, "profiles", "wpan"), ',');
  auto seeds = seed_list(spec.params);
  Ctx ctx = make_ctx(base, spec.params);
  Dataset tr = train_subset(ctx, spec.params);
  std::string csv =
      "profile,codec,ber,seed,fp,tmr,increment,codec_s,uplink,bp,downlink,"
      "total,bytes_up,bytes_down\n";
  for (const auto& prof : profiles)
    for (bool codec_on : {true, false})
      for (double ber : bers)
        for (uint64_t seed : seeds) {
          TrainingConfig tc = with_seed_ber(base.train, seed, ber);
          tc.channel = ChannelConfig::profile(prof);
          tc.codec_enabled = codec_on;
          auto rr = retrain(ctx.m0, tr, tc);
          StageTiming agg;
          for (const auto& im : rr.metrics) agg += im.timing;
          csv += prof + "," + (codec_on ? "on" : "off") + "," + fmt(ber) +
                 "," + std::to_string(seed) + "," + fmt(agg.fp) + "," +
                 fmt(agg.tmr) + "," + fmt(agg.increment) + "," +
                 fmt(agg.codec) + "," + fmt(agg.uplink) + "," + fmt(agg.bp) +
                 "," + fmt(agg.downlink) + "," + fmt(agg.total()) + "," +
                 std::to_string(agg.bytes_up) + "," +
                 std::to_string(agg.bytes_down) + "\n";
        }
  return csv;
}

std::string run_threshold_study(const ExperimentSpec& spec,
                                const AppConfig& base) {
  check_params(spec.kind, spec.params, {"thresholds", "ber"});
  auto ths = param_list_d(spec.params, "thresholds", "0,0.2,0.4,0.6,0.8,1");
  double ber = param_d(spec.params, "ber", "1e-4");
  auto seeds = seed_list(spec.params);
  Ctx ctx = make_ctx(base, spec.params);
  Dataset tr = train_subset(ctx, spec.params);
  std::string csv = "threshold,seed,bytes_up,retrained_top1\n";
  for (double th : ths)
    for (uint64_t seed : seeds) {
      TrainingConfig tc = with_seed_ber(base.train, seed, ber);
      tc.similarity_threshold = th;
      auto rr = retrain(ctx.m0, tr, tc);
      uint64_t up = 0;
      for (const auto& im : rr.metrics) up += im.timing.bytes_up;
      auto res = evaluate(rr.model, ctx.eval,
                          eval_fault(base.train.fault, seed, ber), kNoTmr,
                          size_t(base.train.eval_n));
      csv += fmt(th) + "," + std::to_string(seed) + "," + std::to_string(up) +
             "," + fmt(res.top1) + "\n";
    }
  return csv;
}

std::string run_batch_sweep(const ExperimentSpec& spec,
                            const AppConfig& base) {
  check_params(spec.kind, spec.params, {"batches", "ber"});
  auto batches = param_list_i(spec.params, "batches", "2,4,8,16");
  double ber = param_d(spec.params, "ber", "1e-4");
  auto seeds = seed_list(spec.params);
  Ctx ctx = make_ctx(base, spec.params);
  Dataset tr = train_subset(ctx, spec.params);
  std::string csv = "batch,seed,retrained_top1\n";
  for (long long b : batches)
    for (uint64_t seed : seeds) {
      TrainingConfig tc = with_seed_ber(base.train, seed, ber);
      tc.batch_size = int(b);
      auto rr = retrain(ctx.m0, tr, tc);
      auto res = evaluate(rr.model, ctx.eval,
                          eval_fault(base.train.fault, seed, ber), kNoTmr,
                          size_t(base.train.eval_n));
      csv += std::to_string(b) + "," + std::to_string(seed) + "," +
             fmt(res.top1) + "\n";
    }
  return csv;
}

std::string run_epoch_sweep(const ExperimentSpec& spec,
                            const AppConfig& base) {
  check_params(spec.kind, spec.params, {"epochs", "ber"});
  auto epochs = param_list_i(spec.params, "epochs", "1,2,3");
  double ber = param_d(spec.params, "ber", "1e-4");
  auto seeds = seed_list(spec.params);
  Ctx ctx = make_ctx(base, spec.params);
  Dataset tr = train_subset(ctx, spec.params);
  std::string csv = "epochs,seed,retrained_top1\n";
  for (long long e : epochs)
    for (uint64_t seed : seeds) {
      TrainingConfig tc = with_seed_ber(base.train, seed, ber);
      tc.epochs = int(e);
      auto rr = retrain(ctx.m0, tr, tc);
      auto res = evaluate(rr.model, ctx.eval,
                          eval_fault(base.train.fault, seed, ber), kNoTmr,
                          size_t(base.train.eval_n));
      csv += std::to_string(e) + "," + std::to_string(seed) + "," +
             fmt(res.top1) + "\n";
    }
  return csv;
}

std::string run_tmr_compare(const ExperimentSpec& spec,
                            const AppConfig& base) {
  check_params(spec.kind, spec.params, {"bers"});
  auto bers = param_list_d(spec.params, "bers", "1e-5,1e-4,1e-3");
  auto seeds = seed_list(spec.params);
  Ctx ctx = make_ctx(base, spec.params);
  size_t nb = std::min<size_t>(8, ctx.eval.size());
  TensorQ x = batch_images(ctx.eval, 0, nb);
  std::string csv = "ber,seed,lw_final,nw_final\n";
  for (double ber : bers)
    for (uint64_t seed : seeds) {
      FaultConfig f = eval_fault(base.train.fault, seed, ber);
      auto lw = similarity_profile(ctx.m0, x, f, TmrVariant::LayerWise);
      auto nw = similarity_profile(ctx.m0, x, f, TmrVariant::NetworkWise);
      csv += fmt(ber) + "," + std::to_string(seed) + "," + fmt(lw.back()) +
             "," + fmt(nw.back()) + "\n";
    }
  return csv;
}

std::string run_select_layers(const ExperimentSpec& spec,
                              const AppConfig& base) {
  check_params(spec.kind, spec.params, {"rmax", "ber", "n_eval"});
  auto rmaxes = param_list_d(spec.params, "rmax", fmt(base.select_rmax));
  double ber = param_d(spec.params, "ber", "1e-3");
  int n_eval =
      int(param_i(spec.params, "n_eval", std::to_string(base.select_n_eval)));
  auto seeds = seed_list(spec.params);
  Ctx ctx = make_ctx(base, spec.params);
  std::string csv = "rmax,seed,evaluations,r,top1,plan\n";
  for (double rmax : rmaxes)
    for (uint64_t seed : seeds) {
      FaultConfig f = base.train.fault;
      f.ber = ber;
      f.seed = seed;
      auto g = greedy_select(ctx.m0, ctx.eval, f, rmax, n_eval, seed);
      TmrPolicy pol{TmrVariant::LayerWise, g.plan.S, false};
      auto res = evaluate(ctx.m0, ctx.eval, eval_fault(f, seed, ber), pol,
                          size_t(base.train.eval_n));
      std::string plan = "S";
      for (size_t i = 0; i < g.plan.S.size(); ++i)
        plan += (i ? "|" : "") + std::to_string(g.plan.S[i]);
      csv += fmt(rmax) + "," + std::to_string(seed) + "," +
             std::to_string(g.evaluation_count) + "," + fmt(g.plan.r) + "," +
             fmt(res.top1) + "," + plan + "\n";
    }
  return csv;
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {
      "ber_sweep",       "retrain",      "matched_vs_unmatched",
      "time_decomposition", "threshold_study", "batch_sweep",
      "epoch_sweep",     "tmr_compare",  "select_layers"};
  return kinds;
}

std::string run_experiment(const ExperimentSpec& spec, const AppConfig& base) {
  std::string csv;
  if (spec.kind == "ber_sweep")
    csv = run_ber_sweep(spec, base);
  else if (spec.kind == "retrain")
    csv = run_retrain(spec, base);
  else if (spec.kind == "matched_vs_unmatched")
    csv = run_matched(spec, base);
  else if (spec.kind == "time_decomposition")
    csv = run_time_decomposition(spec, base);
  else if (spec.kind == "threshold_study")
    csv = run_threshold_study(spec, base);
  else if (spec.kind == "batch_sweep")
    csv = run_batch_sweep(spec, base);
  else if (spec.kind == "epoch_sweep")
    csv = run_epoch_sweep(spec, base);
  else if (spec.kind == "tmr_compare")
    csv = run_tmr_compare(spec, base);
  else if (spec.kind == "select_layers")
    csv = run_select_layers(spec, base);
  else
    throw ConfigError("unknown experiment kind '" + spec.kind + "'");
  if (!spec.out_path.empty()) {
    std::ofstream out(spec.out_path, std::ios::binary | std::ios::trunc);
    if (!out)
      throw ConfigError("cannot write CSV to '" + spec.out_path + "'");
    out << csv;
  }
  return csv;
}

std::string report_csv(const std::string& csv) {
  std::vector<std::string> lines;
  for (auto& l : split(csv, '\n')) {
    std::string t = l;
    if (!t.empty() && t.back() == '\r') t.pop_back();
    if (!t.empty()) lines.push_back(t);
  }
  if (lines.empty()) throw ConfigError("report: empty CSV");
  auto header = split(lines[0], ',');
  size_t seed_col = header.size();
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == "seed") seed_col = i;
  if (seed_col == header.size())
    throw ConfigError("report: CSV has no 'seed' column");

  const size_t nm = header.size() - seed_col - 1;
  std::vector<bool> numeric(nm, true);
  // group key -> per-metric sample lists
  std::map<std::string, std::vector<std::vector<double>>> groups;
  for (size_t r = 1; r < lines.size(); ++r) {
    auto cols = split(lines[r], ',');
    if (cols.size() != header.size())
      throw ConfigError("report: row " + std::to_string(r) + " has " +
                        std::to_string(cols.size()) + " columns, header has " +
                        std::to_string(header.size()));
    std::string key;
    for (size_t i = 0; i < seed_col; ++i) key += (i ? "," : "") + cols[i];
    auto& vs = groups[key];
    if (vs.empty()) vs.resize(nm);
    for (size_t j = 0; j < nm; ++j) {
      const std::string& v = cols[seed_col + 1 + j];
      try {
        size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        vs[j].push_back(x);
      } catch (const std::exception&) {
        numeric[j] = false;
      }
    }
  }
  std::string out;
  for (size_t i = 0; i < seed_col; ++i) out += (i ? "," : "") + header[i];
  out += ",n";
  for (size_t j = 0; j < nm; ++j)
    if (numeric[j])
      out += "," + header[seed_col + 1 + j] + "_mean," +
             header[seed_col + 1 + j] + "_std";
  out += "\n";
  for (const auto& [key, vs] : groups) {
    size_t n = 0;
    for (size_t j = 0; j < nm; ++j)
      if (numeric[j]) n = std::max(n, vs[j].size());
    out += key + "," + std::to_string(n);
    for (size_t j = 0; j < nm; ++j)
      if (numeric[j])
        out += "," + fmt(mean(vs[j])) + "," + fmt(stddev(vs[j]));
    out += "\n";
  }
  return out;
}

}  // namespace r2f
