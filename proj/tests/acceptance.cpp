// Acceptance gate: ten end-to-end criteria over the full stack, one printed
// verdict line each. Every tolerance is pinned here, next to the check it
// gates. Exit status is the number of failed criteria.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "r2f/codec.hpp"
#include "r2f/config.hpp"
#include "r2f/dataset.hpp"
#include "r2f/fault.hpp"
#include "r2f/protocol.hpp"
#include "r2f/rng.hpp"
#include "r2f/runtime.hpp"
#include "r2f/select.hpp"
#include "r2f/tmr.hpp"
#include "r2f/util.hpp"
#include "r2f/zoo.hpp"

using namespace r2f;

namespace {

struct Verdict {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) {
    detail += (detail.empty() ? "" : "; ") + what;
  }
};

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", x);
  return buf;
}

const TmrPolicy kBare{};  // no redundancy: deployed-model evaluation
const TmrPolicy kLwAll{TmrVariant::LayerWise, {}, false};

// ---------------------------------------------------------------------------
// C1: the majority voter is bitwise-exact and its residual error rate after
// voting three independently corrupted copies matches 3b^2(1-b) + b^3.
// ---------------------------------------------------------------------------
Verdict c1_voter() {
  Verdict v;
  Rng rng(0xC1);
  const int n = 100000;
  TensorQ a(Shape{1, 1, 1, n}), b(a.shape), c(a.shape);
  for (int i = 0; i < n; ++i) {
    a.data[i] = int8_t(rng.next_u64());
    b.data[i] = int8_t(rng.next_u64());
    c.data[i] = int8_t(rng.next_u64());
  }
  TensorQ voted = vote3(a, b, c);
  int bad = 0;
  for (int i = 0; i < n; ++i) {
    uint8_t x = uint8_t(a.data[i]), y = uint8_t(b.data[i]),
            z = uint8_t(c.data[i]);
    uint8_t maj = uint8_t((x & y) | (x & z) | (y & z));
    if (uint8_t(voted.data[i]) != maj) ++bad;
  }
  v.require(bad == 0, std::to_string(bad) + " of " + std::to_string(n) +
                          " voted bytes differ from bitwise majority");

  // Residual rate at b = 1e-2 over 1e7 bits: expect 2.98e-4, gate [2e-4,4e-4].
  const size_t bytes = 1250000;
  TensorQ clean(Shape{1, 1, 1250, 1000});
  for (size_t i = 0; i < bytes; ++i) clean.data[i] = int8_t(i * 29 + 11);
  TensorQ c0 = clean, c1 = clean, c2 = clean;
  flip_tensor(c0, 1e-2, 101);
  flip_tensor(c1, 1e-2, 202);
  flip_tensor(c2, 1e-2, 303);
  double residual = effective_ber(clean, vote3(c0, c1, c2));
  v.require(residual >= 2e-4 && residual <= 4e-4,
            "residual " + num(residual) + " outside [2e-4, 4e-4]");
  v.note("residual post-vote rate " + num(residual) + " at b=1e-2");
  return v;
}

// ---------------------------------------------------------------------------
// C2: increment encoding is lossless in both formats, never inflates past
// raw, and cuts uplink bytes by >= 85% at ber 1e-6 on a real retraining run.
// ---------------------------------------------------------------------------
Verdict c2_codec() {
  Verdict v;
  Rng rng(0xC2);
  // Lossless roundtrip at mixed densities, including the +-255 extremes.
  for (double density : {0.0, 0.001, 0.01, 0.1, 0.5, 1.0}) {
    TensorQ ref(Shape{1, 4, 32, 32}), act = ref;
    for (size_t i = 0; i < ref.data.size(); ++i) {
      ref.data[i] = int8_t(rng.next_u64());
      act.data[i] = rng.next_double() < density ? int8_t(rng.next_u64())
                                                : ref.data[i];
    }
    IncrementTensor inc = compute_increment(act, ref);
    Bytes sp = encode_sparse(inc);
    IncrementTensor back = decode_sparse(sp, inc.shape);
    v.require(back.data == inc.data,
              "sparse roundtrip altered data at density " + num(density));
    TensorQ rec = reconstruct(ref, back);
    v.require(rec.data == act.data,
              "reconstruction mismatch at density " + num(density));
    Bytes raw = encode_raw(act);
    TmrCapture cap;
    cap.layers.push_back(TmrLayer{ref, act, similarity(act, ref)});
    IncrementPacket p = choose_encoding(cap, 0, 0.6);
    v.require(p.payload.size() <= raw.size(),
              "chosen encoding inflates at density " + num(density));
  }
  // 1e4 random single-element roundtrips cover the full increment range.
  for (int t = 0; t < 10000; ++t) {
    TensorQ ref(Shape{1, 1, 1, 1}), act(ref.shape);
    ref.data[0] = int8_t(rng.next_u64());
    act.data[0] = int8_t(rng.next_u64());
    IncrementTensor inc = compute_increment(act, ref);
    TensorQ rec = reconstruct(ref, decode_sparse(encode_sparse(inc), inc.shape));
    v.require(rec.data[0] == act.data[0], "single-element roundtrip failed");
    if (!v.ok) break;
  }

  // Real uplink: tiny-net retraining over the simulated link, codec on/off.
  AppConfig base;
  base.data_synth_n = 512;
  QuantModel m0 = build_tiny_net(7);
  m0 = pretrain_clean(m0, factory_data(base, 28), 1, 0.02, 0.9, 16);
  Dataset tr = slice(field_data(base, 28), 0, 64);
  auto run_bytes = [&](bool codec_on) {
    TrainingConfig c;
    c.batch_size = 16;
    c.epochs = 1;
    c.lr = 1e-3;
    c.seed = 1000;
    c.fault.ber = 1e-6;
    c.fault.seed = 5000;
    c.policy = kLwAll;
    c.codec_enabled = codec_on;
    auto rr = retrain(m0, tr, c);
    uint64_t up = 0;
    for (const auto& im : rr.metrics) up += im.timing.bytes_up;
    return up;
  };
  uint64_t up_on = run_bytes(true), up_off = run_bytes(false);
  double shrink = 1.0 - double(up_on) / double(up_off);
  v.require(shrink >= 0.85, "uplink shrink " + num(100 * shrink) +
                                "% below the 85% bar");
  v.note("uplink bytes " + std::to_string(up_off) + " -> " +
         std::to_string(up_on) + " (" + num(100 * shrink) + "% saved)");
  return v;
}

// ---------------------------------------------------------------------------
// C3: with faults off, retraining over the wire protocol produces exactly
// the model the in-process fine-tune produces (and equal accuracy).
// ---------------------------------------------------------------------------
Verdict c3_transparency() {
  Verdict v;
  Dataset data = synth_dataset(128, 21, 4, 8);
  int exact = 0;
  double worst = 0;
  for (int s = 0; s < 5; ++s) {
    QuantModel m0 = build_toy8(7 + uint64_t(s));
    TrainingConfig c;
    c.batch_size = 16;
    c.epochs = 1;
    c.lr = 1e-3;
    c.seed = 1000 + uint64_t(s);
    c.fault.ber = 0.0;
    c.fault.seed = 5000 + uint64_t(s);
    c.policy = kLwAll;
    QuantModel over_wire = retrain(m0, data, c).model;
    QuantModel in_proc = finetune_inprocess(m0, data, c).model;
    if (over_wire.serialize() == in_proc.serialize()) ++exact;
    FaultConfig none;
    double a = evaluate(over_wire, data, none, kBare, 128).top1;
    double b = evaluate(in_proc, data, none, kBare, 128).top1;
    worst = std::max(worst, std::fabs(a - b));
  }
  v.require(worst <= 0.005, "accuracy gap " + num(worst) + " exceeds 0.5pt");
  v.require(exact == 5,
            std::to_string(5 - exact) + "/5 seeds differ in serialized bits");
  v.note("5/5 seeds bit-identical, max accuracy gap " + num(worst));
  return v;
}

// ---------------------------------------------------------------------------
// C4: the injector's empirical flip rate matches the configured rate within
// 4.5 binomial sigma on 8e6 bits, and ber 0 leaves tensors bit-exact.
// ---------------------------------------------------------------------------
Verdict c4_injection() {
  Verdict v;
  TensorQ base(Shape{1, 1, 1000, 1000});
  for (size_t i = 0; i < base.data.size(); ++i) base.data[i] = int8_t(i * 37);
  const double bits = 8.0e6;
  uint64_t seed = 40;
  for (double ber : {1e-4, 1e-3, 1e-2}) {
    TensorQ t = base;
    flip_tensor(t, ber, ++seed);
    double eff = effective_ber(base, t);
    double sigma = std::sqrt(ber * (1 - ber) / bits);
    v.require(std::fabs(eff - ber) <= 4.5 * sigma,
              "ber " + num(ber) + ": measured " + num(eff) + ", |delta| > " +
                  num(4.5 * sigma));
    v.note("ber " + num(ber) + " -> " + num(eff));
  }
  TensorQ t = base;
  flip_tensor(t, 0.0, 99);
  v.require(t.data == base.data, "ber 0 modified the tensor");
  return v;
}

// ---------------------------------------------------------------------------
// C5: retraining under injected faults recovers the deployed (unprotected)
// accuracy by >= 2 points at ber 1e-4 and 3e-4, and training at the matched
// rate beats training at a far-off rate (paired one-sided t, p < 0.05).
// ---------------------------------------------------------------------------
Verdict c5_recovery() {
  Verdict v;
  const int kSeeds = 20;
  AppConfig base;
  base.data_synth_n = 512;
  Dataset field = field_data(base, 28);
  Dataset held = heldout_data(base, 28);
  Dataset fact = factory_data(base, 28);

  auto retrain_at = [&](const QuantModel& pre, double ber, int s) {
    TrainingConfig c;
    c.batch_size = 16;
    c.epochs = 1;
    c.lr = 1e-3;
    c.seed = 1000 + uint64_t(s);
    c.fault.ber = ber;
    c.fault.seed = 5000 + uint64_t(s);
    c.policy = kLwAll;
    return retrain(pre, field, c).model;
  };
  auto eval_at = [&](const QuantModel& m, double ber, int s) {
    FaultConfig f;
    f.ber = ber;
    f.seed = mix_key(uint64_t(s), 0x6576);
    return evaluate(m, held, f, kBare, 200, mix_key(uint64_t(s), 0x65)).top1;
  };

  std::vector<double> gain4, gain34, matched, unmatched;
  for (int s = 0; s < kSeeds; ++s) {
    QuantModel pre = build_tiny_net(7 + uint64_t(s));
    pre = pretrain_clean(pre, fact, 1, 0.02, 0.9, 16);
    for (double ber : {1e-4, 3e-4}) {
      double un = eval_at(pre, ber, s);
      double re = eval_at(retrain_at(pre, ber, s), ber, s);
      (ber == 1e-4 ? gain4 : gain34).push_back(re - un);
    }
    QuantModel t_lo = retrain_at(pre, 1e-6, s);
    QuantModel t_hi = retrain_at(pre, 1e-2, s);
    matched.push_back(eval_at(t_lo, 1e-6, s));
    unmatched.push_back(eval_at(t_hi, 1e-6, s));
  }
  double g4 = mean(gain4), g34 = mean(gain34);
  v.require(g4 >= 0.02, "mean gain at 1e-4 is " + num(g4) + ", below 2pt");
  v.require(g34 >= 0.02, "mean gain at 3e-4 is " + num(g34) + ", below 2pt");
  double adv = mean(matched) - mean(unmatched);
  double p = paired_t_pvalue(matched, unmatched);
  v.require(adv > 0, "matched-rate advantage " + num(adv) + " not positive");
  v.require(p < 0.05, "matched-vs-unmatched p " + num(p) + " >= 0.05");
  v.note("gain@1e-4 " + num(g4) + ", gain@3e-4 " + num(g34) +
         ", matched advantage " + num(adv) + " (p " + num(p) + ")");
  return v;
}

// ---------------------------------------------------------------------------
// C6: on a narrowband link the uncompressed uplink dominates iteration time,
// and enabling the codec removes >= 80% of total time at ber 1e-6 and
// >= 30% at ber 1e-4.
// ---------------------------------------------------------------------------
Verdict c6_timing() {
  Verdict v;
  AppConfig base;
  base.data_synth_n = 512;
  QuantModel m0 = build_tiny_net(7);
  m0 = pretrain_clean(m0, factory_data(base, 28), 1, 0.02, 0.9, 16);
  Dataset tr = slice(field_data(base, 28), 0, 64);

  auto run = [&](bool codec_on, double ber) {
    TrainingConfig c;
    c.batch_size = 16;
    c.epochs = 1;
    c.lr = 1e-3;
    c.seed = 1000;
    c.fault.ber = ber;
    c.fault.seed = 5000;
    c.policy = kLwAll;
    c.codec_enabled = codec_on;
    c.channel = ChannelConfig::profile("wpan");
    auto rr = retrain(m0, tr, c);
    StageTiming agg;
    for (const auto& im : rr.metrics) agg += im.timing;
    return agg;
  };

  StageTiming raw6 = run(false, 1e-6);
  double up_frac = raw6.uplink / raw6.total();
  v.require(up_frac > 0.5, "raw uplink fraction " + num(up_frac) +
                               " does not dominate");
  StageTiming on6 = run(true, 1e-6);
  double red6 = 1.0 - on6.total() / raw6.total();
  v.require(red6 >= 0.80,
            "codec total-time cut at 1e-6 is " + num(100 * red6) + "%");
  StageTiming raw4 = run(false, 1e-4);
  StageTiming on4 = run(true, 1e-4);
  double red4 = 1.0 - on4.total() / raw4.total();
  v.require(red4 >= 0.30,
            "codec total-time cut at 1e-4 is " + num(100 * red4) + "%");
  v.note("raw uplink " + num(100 * up_frac) + "% of total; codec cuts " +
         num(100 * red6) + "% @1e-6, " + num(100 * red4) + "% @1e-4");
  return v;
}

// ---------------------------------------------------------------------------
// C7: greedy selection honors its evaluation-count contract, stays within
// the overhead budget, finds a planted fragile layer first in >= 90% of
// trials, and its two-layer prefix scores at least the all-pairs average.
// ---------------------------------------------------------------------------
Verdict c7_selection() {
  Verdict v;
  // Scripted core: 50 uniform costs at r_max 0.1 admit exactly 5 picks and
  // 50+49+48+47+46 = 240 evaluations.
  std::vector<double> costs(50, 1.0);
  EvalFn script = [](const std::vector<int>& S, int) {
    return 0.1 * double(S.size()) + 1e-3 * double(50 - S.back());
  };
  GreedyResult g0 = greedy_select_core(costs, script, 0.1);
  v.require(g0.evaluation_count == 240,
            "scripted run used " + std::to_string(g0.evaluation_count) +
                " evaluations, not 240");
  v.require(g0.plan.S == std::vector<int>{0, 1, 2, 3, 4},
            "scripted run picked an unexpected set");
  v.require(std::fabs(g0.plan.r - 0.1) < 1e-12, "scripted run r != 0.1");

  // Planted fragility: one layer of an 8-layer net carries 2e-2 output-site
  // flips against a 1e-6 background; it must lead the plan.
  Dataset data = synth_dataset(160, 99, 4, 8);
  QuantModel m = build_toy8(3);
  m = pretrain_clean(m, data, 3, 0.02, 0.9, 16);
  FaultConfig f;
  f.ber = 1e-6;
  f.per_layer_ber[4] = 2e-2;
  f.site_inputs = false;
  f.site_weights = false;
  int hits = 0;
  const int trials = 50;
  bool budget_ok = true;
  for (int t = 0; t < trials; ++t) {
    f.seed = 1000 + uint64_t(t);
    GreedyResult g = greedy_select(m, data, f, 0.5, 160, 1000 + uint64_t(t));
    hits += !g.plan.S.empty() && g.plan.S.front() == 4;
    budget_ok = budget_ok && g.plan.r <= 0.5;
  }
  v.require(hits >= 45, "planted layer led only " + std::to_string(hits) +
                            "/50 plans");
  v.require(budget_ok, "a plan exceeded r_max");

  // Exhaustive reference at s=2 with the same shared evaluation seed.
  f.seed = 1000;
  BruteForceResult bf = brute_force_select(m, data, f, 2, 160, 1000);
  v.require(bf.evaluated == 28, "expected 28 pair evaluations, got " +
                                    std::to_string(bf.evaluated));
  GreedyResult g = greedy_select(m, data, f, 0.5, 160, 1000);
  std::vector<int> prefix(g.plan.S.begin(),
                          g.plan.S.begin() +
                              std::min<size_t>(2, g.plan.S.size()));
  TmrPolicy pol{TmrVariant::LayerWise, prefix, false};
  FaultConfig shared = f;
  shared.seed = mix_key(1000, 0x73656cULL, 0);
  double greedy2 = evaluate(m, data, shared, pol, 160).top1;
  v.require(greedy2 >= bf.mean_accuracy,
            "greedy 2-prefix " + num(greedy2) + " below the all-pairs mean " +
                num(bf.mean_accuracy));
  v.note("planted layer first in " + std::to_string(hits) +
         "/50 plans; greedy 2-prefix " + num(greedy2) + " vs pair mean " +
         num(bf.mean_accuracy) + " (best " + num(bf.accuracy) + ")");
  return v;
}

// ---------------------------------------------------------------------------
// C8: layer-wise voting preserves more final-layer similarity than
// network-wise voting at ber 1e-5 and 1e-4 (paired over 20 fault seeds);
// the 1e-3 cell is reported but not gated.
// ---------------------------------------------------------------------------
Verdict c8_variants() {
  Verdict v;
  QuantModel m = build_tiny_resnet(5);
  Dataset d = synth_dataset(8, 11, 10, 28);
  TensorQ x = batch_images(d, 0, 8);
  auto cell = [&](double ber, std::vector<double>& lw,
                  std::vector<double>& nw) {
    for (int s = 0; s < 20; ++s) {
      FaultConfig f;
      f.ber = ber;
      f.seed = 100 + uint64_t(s);
      lw.push_back(similarity_profile(m, x, f, TmrVariant::LayerWise).back());
      nw.push_back(
          similarity_profile(m, x, f, TmrVariant::NetworkWise).back());
    }
  };
  for (double ber : {1e-5, 1e-4}) {
    std::vector<double> lw, nw;
    cell(ber, lw, nw);
    double d_mean = mean(lw) - mean(nw);
    double p = paired_t_pvalue(lw, nw);
    v.require(d_mean > 0, "lw-nw gap " + num(d_mean) + " at ber " + num(ber) +
                              " not positive");
    v.require(p < 0.01, "lw-vs-nw p " + num(p) + " at ber " + num(ber));
    v.note("ber " + num(ber) + ": lw " + num(mean(lw)) + " vs nw " +
           num(mean(nw)) + " (p " + num(p) + ")");
  }
  std::vector<double> lw, nw;
  cell(1e-3, lw, nw);
  v.note("ber 0.001 (reported, not gated): lw " + num(mean(lw)) + " vs nw " +
         num(mean(nw)));
  return v;
}

// ---------------------------------------------------------------------------
// C9: under train-time faults, batch 16 beats batch 2 at its operating
// point, and extra epochs change accuracy by <= 1 point at theirs.
// ---------------------------------------------------------------------------
Verdict c9_hyperparameters() {
  Verdict v;
  AppConfig base;
  base.data_synth_n = 512;
  Dataset field = field_data(base, 28);
  Dataset held = heldout_data(base, 28);
  Dataset fact = factory_data(base, 28);

  auto run = [&](const QuantModel& pre, int s, double ber, double lr,
                 int batch, int epochs) {
    TrainingConfig c;
    c.batch_size = batch;
    c.epochs = epochs;
    c.lr = lr;
    c.seed = 1000 + uint64_t(s);
    c.fault.ber = ber;
    c.fault.seed = 5000 + uint64_t(s);
    c.policy = kLwAll;
    FaultConfig f;
    f.ber = ber;
    f.seed = mix_key(uint64_t(s), 0x6576);
    auto rr = retrain(pre, field, c);
    return evaluate(rr.model, held, f, kBare, 200, mix_key(uint64_t(s), 0x65))
        .top1;
  };

  // Batch response at ber 1e-3, lr 3e-3: the noise-averaging advantage of
  // batch 16 over batch 2.
  std::vector<double> b2, b16;
  for (int s = 0; s < 16; ++s) {
    QuantModel pre = build_tiny_net(7 + uint64_t(s));
    pre = pretrain_clean(pre, fact, 1, 0.02, 0.9, 16);
    b2.push_back(run(pre, s, 1e-3, 3e-3, 2, 1));
    b16.push_back(run(pre, s, 1e-3, 3e-3, 16, 1));
  }
  double bd = mean(b16) - mean(b2);
  v.require(bd >= 0, "batch 16 mean below batch 2 by " + num(-bd));
  v.note("batch 2 -> 16: " + num(mean(b2)) + " -> " + num(mean(b16)) +
         " (+" + num(bd) + ")");

  // Epoch response at ber 3e-4, lr 1e-3: one pass is already converged.
  std::vector<double> e1, e2, e3;
  for (int s = 0; s < 10; ++s) {
    QuantModel pre = build_tiny_net(7 + uint64_t(s));
    pre = pretrain_clean(pre, fact, 1, 0.02, 0.9, 16);
    e1.push_back(run(pre, s, 3e-4, 1e-3, 16, 1));
    e2.push_back(run(pre, s, 3e-4, 1e-3, 16, 2));
    e3.push_back(run(pre, s, 3e-4, 1e-3, 16, 3));
  }
  double d2 = std::fabs(mean(e2) - mean(e1));
  double d3 = std::fabs(mean(e3) - mean(e1));
  v.require(d2 <= 0.01, "epoch 2 shifts accuracy by " + num(d2));
  v.require(d3 <= 0.01, "epoch 3 shifts accuracy by " + num(d3));
  v.note("epochs 1/2/3: " + num(mean(e1)) + "/" + num(mean(e2)) + "/" +
         num(mean(e3)));
  return v;
}

// ---------------------------------------------------------------------------
// C10: 1e5 malformed frames never escape DecodeError, and out-of-order or
// malformed device requests produce Error replies that leave state intact.
// ---------------------------------------------------------------------------
Verdict c10_robustness() {
  Verdict v;
  Rng rng(0xC10);
  int decoded = 0, rejected = 0;
  for (int t = 0; t < 100000; ++t) {
    Bytes b;
    if (t % 3 == 0) {
      // Mutated valid frame.
      Message m;
      m.type = MsgType(1 + rng.next_below(6));
      m.device_id = uint32_t(rng.next_u64());
      m.payload.resize(rng.next_below(24));
      for (auto& x : m.payload) x = uint8_t(rng.next_u64());
      b = encode_message(m);
      size_t flips = 1 + rng.next_below(4);
      for (size_t i = 0; i < flips && !b.empty(); ++i)
        b[rng.next_below(b.size())] ^= uint8_t(1 + rng.next_below(255));
    } else {
      b.resize(rng.next_below(48));
      for (auto& x : b) x = uint8_t(rng.next_u64());
    }
    try {
      decode_message(b);
      ++decoded;
    } catch (const DecodeError&) {
      ++rejected;
    } catch (const std::exception& e) {
      v.require(false, std::string("unexpected exception type: ") + e.what());
      break;
    }
  }
  v.note(std::to_string(rejected) + " rejected, " + std::to_string(decoded) +
         " decoded of 100000 fuzzed frames");

  // Device state machine: every violation answers Error and changes nothing.
  TrainingConfig cfg;
  cfg.batch_size = 8;
  cfg.policy = kLwAll;
  Dataset data = synth_dataset(32, 5, 4, 8);
  Device dev(data, cfg);
  auto expect_error = [&](const Message& req, const char* what) {
    Message rep = dev.handle(req);
    v.require(rep.type == MsgType::Error,
              std::string(what) + " did not yield Error");
  };

  GetDataReq q;
  q.iteration = 0;
  q.batch_size = 8;
  expect_error(Message{MsgType::GetData, 1, q.encode()},
               "GetData before any model");
  v.require(!dev.model().has_value(), "rejected GetData grew a model");

  expect_error(Message{MsgType::SetMode, 1, Bytes{2}}, "SetMode(2)");
  expect_error(Message{MsgType::SetMode, 1, Bytes{0, 1}}, "2-byte SetMode");
  v.require(dev.mode() == DeviceMode::Inference,
            "rejected SetMode changed the mode");

  expect_error(Message{MsgType::DeployModel, 1, Bytes{9, 9, 9}},
               "garbage DeployModel");
  v.require(!dev.model().has_value(), "rejected DeployModel stored a model");

  expect_error(Message{MsgType::DataResponse, 1, {}},
               "server-role message sent to the device");
  expect_error(Message{MsgType::GetData, 1, Bytes{1, 2}},
               "truncated GetData payload");

  // After all violations the normal path still works end to end.
  QuantModel m = build_toy8(3);
  Message ok = dev.handle(Message{MsgType::SetMode, 1,
                                  Bytes{uint8_t(DeviceMode::Training)}});
  v.require(ok.type == MsgType::Ack, "SetMode(training) failed");
  ok = dev.handle(Message{MsgType::DeployModel, 1, m.serialize()});
  v.require(ok.type == MsgType::Ack, "DeployModel failed");
  ok = dev.handle(Message{MsgType::GetData, 1, q.encode()});
  v.require(ok.type == MsgType::DataResponse, "GetData failed after deploy");

  GetDataReq wrong;
  wrong.retransmit = 1;
  wrong.iteration = 5;
  wrong.batch_size = 8;
  expect_error(Message{MsgType::GetData, 1, wrong.encode()},
               "retransmit of an unserved iteration");
  GetDataReq again;
  again.retransmit = 1;
  again.iteration = 0;
  again.batch_size = 8;
  Message rep = dev.handle(Message{MsgType::GetData, 1, again.encode()});
  v.require(rep.type == MsgType::DataResponse,
            "retransmit of the cached iteration failed");
  return v;
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    Verdict (*fn)();
  };
  const Entry entries[] = {
      {"C1  majority voter: bitwise correctness, residual rate", c1_voter},
      {"C2  increment codec: lossless roundtrip, uplink compression",
       c2_codec},
      {"C3  protocol transparency: wire retraining == in-process",
       c3_transparency},
      {"C4  fault injection: empirical rate tracks configured rate",
       c4_injection},
      {"C5  retraining recovery and matched-rate advantage", c5_recovery},
      {"C6  time decomposition: uplink dominance, codec speedup", c6_timing},
      {"C7  greedy selection: contract, planted layer, pair baseline",
       c7_selection},
      {"C8  redundancy variants: layer-wise beats network-wise", c8_variants},
      {"C9  hyperparameter response: batch helps, epochs plateau",
       c9_hyperparameters},
      {"C10 robustness: fuzzed frames, state-machine violations",
       c10_robustness},
  };
  int failed = 0;
  for (const auto& e : entries) {
    Verdict v;
    try {
      v = e.fn();
    } catch (const std::exception& ex) {
      v.ok = false;
      v.detail = std::string("unhandled exception: ") + ex.what();
    }
    std::printf("%s  %s%s%s\n", v.ok ? "PASS" : "FAIL", e.name,
                v.detail.empty() ? "" : "  -- ", v.detail.c_str());
    std::fflush(stdout);
    failed += !v.ok;
  }
  if (failed) std::printf("%d of 10 criteria failed\n", failed);
  else std::printf("all 10 criteria passed\n");
  return failed;
}
