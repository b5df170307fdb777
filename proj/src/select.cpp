#include "r2f/select.hpp"

#include <algorithm>
#include <cstdio>

#include "r2f/rng.hpp"
#include "r2f/runtime.hpp"

namespace r2f {

std::string plan_to_string(const ProtectionPlan& p) {
  std::string s = "S=";
  for (size_t i = 0; i < p.S.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(p.S[i]);
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), ";r=%.6f", p.r);
  return s + buf;
}

std::vector<double> layer_costs(const QuantModel& m) {
  std::vector<double> c;
  c.reserve(m.layers.size());
  for (const auto& L : m.layers) c.push_back(double(L.op_count));
  return c;
}

double overhead(const std::vector<double>& costs, const std::vector<int>& S) {
  double total = 0;
  for (double c : costs) total += c;
  if (total <= 0) throw ConfigError("layer costs sum to zero");
  double sel = 0;
  for (int i : S) {
    if (i < 0 || size_t(i) >= costs.size())
      throw ConfigError("layer index " + std::to_string(i) +
                        " outside cost vector of " +
                        std::to_string(costs.size()));
    sel += costs[i];
  }
  return sel / total;
}

GreedyResult greedy_select_core(const std::vector<double>& costs,
                                const EvalFn& eval, double r_max) {
  if (!(r_max > 0 && r_max <= 1))
    throw ConfigError("r_max must lie in (0, 1]");
  const int L = int(costs.size());
  GreedyResult res;
  std::vector<bool> in_S(L, false);
  int round = 0;
  while (res.plan.r < r_max && int(res.plan.S.size()) < L) {
    int best = -1;
    double best_acc = 0;
    std::vector<int> cand = res.plan.S;
    cand.push_back(-1);
    for (int i = 0; i < L; ++i) {
      if (in_S[i]) continue;
      cand.back() = i;
      double acc = eval(cand, round);
      ++res.evaluation_count;
      if (best < 0 || acc > best_acc) {  // strict: ties keep the lower index
        best = i;
        best_acc = acc;
      }
    }
    res.plan.S.push_back(best);
    in_S[best] = true;
    res.plan.r = overhead(costs, res.plan.S);
    if (res.plan.r > r_max) {
      res.plan.S.pop_back();
      in_S[best] = false;
      res.plan.r = overhead(costs, res.plan.S);
      break;
    }
    ++round;
  }
  // S stays in selection order: S[0] is the most critical layer found.
  return res;
}

namespace {

EvalFn model_eval_fn(const QuantModel& m, const Dataset& data,
                     const FaultConfig& fault, int n_eval, uint64_t seed) {
  return [&m, &data, fault, n_eval, seed](const std::vector<int>& S,
                                          int round) {
    TmrPolicy pol;
    pol.variant = TmrVariant::LayerWise;
    pol.protected_layers = S;
    FaultConfig f = fault;
    // Common random numbers: every candidate within a round sees the same
    // fault streams, so the argmax is a paired comparison.
    f.seed = mix_key(seed, 0x73656cULL, uint64_t(round));
    return evaluate(m, data, f, pol, size_t(n_eval)).top1;
  };
}

}  // namespace

GreedyResult greedy_select(const QuantModel& m, const Dataset& data,
                           const FaultConfig& fault, double r_max, int n_eval,
                           uint64_t seed) {
  if (n_eval < 1) throw ConfigError("n_eval must be >= 1");
  return greedy_select_core(layer_costs(m),
                            model_eval_fn(m, data, fault, n_eval, seed),
                            r_max);
}

uint64_t binomial_coeff(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  uint64_t c = 1;
  for (int i = 1; i <= k; ++i) c = c * uint64_t(n - k + i) / uint64_t(i);
  return c;
}

BruteForceResult brute_force_select(const QuantModel& m, const Dataset& data,
                                    const FaultConfig& fault, int s,
                                    int n_eval, uint64_t seed) {
  const int L = m.layer_count();
  if (s < 1 || s > L)
    throw ConfigError("subset size " + std::to_string(s) + " outside [1, " +
                      std::to_string(L) + "]");
  uint64_t combos = binomial_coeff(L, s);
  if (combos > 100000)
    throw ConfigError("C(" + std::to_string(L) + ", " + std::to_string(s) +
                      ") = " + std::to_string(combos) +
                      " exceeds the 1e5 brute-force guard");
  EvalFn eval = model_eval_fn(m, data, fault, n_eval, seed);
  BruteForceResult res;
  std::vector<int> S(s);
  for (int i = 0; i < s; ++i) S[i] = i;
  double acc_sum = 0;
  for (;;) {
    double acc = eval(S, 0);  // one shared round: common random numbers
    ++res.evaluated;
    acc_sum += acc;
    if (res.S.empty() || acc > res.accuracy) {
      res.S = S;
      res.accuracy = acc;
    }
    // Next combination in lexicographic order.
    int i = s - 1;
    while (i >= 0 && S[i] == L - s + i) --i;
    if (i < 0) break;
    ++S[i];
    for (int j = i + 1; j < s; ++j) S[j] = S[j - 1] + 1;
  }
  res.mean_accuracy = acc_sum / double(res.evaluated);
  return res;
}

}  // namespace r2f
