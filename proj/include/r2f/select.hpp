#pragma once

#include <functional>
#include <string>
#include <vector>

#include "r2f/dataset.hpp"
#include "r2f/fault.hpp"
#include "r2f/model.hpp"

namespace r2f {

/// Protected index set with MAC-weighted normalized overhead r. Full TMR of
/// every layer means r = 1, i.e. 200% extra compute. Greedy search keeps S
/// in selection order, most critical layer first.
struct ProtectionPlan {
  std::vector<int> S;
  double r = 0.0;

  double extra_compute_pct() const { return 200.0 * r; }
};

std::string plan_to_string(const ProtectionPlan& p);

/// Per-layer protection costs O_i: MACs for weighted layers, output element
/// count otherwise (every layer is a selection candidate).
std::vector<double> layer_costs(const QuantModel& m);

/// r = sum of costs over S / total cost.
double overhead(const std::vector<double>& costs, const std::vector<int>& S);

struct GreedyResult {
  ProtectionPlan plan;
  int evaluation_count = 0;
};

/// Candidate evaluation oracle: accuracy of protecting S, evaluated in round
/// `round` (rounds share random numbers so the argmax compares like to like).
using EvalFn = std::function<double(const std::vector<int>& S, int round)>;

/// Greedy critical-layer search. Each round evaluates every unprotected
/// layer added to S, keeps the accuracy argmax (ties to the lower index),
/// and loops while r < r_max; if the accepted layer pushes r past r_max it
/// is removed and the search stops. The returned evaluation_count is the
/// number of candidate evaluations performed.
GreedyResult greedy_select_core(const std::vector<double>& costs,
                                const EvalFn& eval, double r_max);

/// Greedy search on a real model: candidates evaluated with layer-wise TMR
/// on the protected subset over n_eval samples, common random numbers per
/// round (evaluation seed depends on the round only).
GreedyResult greedy_select(const QuantModel& m, const Dataset& data,
                           const FaultConfig& fault, double r_max, int n_eval,
                           uint64_t seed);

uint64_t binomial_coeff(int n, int k);

struct BruteForceResult {
  std::vector<int> S;
  double accuracy = 0.0;
  uint64_t evaluated = 0;
  /// Mean accuracy over all size-s subsets (same shared seeds).
  double mean_accuracy = 0.0;
};

/// Exhaustive argmax over all size-s subsets with one shared evaluation
/// seed (common random numbers). Guarded: C(L, s) must not exceed 1e5.
BruteForceResult brute_force_select(const QuantModel& m, const Dataset& data,
                                    const FaultConfig& fault, int s,
                                    int n_eval, uint64_t seed);

}  // namespace r2f
