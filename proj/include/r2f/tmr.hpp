#pragma once

#include <vector>

#include "r2f/fault.hpp"
#include "r2f/model.hpp"
#include "r2f/nn.hpp"

namespace r2f {

enum class TmrVariant : uint8_t { None = 0, NetworkWise = 1, LayerWise = 2 };

struct TmrPolicy {
  TmrVariant variant = TmrVariant::None;
  /// Protected layer index set S. Empty with variant != None means every
  /// layer is protected; partial sets drive critical-layer protection.
  std::vector<int> protected_layers;
  /// When set, the designated faulty output comes from a fourth independent
  /// execution instead of TMR copy 0.
  bool independent_faulty = false;

  bool is_protected(int layer) const {
    if (variant == TmrVariant::None) return false;
    if (protected_layers.empty()) return true;
    for (int s : protected_layers)
      if (s == layer) return true;
    return false;
  }
  void validate(int layer_count) const;
};

/// Per-layer result of a redundant forward: the voted reference, the
/// designated faulty output, and their elementwise similarity.
struct TmrLayer {
  TensorQ voted, copy0;
  double similarity = 1.0;
};

struct TmrCapture {
  std::vector<TmrLayer> layers;
};

/// Elementwise bitwise majority: each output bit is the majority of the
/// three corresponding input bits. Total on three-way disagreement.
TensorQ vote3(const TensorQ& a, const TensorQ& b, const TensorQ& c);

/// Fraction of elementwise-equal entries.
double similarity(const TensorQ& approx, const TensorQ& actual);

/// Layer-wise TMR: protected layers run three times on the voted input and
/// the vote feeds the next layer, so corruption is mitigated in layer order.
/// Unprotected layers run once (their output is both copy0 and reference).
/// execution_index of copy c at batch exec_base is exec_base*4 + c.
TmrCapture lw_tmr_forward(const QuantModel& m, const TensorQ& x,
                          const FaultConfig& cfg, const TmrPolicy& policy,
                          uint64_t exec_base = 0);

/// Network-wise TMR: three full independent faulty forwards, voting per
/// layer only afterwards, so upstream errors keep propagating.
TmrCapture nw_tmr_forward(const QuantModel& m, const TensorQ& x,
                          const FaultConfig& cfg, uint64_t exec_base = 0);

/// Dispatch on policy.variant; None runs a single faulty forward whose
/// outputs serve as both copy0 and reference.
TmrCapture tmr_forward(const QuantModel& m, const TensorQ& x,
                       const FaultConfig& cfg, const TmrPolicy& policy,
                       uint64_t exec_base = 0);

/// Offline per-layer similarity of voted vs designated-faulty outputs from
/// one run on a single sample; classifies layers against the threshold.
std::vector<double> similarity_profile(const QuantModel& m, const TensorQ& x,
                                       const FaultConfig& cfg,
                                       TmrVariant variant,
                                       uint64_t exec_base = 0);

}  // namespace r2f
