#pragma once

#include <cstdint>
#include <map>

#include "r2f/nn.hpp"
#include "r2f/rng.hpp"
#include "r2f/tensor.hpp"

namespace r2f {

enum class FaultMode : uint8_t { PerTensorPerLayer = 0, PerMac = 1 };

/// Stream sub-keys: every (seed, layer, execution, site) tuple owns an
/// independent PRNG stream; batch rows split once more inside flip_tensor.
enum class Site : uint64_t { Input = 1, Weight = 2, Output = 3 };

struct FaultConfig {
  double ber = 0.0;
  uint64_t seed = 0;
  bool site_inputs = true, site_weights = true, site_outputs = true;
  FaultMode mode = FaultMode::PerTensorPerLayer;
  /// Optional per-layer override of ber (layer index -> rate); layers not
  /// listed use the global ber. Drives planted-fragility studies.
  std::map<int, double> per_layer_ber;

  double ber_for(int layer) const {
    auto it = per_layer_ber.find(layer);
    return it == per_layer_ber.end() ? ber : it->second;
  }
  void validate() const;
};

/// Flips each of the 8 bits independently with probability ber.
uint8_t flip_bits(uint8_t word, double ber, Rng& rng);

/// Reference per-bit Bernoulli pass over a byte span.
void flip_span_perbit(int8_t* p, size_t n, double ber, Rng& rng);

/// Geometric-gap sampling: jumps straight to the next flipped bit, so cost
/// is O(expected flips). Bit-position process is distribution-identical to
/// the per-bit pass (chain of Bernoulli trials).
void flip_span_gap(int8_t* p, size_t n, double ber, Rng& rng);

/// Dispatches to the gap path when the expected flip count is below 1e6,
/// else the per-bit path.
void flip_span(int8_t* p, size_t n, double ber, Rng& rng);

/// Per-batch-row streams: row r of t is flipped with Rng(mix_key(stream_seed,
/// r)), so results are independent of batch-level parallel scheduling.
void flip_tensor(TensorQ& t, double ber, uint64_t stream_seed);

/// Fraction of differing bits over total bits.
double effective_ber(const TensorQ& clean, const TensorQ& faulty);

/// Hook with all enabled sites active, streams keyed by
/// (seed, layer_index, execution_index, site).
MacHook make_fault_hook(const FaultConfig& cfg, int layer_index,
                        uint64_t execution_index);

/// Per-layer hook factory for a whole forward pass. The input site fires
/// only on input_site_layer (default 0): interior tensors are already
/// covered by the producing layer's output site, so flipping them again on
/// consumption would double-count the configured ber.
HookFn fault_hooks(const FaultConfig& cfg, uint64_t execution_index,
                   int input_site_layer = 0);

}  // namespace r2f
