#pragma once

#include <functional>
#include <vector>

#include "r2f/model.hpp"
#include "r2f/tensor.hpp"

namespace r2f {

/// Per-layer value transformer applied around the MAC pipeline. Null members
/// act as identity. on_input/on_weight run on working copies before use,
/// on_output after requantization. per_input/per_weight, when set, perturb
/// each operand at every MAC use instead of once per tensor (per-MAC mode);
/// the MAC loop order (n, oc, oh, ow, ic, kh, kw) is part of the
/// reproducibility contract for that mode.
struct MacHook {
  std::function<void(TensorQ&)> on_input;
  std::function<void(TensorQ&)> on_weight;
  std::function<void(TensorQ&)> on_output;
  std::function<int8_t(int8_t)> per_input;
  std::function<int8_t(int8_t)> per_weight;

  bool identity() const {
    return !on_input && !on_weight && !on_output && !per_input && !per_weight;
  }
};

/// Hook factory: one MacHook per layer index, so layers draw from
/// independent perturbation streams.
using HookFn = std::function<MacHook(int layer)>;

inline HookFn identity_hooks() {
  return [](int) { return MacHook{}; };
}

/// Input plus every layer output, in order: acts[0] is the model input,
/// acts[i] the output of layer i-1. exps holds matching scale exponents.
struct ActivationsQ {
  std::vector<TensorQ> acts;
  std::vector<int8_t> exps;
};

TensorQ conv2d_forward(const TensorQ& x, const LayerDesc& L, const MacHook& h,
                       int layer_index = 0);
TensorQ fc_forward(const TensorQ& x, const LayerDesc& L, const MacHook& h,
                   int layer_index = 0);

/// Executes one layer. res_ref must point at the referenced activation for
/// ResidualAdd and may be null otherwise.
TensorQ layer_forward(const TensorQ& x, const LayerDesc& L, const MacHook& h,
                      const TensorQ* res_ref, int layer_index);

ActivationsQ model_forward(const QuantModel& m, const TensorQ& x,
                           const HookFn& hooks);

/// Float-domain mirror of the forward pass (training-side math checks).
struct ActivationsF {
  std::vector<TensorF> acts;
};

ActivationsF float_forward(const FloatModel& m, const TensorF& x);

/// Dequantizes recorded quant activations into the float domain using the
/// exponent chain of the model.
ActivationsF dequantize_activations(const ActivationsQ& a);

}  // namespace r2f
