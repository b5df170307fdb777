#include "r2f/tmr.hpp"

namespace r2f {

void TmrPolicy::validate(int layer_count) const {
  for (int s : protected_layers)
    if (s < 0 || s >= layer_count)
      throw ConfigError("protected layer index " + std::to_string(s) +
                        " outside [0, " + std::to_string(layer_count) + ")");
}

TensorQ vote3(const TensorQ& a, const TensorQ& b, const TensorQ& c) {
  if (!(a.shape == b.shape) || !(a.shape == c.shape))
    throw ShapeError("vote3 shapes " + a.shape.str() + ", " + b.shape.str() +
                     ", " + c.shape.str());
  TensorQ out(a.shape);
  for (size_t i = 0; i < a.data.size(); ++i) {
    uint8_t x = uint8_t(a.data[i]), y = uint8_t(b.data[i]),
            z = uint8_t(c.data[i]);
    out.data[i] = static_cast<int8_t>((x & y) | (x & z) | (y & z));
  }
  return out;
}

double similarity(const TensorQ& approx, const TensorQ& actual) {
  if (!(approx.shape == actual.shape))
    throw ShapeError("similarity shapes " + approx.shape.str() + " vs " +
                     actual.shape.str());
  if (approx.data.empty()) return 1.0;
  size_t eq = 0;
  for (size_t i = 0; i < approx.data.size(); ++i)
    eq += approx.data[i] == actual.data[i];
  return double(eq) / double(approx.data.size());
}

namespace {

constexpr uint64_t kCopies = 4;  // copies 0..2 vote; 3 = independent faulty

uint64_t exec_of(uint64_t exec_base, uint64_t copy) {
  return exec_base * kCopies + copy;
}

}  // namespace

TmrCapture lw_tmr_forward(const QuantModel& m, const TensorQ& x,
                          const FaultConfig& cfg, const TmrPolicy& policy,
                          uint64_t exec_base) {
  policy.validate(m.layer_count());
  TmrCapture cap;
  cap.layers.reserve(m.layers.size());
  std::vector<TensorQ> chain;  // voted activations, chain[0] = input
  chain.reserve(m.layers.size() + 1);
  chain.push_back(x);
  for (int i = 0; i < m.layer_count(); ++i) {
    const LayerDesc& L = m.layers[i];
    const TensorQ* ref =
        L.kind == LayerKind::ResidualAdd ? &chain[size_t(L.f[0]) + 1] : nullptr;
    auto run = [&](uint64_t copy) {
      HookFn hooks = fault_hooks(cfg, exec_of(exec_base, copy));
      return layer_forward(chain.back(), L, hooks(i), ref, i);
    };
    TmrLayer tl;
    if (policy.is_protected(i)) {
      TensorQ o0 = run(0), o1 = run(1), o2 = run(2);
      tl.voted = vote3(o0, o1, o2);
      tl.copy0 = policy.independent_faulty ? run(3) : std::move(o0);
    } else {
      tl.copy0 = run(0);
      tl.voted = tl.copy0;
    }
    tl.similarity = similarity(tl.voted, tl.copy0);
    chain.push_back(tl.voted);
    cap.layers.push_back(std::move(tl));
  }
  return cap;
}

TmrCapture nw_tmr_forward(const QuantModel& m, const TensorQ& x,
                          const FaultConfig& cfg, uint64_t exec_base) {
  auto fwd = [&](uint64_t copy) {
    return model_forward(m, x, fault_hooks(cfg, exec_of(exec_base, copy)));
  };
  ActivationsQ a0 = fwd(0), a1 = fwd(1), a2 = fwd(2);
  TmrCapture cap;
  cap.layers.reserve(m.layers.size());
  for (int i = 0; i < m.layer_count(); ++i) {
    TmrLayer tl;
    tl.voted = vote3(a0.acts[i + 1], a1.acts[i + 1], a2.acts[i + 1]);
    tl.copy0 = a0.acts[i + 1];
    tl.similarity = similarity(tl.voted, tl.copy0);
    cap.layers.push_back(std::move(tl));
  }
  return cap;
}

TmrCapture tmr_forward(const QuantModel& m, const TensorQ& x,
                       const FaultConfig& cfg, const TmrPolicy& policy,
                       uint64_t exec_base) {
  switch (policy.variant) {
    case TmrVariant::LayerWise:
      return lw_tmr_forward(m, x, cfg, policy, exec_base);
    case TmrVariant::NetworkWise:
      return nw_tmr_forward(m, x, cfg, exec_base);
    case TmrVariant::None: {
      ActivationsQ a =
          model_forward(m, x, fault_hooks(cfg, exec_of(exec_base, 0)));
      TmrCapture cap;
      cap.layers.reserve(m.layers.size());
      for (int i = 0; i < m.layer_count(); ++i) {
        TmrLayer tl;
        tl.voted = a.acts[i + 1];
        tl.copy0 = a.acts[i + 1];
        tl.similarity = 1.0;
        cap.layers.push_back(std::move(tl));
      }
      return cap;
    }
  }
  throw ConfigError("unknown TMR variant");
}

std::vector<double> similarity_profile(const QuantModel& m, const TensorQ& x,
                                       const FaultConfig& cfg,
                                       TmrVariant variant,
                                       uint64_t exec_base) {
  TmrPolicy pol;
  pol.variant = variant == TmrVariant::None ? TmrVariant::LayerWise : variant;
  TmrCapture cap = tmr_forward(m, x, cfg, pol, exec_base);
  std::vector<double> out;
  out.reserve(cap.layers.size());
  for (const auto& tl : cap.layers) out.push_back(tl.similarity);
  return out;
}

}  // namespace r2f
