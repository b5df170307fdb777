#include "r2f/fault.hpp"

#include <bit>
#include <cmath>
#include <memory>

#include "r2f/util.hpp"

namespace r2f {

void FaultConfig::validate() const {
  if (!(ber >= 0.0 && ber <= 1.0))
    throw ConfigError("fault.ber " + std::to_string(ber) + " outside [0,1]");
  for (const auto& [layer, b] : per_layer_ber)
    if (!(b >= 0.0 && b <= 1.0))
      throw ConfigError("per-layer ber for layer " + std::to_string(layer) +
                        " outside [0,1]");
  bool any_rate = ber > 0.0;
  for (const auto& [layer, b] : per_layer_ber) any_rate = any_rate || b > 0.0;
  if (any_rate && !site_inputs && !site_weights && !site_outputs)
    throw ConfigError("ber > 0 with every injection site disabled");
}

uint8_t flip_bits(uint8_t word, double ber, Rng& rng) {
  if (ber <= 0.0) return word;
  uint8_t mask = 0;
  for (int b = 0; b < 8; ++b)
    if (rng.next_double() < ber) mask |= uint8_t(1) << b;
  return word ^ mask;
}

void flip_span_perbit(int8_t* p, size_t n, double ber, Rng& rng) {
  for (size_t i = 0; i < n; ++i)
    p[i] = static_cast<int8_t>(flip_bits(static_cast<uint8_t>(p[i]), ber, rng));
}

void flip_span_gap(int8_t* p, size_t n, double ber, Rng& rng) {
  if (ber <= 0.0 || n == 0) return;
  const size_t total_bits = n * 8;
  if (ber >= 1.0) {
    for (size_t i = 0; i < n; ++i) p[i] = static_cast<int8_t>(~p[i]);
    return;
  }
  const double log1m = std::log1p(-ber);
  // Position of the next flip: bit += floor(log(1-u)/log(1-ber)), flip,
  // advance one. Equivalent to scanning Bernoulli trials bit by bit.
  size_t bit = 0;
  for (;;) {
    double u = rng.next_double();
    double gap = std::floor(std::log1p(-u) / log1m);
    if (gap >= double(total_bits)) return;  // also covers inf
    bit += static_cast<size_t>(gap);
    if (bit >= total_bits) return;
    p[bit / 8] = static_cast<int8_t>(uint8_t(p[bit / 8]) ^
                                     (uint8_t(1) << (bit % 8)));
    ++bit;
    if (bit >= total_bits) return;
  }
}

void flip_span(int8_t* p, size_t n, double ber, Rng& rng) {
  if (ber * double(n) * 8.0 < 1e6)
    flip_span_gap(p, n, ber, rng);
  else
    flip_span_perbit(p, n, ber, rng);
}

void flip_tensor(TensorQ& t, double ber, uint64_t stream_seed) {
  if (ber <= 0.0) return;
  const size_t row = t.shape.size() / t.shape.n;
  for (int r = 0; r < t.shape.n; ++r) {
    Rng rng(mix_key(stream_seed, uint64_t(r)));
    flip_span(t.data.data() + size_t(r) * row, row, ber, rng);
  }
}

double effective_ber(const TensorQ& clean, const TensorQ& faulty) {
  if (!(clean.shape == faulty.shape))
    throw ShapeError("effective_ber shapes " + clean.shape.str() + " vs " +
                     faulty.shape.str());
  uint64_t diff = 0;
  for (size_t i = 0; i < clean.data.size(); ++i)
    diff += std::popcount(uint8_t(clean.data[i] ^ faulty.data[i]));
  return clean.data.empty() ? 0.0
                            : double(diff) / (8.0 * double(clean.data.size()));
}

MacHook make_fault_hook(const FaultConfig& cfg, int layer_index,
                        uint64_t execution_index) {
  MacHook h;
  const double b = cfg.ber_for(layer_index);
  if (b <= 0.0) return h;
  const uint64_t seed = cfg.seed;
  const uint64_t li = static_cast<uint64_t>(layer_index);
  auto site_seed = [=](Site s) {
    return mix_key(seed, li, execution_index, static_cast<uint64_t>(s));
  };
  if (cfg.mode == FaultMode::PerMac) {
    // Transient operand corruption: a fresh draw at every MAC use. One
    // sequential stream per site; loop order is pinned by the forward pass.
    if (cfg.site_inputs) {
      auto rng = std::make_shared<Rng>(site_seed(Site::Input));
      h.per_input = [rng, b](int8_t v) {
        return static_cast<int8_t>(flip_bits(uint8_t(v), b, *rng));
      };
    }
    if (cfg.site_weights) {
      auto rng = std::make_shared<Rng>(site_seed(Site::Weight));
      h.per_weight = [rng, b](int8_t v) {
        return static_cast<int8_t>(flip_bits(uint8_t(v), b, *rng));
      };
    }
  } else {
    if (cfg.site_inputs)
      h.on_input = [b, s = site_seed(Site::Input)](TensorQ& t) {
        flip_tensor(t, b, s);
      };
    if (cfg.site_weights)
      h.on_weight = [b, s = site_seed(Site::Weight)](TensorQ& t) {
        flip_tensor(t, b, s);
      };
  }
  if (cfg.site_outputs)
    h.on_output = [b, s = site_seed(Site::Output)](TensorQ& t) {
      flip_tensor(t, b, s);
    };
  return h;
}

HookFn fault_hooks(const FaultConfig& cfg, uint64_t execution_index,
                   int input_site_layer) {
  return [cfg, execution_index, input_site_layer](int layer) {
    MacHook h = make_fault_hook(cfg, layer, execution_index);
    if (layer != input_site_layer) {
      h.on_input = nullptr;
      h.per_input = nullptr;
    }
    return h;
  };
}

}  // namespace r2f
