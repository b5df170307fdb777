#include "r2f/zoo.hpp"

#include "r2f/quant.hpp"
#include "r2f/rng.hpp"

namespace r2f {

namespace {

/// Uniform init in [-2^limit_exp, 2^limit_exp) using exact dyadic arithmetic
/// (no libm), quantized to the layer's weight exponent.
void init_weights(LayerDesc& L, Rng& rng, int limit_exp) {
  for (auto& w : L.weights) {
    double u = rng.next_double();            // [0, 1), exact dyadic
    double v = (u - 0.5) * std::ldexp(1.0, limit_exp + 1);
    w = quantize_value(v, L.w_e);
  }
}

struct Builder {
  QuantModel m;
  Rng rng;
  int8_t cur_e;

  Builder(uint16_t c, uint16_t h, uint16_t w, int8_t in_e, uint64_t seed)
      : rng(mix_key(seed, 0x6d6f64656cULL)) {
    m.in_c = c;
    m.in_h = h;
    m.in_w = w;
    m.in_e = in_e;
    cur_e = in_e;
  }

  void conv(uint16_t ic, uint16_t oc, uint16_t k, uint16_t pad, int8_t w_e,
            int8_t out_e, int limit_exp) {
    LayerDesc L;
    L.kind = LayerKind::Conv2D;
    L.f[0] = ic;
    L.f[1] = oc;
    L.f[2] = k;
    L.f[3] = 1;
    L.f[4] = pad;
    L.w_e = w_e;
    L.out_e = out_e;
    L.weights.resize(size_t(oc) * ic * k * k);
    L.biases.assign(oc, 0);
    init_weights(L, rng, limit_exp);
    m.layers.push_back(std::move(L));
    cur_e = out_e;
  }

  void fc(uint16_t fin, uint16_t fout, int8_t w_e, int8_t out_e,
          int limit_exp) {
    LayerDesc L;
    L.kind = LayerKind::FullyConnected;
    L.f[0] = fin;
    L.f[1] = fout;
    L.w_e = w_e;
    L.out_e = out_e;
    L.weights.resize(size_t(fout) * fin);
    L.biases.assign(fout, 0);
    init_weights(L, rng, limit_exp);
    m.layers.push_back(std::move(L));
    cur_e = out_e;
  }

  void simple(LayerKind kind, uint16_t f0 = 0) {
    LayerDesc L;
    L.kind = kind;
    L.f[0] = f0;
    L.out_e = cur_e;
    m.layers.push_back(std::move(L));
  }

  QuantModel take() {
    m.finalize();
    return std::move(m);
  }
};

}  // namespace

QuantModel build_tiny_net(uint64_t seed) {
  Builder b(1, 28, 28, -7, seed);
  b.conv(1, 8, 3, 1, -7, -5, -1);
  b.simple(LayerKind::ReLU);
  b.simple(LayerKind::MaxPool, 2);
  b.conv(8, 16, 3, 1, -7, -4, -2);
  b.simple(LayerKind::ReLU);
  b.simple(LayerKind::MaxPool, 2);
  b.simple(LayerKind::Flatten);
  b.fc(784, 32, -8, -3, -4);
  b.simple(LayerKind::ReLU);
  b.fc(32, 10, -7, -2, -2);
  b.simple(LayerKind::SoftmaxLoss);
  return b.take();
}

QuantModel build_tiny_resnet(uint64_t seed) {
  Builder b(1, 28, 28, -7, seed);
  b.conv(1, 8, 3, 1, -7, -5, -1);   // 0
  b.simple(LayerKind::ReLU);        // 1
  b.conv(8, 8, 3, 1, -7, -5, -2);   // 2
  b.conv(8, 8, 3, 1, -7, -5, -2);   // 3
  b.simple(LayerKind::ResidualAdd, 1);  // 4: adds layer 1 output
  b.simple(LayerKind::ReLU);        // 5
  b.simple(LayerKind::MaxPool, 2);  // 6
  b.conv(8, 16, 3, 1, -7, -4, -2);  // 7
  b.simple(LayerKind::ReLU);        // 8
  b.simple(LayerKind::MaxPool, 2);  // 9
  b.simple(LayerKind::AvgPool, 7);  // 10: global 7x7 -> 1x1
  b.simple(LayerKind::Flatten);     // 11
  b.fc(16, 10, -6, -2, -1);         // 12
  b.simple(LayerKind::SoftmaxLoss); // 13
  return b.take();
}

QuantModel build_toy8(uint64_t seed, int classes) {
  Builder b(1, 8, 8, -7, seed);
  b.conv(1, 4, 3, 1, -7, -5, -1);
  b.simple(LayerKind::ReLU);
  b.simple(LayerKind::MaxPool, 2);
  b.simple(LayerKind::Flatten);
  b.fc(64, 16, -7, -3, -2);
  b.simple(LayerKind::ReLU);
  b.fc(16, static_cast<uint16_t>(classes), -7, -2, -1);
  b.simple(LayerKind::SoftmaxLoss);
  return b.take();
}

QuantModel build_model(const std::string& arch, uint64_t seed) {
  if (arch == "tiny-net") return build_tiny_net(seed);
  if (arch == "tiny-resnet") return build_tiny_resnet(seed);
  if (arch == "toy8") return build_toy8(seed);
  throw ConfigError("unknown model arch '" + arch + "'");
}

}  // namespace r2f
