#include "r2f/model.hpp"

#include <cmath>

namespace r2f {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::FullyConnected: return "FullyConnected";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::MaxPool: return "MaxPool";
    case LayerKind::AvgPool: return "AvgPool";
    case LayerKind::ResidualAdd: return "ResidualAdd";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::SoftmaxLoss: return "SoftmaxLoss";
  }
  return "?";
}

namespace {

[[noreturn]] void layer_fail(int i, const std::string& msg) {
  throw ShapeError("layer " + std::to_string(i) + ": " + msg);
}

int out_dim(int in, int k, int stride, int pad, int i, const char* axis) {
  int span = in + 2 * pad - k;
  if (span < 0 || stride <= 0)
    layer_fail(i, std::string("window ") + std::to_string(k) +
                      " does not fit input " + axis + "=" + std::to_string(in) +
                      " with pad " + std::to_string(pad));
  return span / stride + 1;
}

}  // namespace

void QuantModel::finalize() {
  check_exponent(in_e, "model input");
  Shape cur{1, in_c, in_h, in_w};
  int8_t cur_e = in_e;
  for (int i = 0; i < layer_count(); ++i) {
    LayerDesc& L = layers[i];
    L.in_shape = cur;
    L.in_e = cur_e;
    check_exponent(L.out_e, "layer output");
    switch (L.kind) {
      case LayerKind::Conv2D: {
        int ic = L.f[0], oc = L.f[1], k = L.f[2];
        int s = L.stride_or(1), p = L.f[4];
        if (ic == 0 || oc == 0 || k == 0)
          layer_fail(i, "Conv2D with zero in_c/out_c/kernel");
        if (cur.c != ic)
          layer_fail(i, "Conv2D expects " + std::to_string(ic) +
                            " channels, input has " + std::to_string(cur.c));
        int oh = out_dim(cur.h, k, s, p, i, "h");
        int ow = out_dim(cur.w, k, s, p, i, "w");
        size_t wn = static_cast<size_t>(oc) * ic * k * k;
        if (L.weights.size() != wn)
          layer_fail(i, "Conv2D weight blob " + std::to_string(L.weights.size()) +
                            ", expected " + std::to_string(wn));
        if (L.biases.size() != static_cast<size_t>(oc))
          layer_fail(i, "Conv2D bias blob " + std::to_string(L.biases.size()) +
                            ", expected " + std::to_string(oc));
        check_exponent(L.w_e, "weight");
        L.shift = int(L.out_e) - int(L.in_e) - int(L.w_e);
        if (L.shift < 0)
          throw ConfigError("layer " + std::to_string(i) +
                            ": requantization shift " + std::to_string(L.shift) +
                            " negative (out_e too small for in_e + w_e)");
        cur = Shape{1, oc, oh, ow};
        L.mac_count = static_cast<uint64_t>(ic) * k * k * oc * oh * ow;
        L.op_count = L.mac_count;
        break;
      }
      case LayerKind::FullyConnected: {
        int fin = L.f[0], fout = L.f[1];
        if (fin == 0 || fout == 0) layer_fail(i, "FC with zero feature count");
        if (cur.c != fin || cur.h != 1 || cur.w != 1)
          layer_fail(i, "FC expects input [1," + std::to_string(fin) +
                            ",1,1], got " + cur.str() + " (Flatten first)");
        if (L.weights.size() != static_cast<size_t>(fout) * fin)
          layer_fail(i, "FC weight blob " + std::to_string(L.weights.size()) +
                            ", expected " + std::to_string(size_t(fout) * fin));
        if (L.biases.size() != static_cast<size_t>(fout))
          layer_fail(i, "FC bias blob " + std::to_string(L.biases.size()) +
                            ", expected " + std::to_string(fout));
        check_exponent(L.w_e, "weight");
        L.shift = int(L.out_e) - int(L.in_e) - int(L.w_e);
        if (L.shift < 0)
          throw ConfigError("layer " + std::to_string(i) +
                            ": requantization shift " + std::to_string(L.shift) +
                            " negative");
        cur = Shape{1, fout, 1, 1};
        L.mac_count = static_cast<uint64_t>(fin) * fout;
        L.op_count = L.mac_count;
        break;
      }
      case LayerKind::MaxPool:
      case LayerKind::AvgPool: {
        int win = L.f[0];
        int s = L.pool_stride();
        if (win == 0) layer_fail(i, "pool with zero window");
        int oh = out_dim(cur.h, win, s, 0, i, "h");
        int ow = out_dim(cur.w, win, s, 0, i, "w");
        if (L.out_e != cur_e)
          throw ConfigError("layer " + std::to_string(i) +
                            ": pool must keep input exponent " +
                            std::to_string(cur_e));
        cur = Shape{1, cur.c, oh, ow};
        break;
      }
      case LayerKind::ReLU:
      case LayerKind::SoftmaxLoss: {
        if (L.out_e != cur_e)
          throw ConfigError("layer " + std::to_string(i) +
                            ": elementwise layer must keep input exponent");
        break;
      }
      case LayerKind::Flatten: {
        if (L.out_e != cur_e)
          throw ConfigError("layer " + std::to_string(i) +
                            ": Flatten must keep input exponent");
        cur = Shape{1, cur.c * cur.h * cur.w, 1, 1};
        break;
      }
      case LayerKind::ResidualAdd: {
        int ref = L.f[0];
        if (ref >= i)
          layer_fail(i, "ResidualAdd references layer " + std::to_string(ref) +
                            " not strictly earlier");
        const LayerDesc& R = layers[ref];
        if (!(R.out_shape == cur))
          layer_fail(i, "ResidualAdd shapes differ: " + R.out_shape.str() +
                            " vs " + cur.str());
        if (R.out_e != cur_e || L.out_e != cur_e)
          throw ConfigError("layer " + std::to_string(i) +
                            ": ResidualAdd operands must share one exponent");
        break;
      }
    }
    if (!L.weighted()) {
      if (!L.weights.empty() || !L.biases.empty())
        layer_fail(i, std::string(layer_kind_name(L.kind)) +
                          " carries weight/bias blobs");
      L.mac_count = 0;
      L.op_count = cur.size();
    }
    L.out_shape = cur;
    cur_e = L.out_e;
  }
  if (!layers.empty() && layers.back().kind != LayerKind::SoftmaxLoss)
    throw ConfigError("model must end in SoftmaxLoss");
}

uint64_t QuantModel::total_macs() const {
  uint64_t n = 0;
  for (const auto& L : layers) n += L.mac_count;
  return n;
}

uint64_t QuantModel::activation_elems() const {
  uint64_t n = 0;
  for (const auto& L : layers) n += L.out_shape.size();
  return n;
}

static constexpr char kModelMagic[4] = {'R', '2', 'F', 'M'};
static constexpr uint16_t kModelVersion = 1;

Bytes QuantModel::serialize() const {
  ByteWriter w;
  w.bytes(kModelMagic, 4);
  w.u16(kModelVersion);
  w.u16(static_cast<uint16_t>(layers.size()));
  w.u16(in_c);
  w.u16(in_h);
  w.u16(in_w);
  w.i8(in_e);
  for (const LayerDesc& L : layers) {
    w.u8(static_cast<uint8_t>(L.kind));
    for (uint16_t fv : L.f) w.u16(fv);
    w.i8(L.w_e);
    w.i8(L.out_e);
    w.u32(static_cast<uint32_t>(L.weights.size()));
    w.bytes(L.weights.data(), L.weights.size());
    w.u32(static_cast<uint32_t>(L.biases.size()));
    for (int32_t bv : L.biases) w.i32(bv);
  }
  return w.take();
}

QuantModel QuantModel::deserialize(ByteSpan bytes) {
  ByteReader r(bytes);
  ByteSpan magic = r.raw(4);
  if (std::memcmp(magic.data(), kModelMagic, 4) != 0)
    throw DecodeError("bad model magic");
  uint16_t ver = r.u16();
  if (ver != kModelVersion)
    throw DecodeError("unsupported model version " + std::to_string(ver));
  QuantModel m;
  uint16_t n_layers = r.u16();
  m.in_c = r.u16();
  m.in_h = r.u16();
  m.in_w = r.u16();
  m.in_e = r.i8();
  if (m.in_c == 0 || m.in_h == 0 || m.in_w == 0)
    throw DecodeError("zero input dimension");
  m.layers.reserve(n_layers);
  for (int i = 0; i < n_layers; ++i) {
    LayerDesc L;
    uint8_t kind = r.u8();
    if (kind < 1 || kind > 8)
      throw DecodeError("layer " + std::to_string(i) + ": unknown kind " +
                        std::to_string(kind));
    L.kind = static_cast<LayerKind>(kind);
    for (auto& fv : L.f) fv = r.u16();
    L.w_e = r.i8();
    L.out_e = r.i8();
    uint32_t wn = r.u32();
    if (wn > (1u << 26))
      throw DecodeError("layer " + std::to_string(i) + ": weight count " +
                        std::to_string(wn) + " implausible");
    ByteSpan wb = r.raw(wn);
    L.weights.resize(wn);
    std::memcpy(L.weights.data(), wb.data(), wn);
    uint32_t bn = r.u32();
    if (bn > (1u << 22))
      throw DecodeError("layer " + std::to_string(i) + ": bias count " +
                        std::to_string(bn) + " implausible");
    L.biases.resize(bn);
    for (auto& bv : L.biases) bv = r.i32();
    m.layers.push_back(std::move(L));
  }
  r.expect_done("model");
  try {
    m.finalize();
  } catch (const Error& e) {
    throw DecodeError(std::string("model fails validation: ") + e.what());
  }
  return m;
}

FloatModel to_float(const QuantModel& m) {
  FloatModel fm;
  fm.arch = m;
  fm.w.resize(m.layers.size());
  fm.b.resize(m.layers.size());
  for (size_t i = 0; i < m.layers.size(); ++i) {
    const LayerDesc& L = m.layers[i];
    if (!L.weighted()) continue;
    double ws = std::ldexp(1.0, L.w_e);
    double bs = std::ldexp(1.0, int(L.in_e) + int(L.w_e));
    fm.w[i].resize(L.weights.size());
    for (size_t j = 0; j < L.weights.size(); ++j)
      fm.w[i][j] = L.weights[j] * ws;
    fm.b[i].resize(L.biases.size());
    for (size_t j = 0; j < L.biases.size(); ++j) fm.b[i][j] = L.biases[j] * bs;
  }
  return fm;
}

QuantModel to_quant(const FloatModel& fm) {
  QuantModel m = fm.arch;
  for (size_t i = 0; i < m.layers.size(); ++i) {
    LayerDesc& L = m.layers[i];
    if (!L.weighted()) continue;
    for (size_t j = 0; j < L.weights.size(); ++j)
      L.weights[j] = quantize_value(fm.w[i][j], L.w_e);
    double inv_bs = std::ldexp(1.0, -(int(L.in_e) + int(L.w_e)));
    for (size_t j = 0; j < L.biases.size(); ++j) {
      double scaled = fm.b[i][j] * inv_bs;
      double rounded = scaled >= 0 ? std::floor(scaled + 0.5)
                                   : std::ceil(scaled - 0.5);
      if (rounded > 2147483647.0) rounded = 2147483647.0;
      if (rounded < -2147483648.0) rounded = -2147483648.0;
      L.biases[j] = static_cast<int32_t>(rounded);
    }
  }
  m.finalize();
  return m;
}

}  // namespace r2f
