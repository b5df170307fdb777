#include "r2f/nn.hpp"

#include <algorithm>
#include <cmath>

#include "r2f/quant.hpp"

namespace r2f {

namespace {

void check_input(const TensorQ& x, const LayerDesc& L, int li) {
  Shape want = L.in_shape;
  if (x.shape.c != want.c || x.shape.h != want.h || x.shape.w != want.w)
    throw ShapeError("layer " + std::to_string(li) + " (" +
                     layer_kind_name(L.kind) + "): input " + x.shape.str() +
                     " does not match expected " + want.str());
}

TensorQ weight_tensor(const LayerDesc& L) {
  if (L.kind == LayerKind::Conv2D)
    return TensorQ(Shape{L.f[1], L.f[0], L.f[2], L.f[2]}, L.weights);
  return TensorQ(Shape{L.f[1], L.f[0], 1, 1}, L.weights);  // FC: [out][in]
}

}  // namespace

TensorQ conv2d_forward(const TensorQ& x, const LayerDesc& L, const MacHook& h,
                       int li) {
  check_input(x, L, li);
  TensorQ xin = x;
  if (h.on_input) h.on_input(xin);
  TensorQ wt = weight_tensor(L);
  if (h.on_weight) h.on_weight(wt);

  const int n = x.shape.n, ic = L.f[0], oc = L.f[1], k = L.f[2];
  const int s = L.stride_or(1), p = L.f[4];
  const int ih = x.shape.h, iw = x.shape.w;
  const int oh = L.out_shape.h, ow = L.out_shape.w;
  TensorQ out(Shape{n, oc, oh, ow});
  const bool per_mac = static_cast<bool>(h.per_input) ||
                       static_cast<bool>(h.per_weight);
  for (int bn = 0; bn < n; ++bn)
    for (int o = 0; o < oc; ++o)
      for (int y = 0; y < oh; ++y)
        for (int xo = 0; xo < ow; ++xo) {
          int32_t acc = L.biases[o];
          for (int i = 0; i < ic; ++i)
            for (int ky = 0; ky < k; ++ky) {
              int yy = y * s - p + ky;
              if (yy < 0 || yy >= ih) continue;
              for (int kx = 0; kx < k; ++kx) {
                int xx = xo * s - p + kx;
                if (xx < 0 || xx >= iw) continue;
                int8_t xv = xin.at(bn, i, yy, xx);
                int8_t wv = wt.at(o, i, ky, kx);
                if (per_mac) {
                  if (h.per_input) xv = h.per_input(xv);
                  if (h.per_weight) wv = h.per_weight(wv);
                }
                acc += int32_t(xv) * int32_t(wv);
              }
            }
          out.at(bn, o, y, xo) = requantize_acc(acc, L.shift);
        }
  if (h.on_output) h.on_output(out);
  return out;
}

TensorQ fc_forward(const TensorQ& x, const LayerDesc& L, const MacHook& h,
                   int li) {
  check_input(x, L, li);
  TensorQ xin = x;
  if (h.on_input) h.on_input(xin);
  TensorQ wt = weight_tensor(L);
  if (h.on_weight) h.on_weight(wt);

  const int n = x.shape.n, fin = L.f[0], fout = L.f[1];
  TensorQ out(Shape{n, fout, 1, 1});
  const bool per_mac = static_cast<bool>(h.per_input) ||
                       static_cast<bool>(h.per_weight);
  for (int bn = 0; bn < n; ++bn)
    for (int o = 0; o < fout; ++o) {
      int32_t acc = L.biases[o];
      for (int i = 0; i < fin; ++i) {
        int8_t xv = xin.data[size_t(bn) * fin + i];
        int8_t wv = wt.data[size_t(o) * fin + i];
        if (per_mac) {
          if (h.per_input) xv = h.per_input(xv);
          if (h.per_weight) wv = h.per_weight(wv);
        }
        acc += int32_t(xv) * int32_t(wv);
      }
      out.data[size_t(bn) * fout + o] = requantize_acc(acc, L.shift);
    }
  if (h.on_output) h.on_output(out);
  return out;
}

TensorQ layer_forward(const TensorQ& x, const LayerDesc& L, const MacHook& h,
                      const TensorQ* res_ref, int li) {
  switch (L.kind) {
    case LayerKind::Conv2D:
      return conv2d_forward(x, L, h, li);
    case LayerKind::FullyConnected:
      return fc_forward(x, L, h, li);
    default:
      break;
  }
  check_input(x, L, li);
  TensorQ xin = x;
  if (h.on_input) h.on_input(xin);
  TensorQ out;
  switch (L.kind) {
    case LayerKind::ReLU: {
      out = xin;
      for (auto& v : out.data) v = std::max<int8_t>(v, 0);
      break;
    }
    case LayerKind::MaxPool: {
      const int win = L.f[0], s = L.pool_stride();
      const int n = xin.shape.n, c = xin.shape.c;
      const int oh = L.out_shape.h, ow = L.out_shape.w;
      out = TensorQ(Shape{n, c, oh, ow});
      for (int bn = 0; bn < n; ++bn)
        for (int ch = 0; ch < c; ++ch)
          for (int y = 0; y < oh; ++y)
            for (int xo = 0; xo < ow; ++xo) {
              int8_t m = kQMin;
              for (int ky = 0; ky < win; ++ky)
                for (int kx = 0; kx < win; ++kx)
                  m = std::max(m, xin.at(bn, ch, y * s + ky, xo * s + kx));
              out.at(bn, ch, y, xo) = m;
            }
      break;
    }
    case LayerKind::AvgPool: {
      const int win = L.f[0], s = L.pool_stride();
      const int n = xin.shape.n, c = xin.shape.c;
      const int oh = L.out_shape.h, ow = L.out_shape.w;
      const int32_t cnt = win * win;
      out = TensorQ(Shape{n, c, oh, ow});
      for (int bn = 0; bn < n; ++bn)
        for (int ch = 0; ch < c; ++ch)
          for (int y = 0; y < oh; ++y)
            for (int xo = 0; xo < ow; ++xo) {
              int32_t acc = 0;
              for (int ky = 0; ky < win; ++ky)
                for (int kx = 0; kx < win; ++kx)
                  acc += xin.at(bn, ch, y * s + ky, xo * s + kx);
              // Round half away from zero on the window mean.
              int32_t q = acc >= 0 ? (2 * acc + cnt) / (2 * cnt)
                                   : -((-2 * acc + cnt) / (2 * cnt));
              out.at(bn, ch, y, xo) = clamp_q(q);
            }
      break;
    }
    case LayerKind::Flatten: {
      out = TensorQ(Shape{xin.shape.n, xin.shape.c * xin.shape.h * xin.shape.w,
                          1, 1},
                    xin.data);
      break;
    }
    case LayerKind::ResidualAdd: {
      if (!res_ref)
        throw ShapeError("layer " + std::to_string(li) +
                         ": ResidualAdd missing referenced activation");
      if (!(res_ref->shape == xin.shape))
        throw ShapeError("layer " + std::to_string(li) +
                         ": ResidualAdd shapes " + res_ref->shape.str() +
                         " vs " + xin.shape.str());
      out = TensorQ(xin.shape);
      for (size_t j = 0; j < out.data.size(); ++j)
        out.data[j] =
            clamp_q(int32_t(xin.data[j]) + int32_t(res_ref->data[j]));
      break;
    }
    case LayerKind::SoftmaxLoss: {
      out = xin;  // identity in the quantized domain; loss lives float-side
      break;
    }
    default:
      throw ShapeError("layer " + std::to_string(li) + ": unhandled kind");
  }
  if (h.on_output) h.on_output(out);
  return out;
}

ActivationsQ model_forward(const QuantModel& m, const TensorQ& x,
                           const HookFn& hooks) {
  if (x.shape.c != m.in_c || x.shape.h != m.in_h || x.shape.w != m.in_w)
    throw ShapeError("model input " + x.shape.str() + " does not match " +
                     m.input_shape(x.shape.n).str());
  ActivationsQ r;
  r.acts.reserve(m.layers.size() + 1);
  r.exps.reserve(m.layers.size() + 1);
  r.acts.push_back(x);
  r.exps.push_back(m.in_e);
  for (int i = 0; i < m.layer_count(); ++i) {
    const LayerDesc& L = m.layers[i];
    const TensorQ* ref = L.kind == LayerKind::ResidualAdd
                             ? &r.acts[size_t(L.f[0]) + 1]
                             : nullptr;
    r.acts.push_back(layer_forward(r.acts.back(), L, hooks(i), ref, i));
    r.exps.push_back(L.out_e);
  }
  return r;
}

ActivationsF float_forward(const FloatModel& m, const TensorF& x) {
  ActivationsF r;
  r.acts.reserve(m.arch.layers.size() + 1);
  r.acts.push_back(x);
  for (size_t i = 0; i < m.arch.layers.size(); ++i) {
    const LayerDesc& L = m.arch.layers[i];
    const TensorF& in = r.acts.back();
    TensorF out;
    switch (L.kind) {
      case LayerKind::Conv2D: {
        const int n = in.shape.n, ic = L.f[0], oc = L.f[1], k = L.f[2];
        const int s = L.stride_or(1), p = L.f[4];
        const int ih = in.shape.h, iw = in.shape.w;
        const int oh = L.out_shape.h, ow = L.out_shape.w;
        out = TensorF(Shape{n, oc, oh, ow});
        for (int bn = 0; bn < n; ++bn)
          for (int o = 0; o < oc; ++o)
            for (int y = 0; y < oh; ++y)
              for (int xo = 0; xo < ow; ++xo) {
                double acc = m.b[i][o];
                for (int c = 0; c < ic; ++c)
                  for (int ky = 0; ky < k; ++ky) {
                    int yy = y * s - p + ky;
                    if (yy < 0 || yy >= ih) continue;
                    for (int kx = 0; kx < k; ++kx) {
                      int xx = xo * s - p + kx;
                      if (xx < 0 || xx >= iw) continue;
                      acc += in.at(bn, c, yy, xx) *
                             m.w[i][((size_t(o) * ic + c) * k + ky) * k + kx];
                    }
                  }
                out.at(bn, o, y, xo) = static_cast<float>(acc);
              }
        break;
      }
      case LayerKind::FullyConnected: {
        const int n = in.shape.n, fin = L.f[0], fout = L.f[1];
        out = TensorF(Shape{n, fout, 1, 1});
        for (int bn = 0; bn < n; ++bn)
          for (int o = 0; o < fout; ++o) {
            double acc = m.b[i][o];
            for (int c = 0; c < fin; ++c)
              acc += in.data[size_t(bn) * fin + c] * m.w[i][size_t(o) * fin + c];
            out.data[size_t(bn) * fout + o] = static_cast<float>(acc);
          }
        break;
      }
      case LayerKind::ReLU: {
        out = in;
        for (auto& v : out.data) v = std::max(v, 0.0f);
        break;
      }
      case LayerKind::MaxPool: {
        const int win = L.f[0], s = L.pool_stride();
        const int n = in.shape.n, c = in.shape.c;
        const int oh = L.out_shape.h, ow = L.out_shape.w;
        out = TensorF(Shape{n, c, oh, ow});
        for (int bn = 0; bn < n; ++bn)
          for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < oh; ++y)
              for (int xo = 0; xo < ow; ++xo) {
                float mval = in.at(bn, ch, y * s, xo * s);
                for (int ky = 0; ky < win; ++ky)
                  for (int kx = 0; kx < win; ++kx)
                    mval = std::max(mval, in.at(bn, ch, y * s + ky, xo * s + kx));
                out.at(bn, ch, y, xo) = mval;
              }
        break;
      }
      case LayerKind::AvgPool: {
        const int win = L.f[0], s = L.pool_stride();
        const int n = in.shape.n, c = in.shape.c;
        const int oh = L.out_shape.h, ow = L.out_shape.w;
        out = TensorF(Shape{n, c, oh, ow});
        for (int bn = 0; bn < n; ++bn)
          for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < oh; ++y)
              for (int xo = 0; xo < ow; ++xo) {
                double acc = 0;
                for (int ky = 0; ky < win; ++ky)
                  for (int kx = 0; kx < win; ++kx)
                    acc += in.at(bn, ch, y * s + ky, xo * s + kx);
                out.at(bn, ch, y, xo) = static_cast<float>(acc / (win * win));
              }
        break;
      }
      case LayerKind::Flatten: {
        out = TensorF(Shape{in.shape.n, in.shape.c * in.shape.h * in.shape.w,
                            1, 1},
                      in.data);
        break;
      }
      case LayerKind::ResidualAdd: {
        const TensorF& ref = r.acts[size_t(L.f[0]) + 1];
        out = in;
        for (size_t j = 0; j < out.data.size(); ++j) out.data[j] += ref.data[j];
        break;
      }
      case LayerKind::SoftmaxLoss: {
        out = in;
        break;
      }
    }
    r.acts.push_back(std::move(out));
  }
  return r;
}

ActivationsF dequantize_activations(const ActivationsQ& a) {
  ActivationsF r;
  r.acts.reserve(a.acts.size());
  for (size_t i = 0; i < a.acts.size(); ++i) {
    const TensorQ& q = a.acts[i];
    TensorF f(q.shape);
    float s = static_cast<float>(std::ldexp(1.0, a.exps[i]));
    for (size_t j = 0; j < q.data.size(); ++j) f.data[j] = q.data[j] * s;
    r.acts.push_back(std::move(f));
  }
  return r;
}

}  // namespace r2f
