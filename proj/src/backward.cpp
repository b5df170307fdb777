#include "r2f/backward.hpp"

#include <algorithm>
#include <cmath>

namespace r2f {

namespace {

/// Row-wise softmax probabilities in double precision.
std::vector<double> softmax_rows(const TensorF& logits) {
  const int n = logits.shape.n, c = logits.shape.c;
  std::vector<double> p(size_t(n) * c);
  for (int bn = 0; bn < n; ++bn) {
    const float* row = logits.data.data() + size_t(bn) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, double(row[j]));
    double sum = 0;
    for (int j = 0; j < c; ++j) {
      double e = std::exp(double(row[j]) - mx);
      p[size_t(bn) * c + j] = e;
      sum += e;
    }
    for (int j = 0; j < c; ++j) p[size_t(bn) * c + j] /= sum;
  }
  return p;
}

void check_labels(const TensorF& logits, const std::vector<uint16_t>& labels) {
  if (logits.shape.h != 1 || logits.shape.w != 1)
    throw ShapeError("logits must be (N,C,1,1), got " + logits.shape.str());
  if (static_cast<size_t>(logits.shape.n) != labels.size())
    throw ShapeError("batch " + std::to_string(logits.shape.n) + " vs " +
                     std::to_string(labels.size()) + " labels");
  for (uint16_t l : labels)
    if (l >= logits.shape.c)
      throw ShapeError("label " + std::to_string(l) + " out of range for " +
                       std::to_string(logits.shape.c) + " classes");
}

}  // namespace

double loss_forward(const TensorF& logits, const std::vector<uint16_t>& labels) {
  check_labels(logits, labels);
  const int n = logits.shape.n, c = logits.shape.c;
  double total = 0;
  for (int bn = 0; bn < n; ++bn) {
    const float* row = logits.data.data() + size_t(bn) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, double(row[j]));
    double lse = 0;
    for (int j = 0; j < c; ++j) lse += std::exp(double(row[j]) - mx);
    total += std::log(lse) + mx - double(row[labels[bn]]);
  }
  return total / n;
}

GradientSet backward(const FloatModel& m, const ActivationsF& acts,
                     const std::vector<uint16_t>& labels) {
  const auto& layers = m.arch.layers;
  const size_t L = layers.size();
  if (acts.acts.size() != L + 1)
    throw ShapeError("activation list length " +
                     std::to_string(acts.acts.size()) + ", expected " +
                     std::to_string(L + 1));
  if (L == 0 || layers.back().kind != LayerKind::SoftmaxLoss)
    throw ShapeError("model must end in SoftmaxLoss for backward");
  for (size_t i = 0; i <= L; ++i) {
    Shape want = i == 0 ? m.arch.input_shape(acts.acts[0].shape.n)
                        : layers[i - 1].out_shape;
    const Shape& got = acts.acts[i].shape;
    if (got.c != want.c || got.h != want.h || got.w != want.w)
      throw ShapeError("activation " + std::to_string(i) + " shape " +
                       got.str() + " does not match topology " + want.str());
  }

  const TensorF& logits = acts.acts[L];
  check_labels(logits, labels);
  const int n = logits.shape.n, classes = logits.shape.c;

  GradientSet g;
  g.w.resize(L);
  g.b.resize(L);
  for (size_t i = 0; i < L; ++i) {
    g.w[i].assign(m.w[i].size(), 0.0);
    g.b[i].assign(m.b[i].size(), 0.0);
  }

  // d[i] = dLoss/d(acts[i]); start at the logits with (softmax - onehot)/N.
  std::vector<std::vector<double>> d(L + 1);
  for (size_t i = 0; i <= L; ++i) d[i].assign(acts.acts[i].size(), 0.0);
  std::vector<double> p = softmax_rows(logits);
  for (int bn = 0; bn < n; ++bn)
    for (int j = 0; j < classes; ++j)
      d[L][size_t(bn) * classes + j] =
          (p[size_t(bn) * classes + j] - (labels[bn] == j ? 1.0 : 0.0)) / n;

  for (int li = int(L) - 1; li >= 0; --li) {
    const LayerDesc& Ld = layers[li];
    const TensorF& in = acts.acts[li];
    const std::vector<double>& dy = d[li + 1];
    std::vector<double>& dx = d[li];
    switch (Ld.kind) {
      case LayerKind::Conv2D: {
        const int ic = Ld.f[0], oc = Ld.f[1], k = Ld.f[2];
        const int s = Ld.stride_or(1), pd = Ld.f[4];
        const int ih = in.shape.h, iw = in.shape.w;
        const int oh = Ld.out_shape.h, ow = Ld.out_shape.w;
        for (int bn = 0; bn < n; ++bn)
          for (int o = 0; o < oc; ++o)
            for (int y = 0; y < oh; ++y)
              for (int xo = 0; xo < ow; ++xo) {
                double gy = dy[((size_t(bn) * oc + o) * oh + y) * ow + xo];
                if (gy == 0.0) continue;
                g.b[li][o] += gy;
                for (int c = 0; c < ic; ++c)
                  for (int ky = 0; ky < k; ++ky) {
                    int yy = y * s - pd + ky;
                    if (yy < 0 || yy >= ih) continue;
                    for (int kx = 0; kx < k; ++kx) {
                      int xx = xo * s - pd + kx;
                      if (xx < 0 || xx >= iw) continue;
                      size_t xi = ((size_t(bn) * ic + c) * ih + yy) * iw + xx;
                      size_t wi = ((size_t(o) * ic + c) * k + ky) * k + kx;
                      g.w[li][wi] += gy * in.data[xi];
                      dx[xi] += gy * m.w[li][wi];
                    }
                  }
              }
        break;
      }
      case LayerKind::FullyConnected: {
        const int fin = Ld.f[0], fout = Ld.f[1];
        for (int bn = 0; bn < n; ++bn)
          for (int o = 0; o < fout; ++o) {
            double gy = dy[size_t(bn) * fout + o];
            if (gy == 0.0) continue;
            g.b[li][o] += gy;
            for (int c = 0; c < fin; ++c) {
              g.w[li][size_t(o) * fin + c] += gy * in.data[size_t(bn) * fin + c];
              dx[size_t(bn) * fin + c] += gy * m.w[li][size_t(o) * fin + c];
            }
          }
        break;
      }
      case LayerKind::ReLU: {
        for (size_t j = 0; j < dy.size(); ++j)
          dx[j] += in.data[j] > 0.0f ? dy[j] : 0.0;
        break;
      }
      case LayerKind::MaxPool: {
        const int win = Ld.f[0], s = Ld.pool_stride();
        const int c = in.shape.c, ih = in.shape.h, iw = in.shape.w;
        const int oh = Ld.out_shape.h, ow = Ld.out_shape.w;
        for (int bn = 0; bn < n; ++bn)
          for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < oh; ++y)
              for (int xo = 0; xo < ow; ++xo) {
                // First maximum in (ky, kx) scan order takes the gradient.
                int by = y * s, bx = xo * s;
                float best = in.at(bn, ch, by, bx);
                int wy = by, wx = bx;
                for (int ky = 0; ky < win; ++ky)
                  for (int kx = 0; kx < win; ++kx) {
                    float v = in.at(bn, ch, by + ky, bx + kx);
                    if (v > best) {
                      best = v;
                      wy = by + ky;
                      wx = bx + kx;
                    }
                  }
                dx[((size_t(bn) * c + ch) * ih + wy) * iw + wx] +=
                    dy[((size_t(bn) * c + ch) * oh + y) * ow + xo];
              }
        break;
      }
      case LayerKind::AvgPool: {
        const int win = Ld.f[0], s = Ld.pool_stride();
        const int c = in.shape.c, ih = in.shape.h, iw = in.shape.w;
        const int oh = Ld.out_shape.h, ow = Ld.out_shape.w;
        const double inv = 1.0 / (win * win);
        for (int bn = 0; bn < n; ++bn)
          for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < oh; ++y)
              for (int xo = 0; xo < ow; ++xo) {
                double gy =
                    dy[((size_t(bn) * c + ch) * oh + y) * ow + xo] * inv;
                for (int ky = 0; ky < win; ++ky)
                  for (int kx = 0; kx < win; ++kx)
                    dx[((size_t(bn) * c + ch) * ih + y * s + ky) * iw +
                       xo * s + kx] += gy;
              }
        break;
      }
      case LayerKind::Flatten:
      case LayerKind::SoftmaxLoss: {
        for (size_t j = 0; j < dy.size(); ++j) dx[j] += dy[j];
        break;
      }
      case LayerKind::ResidualAdd: {
        std::vector<double>& dref = d[size_t(Ld.f[0]) + 1];
        for (size_t j = 0; j < dy.size(); ++j) {
          dx[j] += dy[j];
          dref[j] += dy[j];
        }
        break;
      }
    }
  }
  return g;
}

void sgd_update(FloatModel& m, const GradientSet& g, double lr,
                double momentum, std::vector<std::vector<double>>& vw,
                std::vector<std::vector<double>>& vb) {
  const size_t L = m.arch.layers.size();
  if (g.w.size() != L || g.b.size() != L)
    throw ShapeError("gradient set has " + std::to_string(g.w.size()) +
                     " layers, model has " + std::to_string(L));
  if (vw.size() != L) {
    vw.resize(L);
    vb.resize(L);
    for (size_t i = 0; i < L; ++i) {
      vw[i].assign(m.w[i].size(), 0.0);
      vb[i].assign(m.b[i].size(), 0.0);
    }
  }
  for (size_t i = 0; i < L; ++i) {
    if (g.w[i].size() != m.w[i].size() || g.b[i].size() != m.b[i].size())
      throw ShapeError("layer " + std::to_string(i) + ": gradient size " +
                       std::to_string(g.w[i].size()) + " vs weights " +
                       std::to_string(m.w[i].size()));
    for (double gv : g.w[i])
      if (!std::isfinite(gv))
        throw Error("layer " + std::to_string(i) + ": non-finite weight gradient");
    for (double gv : g.b[i])
      if (!std::isfinite(gv))
        throw Error("layer " + std::to_string(i) + ": non-finite bias gradient");
    for (size_t j = 0; j < m.w[i].size(); ++j) {
      vw[i][j] = momentum * vw[i][j] + g.w[i][j];
      m.w[i][j] -= lr * vw[i][j];
    }
    for (size_t j = 0; j < m.b[i].size(); ++j) {
      vb[i][j] = momentum * vb[i][j] + g.b[i][j];
      m.b[i][j] -= lr * vb[i][j];
    }
  }
}

void SgdOptimizer::step(FloatModel& m, const GradientSet& g) {
  sgd_update(m, g, lr_, momentum_, vw_, vb_);
}

}  // namespace r2f
