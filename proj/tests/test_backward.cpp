#include <doctest.h>

#include <cmath>

#include "r2f/backward.hpp"
#include "r2f/zoo.hpp"

using namespace r2f;

namespace {

TensorF toy_input(const QuantModel& m, uint64_t salt) {
  TensorF x(m.input_shape(2));
  for (size_t i = 0; i < x.data.size(); ++i)
    x.data[i] = float(int((i * 7 + salt) % 19) - 9) / 12.0f;
  return x;
}

double loss_of(const FloatModel& f, const TensorF& x,
               const std::vector<uint16_t>& labels) {
  ActivationsF a = float_forward(f, x);
  return loss_forward(a.acts.back(), labels);
}

}  // namespace

TEST_SUITE("backward") {

TEST_CASE("softmax cross-entropy oracle") {
  TensorF logits(Shape{1, 2, 1, 1}, {0.0f, 0.0f});
  CHECK(loss_forward(logits, {0}) == doctest::Approx(std::log(2.0)));
  TensorF sure(Shape{1, 2, 1, 1}, {30.0f, -30.0f});
  CHECK(loss_forward(sure, {0}) == doctest::Approx(0.0).epsilon(1e-9));
  // Batch mean: one certain, one uniform.
  TensorF both(Shape{2, 2, 1, 1}, {30.0f, -30.0f, 0.0f, 0.0f});
  CHECK(loss_forward(both, {0, 1}) ==
        doctest::Approx(std::log(2.0) / 2.0).epsilon(1e-9));
}

TEST_CASE("loss is invariant to logit shifts") {
  TensorF a(Shape{1, 3, 1, 1}, {1.0f, 2.0f, 3.0f});
  TensorF b(Shape{1, 3, 1, 1}, {101.0f, 102.0f, 103.0f});
  CHECK(loss_forward(a, {2}) == doctest::Approx(loss_forward(b, {2})));
}

TEST_CASE("analytic gradients match central finite differences") {
  QuantModel qm = build_toy8(21, 4);
  FloatModel f = to_float(qm);
  TensorF x = toy_input(qm, 3);
  std::vector<uint16_t> labels{1, 3};

  ActivationsF acts = float_forward(f, x);
  GradientSet g = backward(f, acts, labels);
  REQUIRE(g.w.size() == f.w.size());

  const double eps = 1e-4;
  int checked = 0;
  for (size_t li = 0; li < f.w.size(); ++li) {
    if (f.w[li].empty()) continue;
    // Probe a deterministic scatter of weights in every weighted layer.
    for (size_t wi = 0; wi < f.w[li].size(); wi += f.w[li].size() / 7 + 1) {
      double keep = f.w[li][wi];
      f.w[li][wi] = keep + eps;
      double up = loss_of(f, x, labels);
      f.w[li][wi] = keep - eps;
      double dn = loss_of(f, x, labels);
      f.w[li][wi] = keep;
      double fd = (up - dn) / (2 * eps);
      CHECK(g.w[li][wi] == doctest::Approx(fd).epsilon(5e-4).scale(1.0));
      ++checked;
    }
    double keep = f.b[li][0];
    f.b[li][0] = keep + eps;
    double up = loss_of(f, x, labels);
    f.b[li][0] = keep - eps;
    double dn = loss_of(f, x, labels);
    f.b[li][0] = keep;
    CHECK(g.b[li][0] ==
          doctest::Approx((up - dn) / (2 * eps)).epsilon(5e-4).scale(1.0));
  }
  CHECK(checked >= 20);
}

TEST_CASE("residual path gradients also match finite differences") {
  QuantModel qm = build_tiny_resnet(13);
  FloatModel f = to_float(qm);
  TensorF x(qm.input_shape(1));
  for (size_t i = 0; i < x.data.size(); ++i)
    x.data[i] = float(int(i % 23) - 11) / 16.0f;
  std::vector<uint16_t> labels{4};

  ActivationsF acts = float_forward(f, x);
  GradientSet g = backward(f, acts, labels);
  const double eps = 1e-4;
  // Layer 2 feeds the residual junction; its gradient flows through both
  // the direct and the skip path.
  size_t li = 2;
  REQUIRE(!f.w[li].empty());
  for (size_t wi = 0; wi < f.w[li].size(); wi += f.w[li].size() / 5 + 1) {
    double keep = f.w[li][wi];
    f.w[li][wi] = keep + eps;
    double up = loss_of(f, x, labels);
    f.w[li][wi] = keep - eps;
    double dn = loss_of(f, x, labels);
    f.w[li][wi] = keep;
    CHECK(g.w[li][wi] ==
          doctest::Approx((up - dn) / (2 * eps)).epsilon(1e-3).scale(1.0));
  }
}

TEST_CASE("momentum sgd accumulates velocity") {
  // v1 = g, v2 = 0.9 g + g = 1.9 g; total step after two updates with g = 1
  // is lr * 2.9.
  QuantModel qm = build_toy8(2, 4);
  FloatModel f = to_float(qm);
  double w0 = f.w[0][0];
  GradientSet g;
  g.w.resize(f.w.size());
  g.b.resize(f.b.size());
  for (size_t i = 0; i < f.w.size(); ++i) {
    g.w[i].assign(f.w[i].size(), 0.0);
    g.b[i].assign(f.b[i].size(), 0.0);
  }
  if (!g.w[0].empty()) g.w[0][0] = 1.0;
  SgdOptimizer opt(0.01, 0.9);
  opt.step(f, g);
  CHECK(f.w[0][0] == doctest::Approx(w0 - 0.01));
  opt.step(f, g);
  CHECK(f.w[0][0] == doctest::Approx(w0 - 0.01 * 2.9));
}

TEST_CASE("optimizer class equals the free-function update") {
  QuantModel qm = build_toy8(8, 4);
  FloatModel a = to_float(qm), b = to_float(qm);
  TensorF x = toy_input(qm, 5);
  std::vector<uint16_t> labels{0, 2};
  GradientSet g = backward(a, float_forward(a, x), labels);

  SgdOptimizer opt(0.05, 0.9);
  std::vector<std::vector<double>> vw, vb;
  for (int it = 0; it < 3; ++it) {
    opt.step(a, g);
    sgd_update(b, g, 0.05, 0.9, vw, vb);
  }
  for (size_t i = 0; i < a.w.size(); ++i) {
    for (size_t j = 0; j < a.w[i].size(); ++j)
      CHECK(a.w[i][j] == doctest::Approx(b.w[i][j]).epsilon(1e-12));
    for (size_t j = 0; j < a.b[i].size(); ++j)
      CHECK(a.b[i][j] == doctest::Approx(b.b[i][j]).epsilon(1e-12));
  }
}

TEST_CASE("gradient descent on the true gradient reduces the loss") {
  QuantModel qm = build_toy8(31, 4);
  FloatModel f = to_float(qm);
  TensorF x = toy_input(qm, 11);
  std::vector<uint16_t> labels{2, 0};
  double before = loss_of(f, x, labels);
  SgdOptimizer opt(0.05, 0.0);
  for (int it = 0; it < 10; ++it) {
    GradientSet g = backward(f, float_forward(f, x), labels);
    opt.step(f, g);
  }
  CHECK(loss_of(f, x, labels) < before);
}

}  // TEST_SUITE
