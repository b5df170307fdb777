#include <doctest.h>

#include "r2f/fault.hpp"
#include "r2f/rng.hpp"
#include "r2f/tmr.hpp"
#include "r2f/zoo.hpp"

using namespace r2f;

namespace {

TensorQ bytes1(std::vector<int8_t> v) {
  Shape s{1, int(v.size()), 1, 1};
  return TensorQ(s, std::move(v));
}

uint8_t majority_oracle(uint8_t a, uint8_t b, uint8_t c) {
  uint8_t out = 0;
  for (int bit = 0; bit < 8; ++bit) {
    int ones = ((a >> bit) & 1) + ((b >> bit) & 1) + ((c >> bit) & 1);
    if (ones >= 2) out |= uint8_t(1u << bit);
  }
  return out;
}

TensorQ toy_input(const QuantModel& m, int batch, uint64_t salt) {
  TensorQ x(m.input_shape(batch));
  for (size_t i = 0; i < x.data.size(); ++i)
    x.data[i] = static_cast<int8_t>((i * 29 + salt * 7) % 251 - 125);
  return x;
}

}  // namespace

TEST_SUITE("tmr") {

TEST_CASE("vote3 fixed oracle") {
  TensorQ a = bytes1({0b0011});
  TensorQ b = bytes1({0b0101});
  TensorQ c = bytes1({0b0110});
  CHECK(vote3(a, b, c).data[0] == 0b0111);
}

TEST_CASE("vote3 equals the per-bit majority oracle on random triples") {
  Rng rng(17);
  for (int i = 0; i < 10000; ++i) {
    uint8_t a = uint8_t(rng.next_u64()), b = uint8_t(rng.next_u64()),
            c = uint8_t(rng.next_u64());
    TensorQ v = vote3(bytes1({int8_t(a)}), bytes1({int8_t(b)}),
                      bytes1({int8_t(c)}));
    CHECK(uint8_t(v.data[0]) == majority_oracle(a, b, c));
  }
}

TEST_CASE("vote3 algebra: idempotence, absorption, permutation") {
  Rng rng(23);
  for (int i = 0; i < 2000; ++i) {
    int8_t a = int8_t(rng.next_u64()), b = int8_t(rng.next_u64()),
           c = int8_t(rng.next_u64());
    TensorQ ta = bytes1({a}), tb = bytes1({b}), tc = bytes1({c});
    CHECK(vote3(ta, ta, ta).data[0] == a);
    CHECK(vote3(ta, ta, tb).data[0] == a);  // two agreeing copies win
    CHECK(vote3(ta, tb, ta).data[0] == a);
    CHECK(vote3(tb, ta, ta).data[0] == a);
    int8_t v = vote3(ta, tb, tc).data[0];
    CHECK(vote3(tc, ta, tb).data[0] == v);
    CHECK(vote3(tb, tc, ta).data[0] == v);
  }
}

TEST_CASE("vote3 rejects shape mismatches") {
  CHECK_THROWS_AS(vote3(bytes1({1, 2}), bytes1({1}), bytes1({1})),
                  ShapeError);
}

TEST_CASE("post-vote residual matches 3b^2 at b = 1e-2") {
  // Three independently corrupted copies of a zero tensor; every set bit in
  // the vote is a residual error. Theory: 3b^2(1-b) + b^3 = 2.98e-4.
  const size_t n = 250000;  // 2e6 bits per copy
  TensorQ a(Shape{1, int(n), 1, 1}), b = a, c = a;
  flip_tensor(a, 1e-2, 101);
  flip_tensor(b, 1e-2, 102);
  flip_tensor(c, 1e-2, 103);
  TensorQ v = vote3(a, b, c);
  size_t bad = 0;
  for (int8_t x : v.data) bad += size_t(__builtin_popcount(uint8_t(x)));
  double residual = double(bad) / double(8 * n);
  CHECK(residual > 2e-4);
  CHECK(residual < 4e-4);
}

TEST_CASE("similarity counts the equal fraction") {
  TensorQ a = bytes1({1, 2, 3, 4});
  TensorQ b = bytes1({1, 2, 9, 9});
  CHECK(similarity(a, a) == 1.0);
  CHECK(similarity(a, b) == doctest::Approx(0.5));
}

TEST_CASE("policy membership and validation") {
  TmrPolicy none;
  CHECK(!none.is_protected(0));
  TmrPolicy all{TmrVariant::LayerWise, {}, false};
  CHECK(all.is_protected(0));
  CHECK(all.is_protected(7));
  TmrPolicy some{TmrVariant::LayerWise, {1, 4}, false};
  CHECK(some.is_protected(1));
  CHECK(some.is_protected(4));
  CHECK(!some.is_protected(2));
  CHECK_NOTHROW(some.validate(8));
  TmrPolicy bad{TmrVariant::LayerWise, {9}, false};
  CHECK_THROWS_AS(bad.validate(8), ConfigError);
}

TEST_CASE("fault-free redundancy is invisible") {
  QuantModel m = build_toy8(4, 4);
  TensorQ x = toy_input(m, 2, 1);
  FaultConfig off;
  off.ber = 0.0;
  ActivationsQ clean = model_forward(m, x, identity_hooks());
  for (TmrVariant v : {TmrVariant::None, TmrVariant::NetworkWise,
                       TmrVariant::LayerWise}) {
    TmrPolicy pol{v, {}, false};
    TmrCapture cap = tmr_forward(m, x, off, pol);
    REQUIRE(cap.layers.size() == size_t(m.layer_count()));
    for (int i = 0; i < m.layer_count(); ++i) {
      CHECK(cap.layers[i].voted.data == clean.acts[i + 1].data);
      CHECK(cap.layers[i].copy0.data == clean.acts[i + 1].data);
      CHECK(cap.layers[i].similarity == 1.0);
    }
  }
}

TEST_CASE("unprotected layers run once: copy0 is the reference") {
  QuantModel m = build_toy8(4, 4);
  TensorQ x = toy_input(m, 1, 2);
  FaultConfig f;
  f.ber = 1e-3;
  f.seed = 6;
  TmrPolicy pol{TmrVariant::LayerWise, {4}, false};  // only the big FC
  TmrCapture cap = lw_tmr_forward(m, x, f, pol);
  for (int i = 0; i < m.layer_count(); ++i) {
    if (i == 4) continue;
    CHECK(cap.layers[i].voted.data == cap.layers[i].copy0.data);
    CHECK(cap.layers[i].similarity == 1.0);
  }
}

TEST_CASE("layer-wise voting repairs output-site corruption") {
  QuantModel m = build_toy8(4, 4);
  TensorQ x = toy_input(m, 2, 3);
  FaultConfig f;
  f.ber = 0.0;
  f.per_layer_ber[4] = 2e-2;
  f.site_inputs = false;
  f.site_weights = false;
  f.seed = 12;
  ActivationsQ clean = model_forward(m, x, identity_hooks());
  TmrPolicy all{TmrVariant::LayerWise, {}, false};
  TmrCapture cap = lw_tmr_forward(m, x, f, all);
  // The voted output of the faulty layer is far closer to clean than the
  // designated faulty copy: at 2e-2 per bit roughly 15% of bytes corrupt,
  // while the post-vote residual (~2.4e-3 per byte) leaves at most one of
  // the 32 output elements wrong.
  double voted_sim = similarity(cap.layers[4].voted, clean.acts[5]);
  double faulty_sim = similarity(cap.layers[4].copy0, clean.acts[5]);
  CHECK(voted_sim > faulty_sim + 0.02);
  CHECK(voted_sim >= 1.0 - 1.5 / 32);
}

TEST_CASE("network-wise voting lets upstream corruption propagate") {
  QuantModel m = build_tiny_resnet(5);
  TensorQ x = toy_input(m, 4, 4);
  FaultConfig f;
  f.ber = 1e-4;
  f.seed = 21;
  auto lw = similarity_profile(m, x, f, TmrVariant::LayerWise);
  auto nw = similarity_profile(m, x, f, TmrVariant::NetworkWise);
  REQUIRE(lw.size() == size_t(m.layer_count()));
  REQUIRE(nw.size() == lw.size());
  CHECK(lw.back() >= nw.back());
  for (double s : lw) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("independent designated copy differs from the voting copies") {
  QuantModel m = build_toy8(7, 4);
  TensorQ x = toy_input(m, 1, 5);
  FaultConfig f;
  f.ber = 5e-3;
  f.seed = 33;
  f.site_inputs = false;
  f.site_weights = false;
  TmrPolicy dep{TmrVariant::LayerWise, {}, false};
  TmrPolicy ind{TmrVariant::LayerWise, {}, true};
  TmrCapture c_dep = tmr_forward(m, x, f, dep);
  TmrCapture c_ind = tmr_forward(m, x, f, ind);
  // Same voted chain (same three voting executions), different designee.
  bool voted_equal = true, copy_diff = false;
  for (int i = 0; i < m.layer_count(); ++i) {
    voted_equal &= c_dep.layers[i].voted.data == c_ind.layers[i].voted.data;
    copy_diff |= c_dep.layers[i].copy0.data != c_ind.layers[i].copy0.data;
  }
  CHECK(voted_equal);
  CHECK(copy_diff);
}

TEST_CASE("execution indices separate tmr copies across batches") {
  QuantModel m = build_toy8(4, 4);
  TensorQ x = toy_input(m, 1, 6);
  FaultConfig f;
  f.ber = 1e-2;
  f.seed = 40;
  f.site_inputs = false;
  f.site_weights = false;
  TmrPolicy all{TmrVariant::LayerWise, {}, false};
  TmrCapture c0 = lw_tmr_forward(m, x, f, all, 0);
  TmrCapture c0b = lw_tmr_forward(m, x, f, all, 0);
  TmrCapture c1 = lw_tmr_forward(m, x, f, all, 1);
  bool same = true, diff = false;
  for (int i = 0; i < m.layer_count(); ++i) {
    same &= c0.layers[i].copy0.data == c0b.layers[i].copy0.data;
    diff |= c0.layers[i].copy0.data != c1.layers[i].copy0.data;
  }
  CHECK(same);  // replays are bit-identical
  CHECK(diff);  // new exec_base draws fresh streams
}

}  // TEST_SUITE
