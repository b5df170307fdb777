#include <doctest.h>

#include <cmath>

#include "r2f/fault.hpp"
#include "r2f/nn.hpp"
#include "r2f/util.hpp"
#include "r2f/zoo.hpp"

using namespace r2f;

namespace {

TensorQ zeros(size_t n) { return TensorQ(Shape{1, int(n), 1, 1}); }

size_t popcount_bits(const TensorQ& t) {
  size_t bits = 0;
  for (int8_t v : t.data)
    bits += size_t(__builtin_popcount(uint8_t(v)));
  return bits;
}

}  // namespace

TEST_SUITE("fault") {

TEST_CASE("flip_bits degenerate rates") {
  Rng rng(1);
  CHECK(flip_bits(0x5A, 0.0, rng) == 0x5A);
  CHECK(flip_bits(0x5A, 1.0, rng) == uint8_t(0x5A ^ 0xFF));
  CHECK(flip_bits(0x00, 1.0, rng) == 0xFF);
}

TEST_CASE("flip_tensor is deterministic per stream seed") {
  TensorQ a = zeros(4096), b = zeros(4096), c = zeros(4096);
  flip_tensor(a, 1e-2, 77);
  flip_tensor(b, 1e-2, 77);
  flip_tensor(c, 1e-2, 78);
  CHECK(a.data == b.data);
  CHECK(a.data != c.data);
}

TEST_CASE("flip_tensor at rate zero is the identity") {
  TensorQ t(Shape{1, 16, 1, 1},
            std::vector<int8_t>{1, -2, 3, -4, 5, -6, 7, -8, 9, -10, 11, -12,
                               13, -14, 15, -16});
  TensorQ orig = t;
  flip_tensor(t, 0.0, 123);
  CHECK(t.data == orig.data);
}

TEST_CASE("effective_ber measures the flipped fraction") {
  TensorQ clean = zeros(8);
  TensorQ faulty = clean;
  CHECK(effective_ber(clean, faulty) == 0.0);
  faulty.data[0] = 1;  // one bit in 64
  CHECK(effective_ber(clean, faulty) == doctest::Approx(1.0 / 64.0));
  for (auto& v : faulty.data) v = int8_t(0xFF);
  CHECK(effective_ber(clean, faulty) == doctest::Approx(1.0));
}

TEST_CASE("measured rate concentrates around the configured ber") {
  // 10^6 bytes = 8 * 10^6 bits; binomial 4.5-sigma bounds.
  const size_t n = 1000000;
  for (double ber : {1e-4, 1e-3, 1e-2}) {
    TensorQ clean = zeros(n);
    TensorQ t = clean;
    flip_tensor(t, ber, uint64_t(ber * 1e9) + 5);
    double measured = effective_ber(clean, t);
    double sigma = std::sqrt(ber * (1 - ber) / double(8 * n));
    CHECK(std::abs(measured - ber) < 4.5 * sigma);
  }
}

TEST_CASE("gap sampler and per-bit sampler agree in distribution") {
  // Same expected flip count and a small KS distance between the per-trial
  // counts of the two samplers (fixed seeds keep this deterministic).
  const size_t n = 4096;
  const double ber = 5e-3;
  const int trials = 300;
  std::vector<double> perbit, gap;
  for (int t = 0; t < trials; ++t) {
    TensorQ a = zeros(n), b = zeros(n);
    Rng r1(mix_key(1000, uint64_t(t)));
    Rng r2(mix_key(2000, uint64_t(t)));
    flip_span_perbit(a.data.data(), n, ber, r1);
    flip_span_gap(b.data.data(), n, ber, r2);
    perbit.push_back(double(popcount_bits(a)));
    gap.push_back(double(popcount_bits(b)));
  }
  double m1 = mean(perbit), m2 = mean(gap);
  double expect = ber * 8 * double(n);
  CHECK(std::abs(m1 - expect) < 0.05 * expect);
  CHECK(std::abs(m2 - expect) < 0.05 * expect);
  // KS critical value at alpha 0.001 for n = m = 300 is ~0.159.
  CHECK(ks_statistic(perbit, gap) < 0.12);
}

TEST_CASE("flip_span dispatch preserves the stream contract") {
  // Below the 1e6 expected-flip threshold the gap path runs; spot-check it
  // equals an independent gap pass with the same stream.
  const size_t n = 1 << 14;
  TensorQ a = zeros(n), b = zeros(n);
  Rng r1(42), r2(42);
  flip_span(a.data.data(), n, 1e-3, r1);
  flip_span_gap(b.data.data(), n, 1e-3, r2);
  CHECK(a.data == b.data);
}

TEST_CASE("per-row streams make batch rows independent of batch assembly") {
  TensorQ batch(Shape{2, 8, 2, 2});
  flip_tensor(batch, 5e-2, 99);
  TensorQ row0(Shape{1, 8, 2, 2}), row1(Shape{1, 8, 2, 2});
  flip_tensor(row0, 5e-2, 99);
  // Row 1 flipped alone in a 1-row tensor must equal row 1 inside the batch
  // only if the row stream depends on the row index, not the tensor shape.
  TensorQ single(Shape{1, 8, 2, 2});
  {
    // Reproduce row 1's stream by flipping a one-row tensor whose row index
    // is 0; equality with the batch's row 1 is NOT expected.
    flip_tensor(single, 5e-2, 99);
  }
  std::vector<int8_t> b0(batch.data.begin(), batch.data.begin() + 32);
  std::vector<int8_t> b1(batch.data.begin() + 32, batch.data.end());
  CHECK(b0 == row0.data);   // row 0 stream is the row-0 subkey
  CHECK(b1 != single.data); // row 1 uses a distinct subkey
}

TEST_CASE("ber_for honors per-layer overrides") {
  FaultConfig f;
  f.ber = 1e-4;
  f.per_layer_ber[3] = 2e-2;
  CHECK(f.ber_for(0) == 1e-4);
  CHECK(f.ber_for(3) == 2e-2);
  CHECK(f.ber_for(4) == 1e-4);
}

TEST_CASE("fault config validation rejects nonsense") {
  FaultConfig f;
  f.ber = -0.1;
  CHECK_THROWS_AS(f.validate(), ConfigError);
  f.ber = 1.5;
  CHECK_THROWS_AS(f.validate(), ConfigError);
  f.ber = 1e-3;
  f.site_inputs = f.site_weights = f.site_outputs = false;
  CHECK_THROWS_AS(f.validate(), ConfigError);
  f.site_outputs = true;
  CHECK_NOTHROW(f.validate());
  f.per_layer_ber[2] = 2.0;
  CHECK_THROWS_AS(f.validate(), ConfigError);
}

TEST_CASE("hooks only arm enabled sites") {
  FaultConfig f;
  f.ber = 1e-3;
  f.seed = 5;
  f.site_inputs = false;
  f.site_weights = true;
  f.site_outputs = false;
  MacHook h = make_fault_hook(f, 0, 0);
  CHECK(!h.on_input);
  CHECK(bool(h.on_weight));
  CHECK(!h.on_output);
  CHECK(!h.per_input);
  CHECK(!h.per_weight);
}

TEST_CASE("per-mac mode arms value functions instead of tensor passes") {
  FaultConfig f;
  f.ber = 1e-3;
  f.mode = FaultMode::PerMac;
  MacHook h = make_fault_hook(f, 1, 2);
  CHECK(bool(h.per_input));
  CHECK(bool(h.per_weight));
  CHECK(!h.on_input);
  CHECK(!h.on_weight);
  CHECK(bool(h.on_output));  // outputs stay a per-tensor pass
}

TEST_CASE("input site fires only on the entry layer") {
  FaultConfig f;
  f.ber = 1e-3;
  f.site_inputs = true;
  f.site_weights = false;
  f.site_outputs = false;
  HookFn hooks = fault_hooks(f, 0);
  CHECK(bool(hooks(0).on_input));
  CHECK(!hooks(1).on_input);
  CHECK(!hooks(5).on_input);
}

TEST_CASE("streams differ by layer, execution and site") {
  FaultConfig f;
  f.ber = 5e-2;
  f.seed = 31;
  f.site_inputs = false;
  f.site_weights = false;
  f.site_outputs = true;
  auto corrupt = [&](int layer, uint64_t exec) {
    TensorQ t = zeros(512);
    make_fault_hook(f, layer, exec).on_output(t);
    return t.data;
  };
  CHECK(corrupt(0, 0) == corrupt(0, 0));
  CHECK(corrupt(0, 0) != corrupt(1, 0));
  CHECK(corrupt(0, 0) != corrupt(0, 1));
}

TEST_CASE("faulty forward diverges from clean as ber grows") {
  QuantModel m = build_tiny_net(3);
  TensorQ x(m.input_shape(2));
  for (size_t i = 0; i < x.data.size(); ++i)
    x.data[i] = static_cast<int8_t>((i * 31) % 251 - 125);
  ActivationsQ clean = model_forward(m, x, identity_hooks());

  FaultConfig lo;
  lo.ber = 1e-5;
  lo.seed = 4;
  FaultConfig hi = lo;
  hi.ber = 1e-3;
  ActivationsQ alo = model_forward(m, x, fault_hooks(lo, 0));
  ActivationsQ ahi = model_forward(m, x, fault_hooks(hi, 0));
  double dlo = effective_ber(clean.acts.back(), alo.acts.back());
  double dhi = effective_ber(clean.acts.back(), ahi.acts.back());
  CHECK(dhi > dlo);
  // ber 0 is bit-exact.
  FaultConfig off;
  off.ber = 0.0;
  ActivationsQ a0 = model_forward(m, x, fault_hooks(off, 0));
  for (size_t i = 0; i < clean.acts.size(); ++i)
    CHECK(a0.acts[i].data == clean.acts[i].data);
}

TEST_CASE("per-layer override concentrates corruption on the target layer") {
  QuantModel m = build_toy8(6, 4);
  TensorQ x(m.input_shape(1));
  for (size_t i = 0; i < x.data.size(); ++i)
    x.data[i] = static_cast<int8_t>((i * 13) % 200 - 100);
  ActivationsQ clean = model_forward(m, x, identity_hooks());
  FaultConfig f;
  f.ber = 0.0;
  f.per_layer_ber[4] = 5e-2;  // the 64x16 fully-connected layer
  f.seed = 8;
  f.site_inputs = false;
  f.site_weights = false;
  ActivationsQ a = model_forward(m, x, fault_hooks(f, 0));
  // Layers before the target are untouched.
  for (int i = 1; i <= 4; ++i) CHECK(a.acts[i].data == clean.acts[i].data);
  CHECK(a.acts[5].data != clean.acts[5].data);
}

}  // TEST_SUITE
