#pragma once

#include <vector>

#include "r2f/nn.hpp"

namespace r2f {

/// Per-layer weight/bias gradients, indexed like FloatModel::w / ::b.
struct GradientSet {
  std::vector<std::vector<double>> w, b;
};

/// Mean softmax cross-entropy over the batch. logits shape (N, C, 1, 1).
double loss_forward(const TensorF& logits, const std::vector<uint16_t>& labels);

/// Backpropagation through externally supplied activations (straight-through
/// across quantization: the recorded activations, faulty or not, stand in
/// for the float forward values). acts[0] is the input, acts[i] the output
/// of layer i-1; the last layer must be SoftmaxLoss.
GradientSet backward(const FloatModel& m, const ActivationsF& acts,
                     const std::vector<uint16_t>& labels);

/// Momentum SGD with persistent velocity: v = momentum*v + g, w -= lr*v.
class SgdOptimizer {
 public:
  SgdOptimizer(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
  void step(FloatModel& m, const GradientSet& g);
  double lr() const { return lr_; }

 private:
  double lr_, momentum_;
  std::vector<std::vector<double>> vw_, vb_;
};

/// One optimizer step against externally held velocity buffers; the class
/// above is sugar over this.
void sgd_update(FloatModel& m, const GradientSet& g, double lr,
                double momentum, std::vector<std::vector<double>>& vw,
                std::vector<std::vector<double>>& vb);

}  // namespace r2f
