#pragma once

#include <cstdint>
#include <string>

#include "r2f/model.hpp"

namespace r2f {

/// 10-layer CNN for 1x28x28 inputs, 10 classes (~308k MACs):
/// Conv(1->8,3x3,p1) ReLU MaxPool2 Conv(8->16,3x3,p1) ReLU MaxPool2
/// Flatten FC(784->32) ReLU FC(32->10) SoftmaxLoss.
QuantModel build_tiny_net(uint64_t seed);

/// Residual variant for 1x28x28 inputs, 10 classes, with a skip connection:
/// Conv(1->8) ReLU Conv(8->8) Conv(8->8) ResidualAdd ReLU MaxPool2
/// Conv(8->16) ReLU MaxPool2 AvgPool7 Flatten FC(16->10) SoftmaxLoss.
QuantModel build_tiny_resnet(uint64_t seed);

/// 8-layer toy stack for 1x8x8 inputs and `classes` classes:
/// Conv(1->4,3x3,p1) ReLU MaxPool2 Flatten FC(64->16) ReLU
/// FC(16->classes) SoftmaxLoss.
QuantModel build_toy8(uint64_t seed, int classes = 4);

QuantModel build_model(const std::string& arch, uint64_t seed);

}  // namespace r2f
