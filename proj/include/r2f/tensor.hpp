#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "r2f/util.hpp"

namespace r2f {

/// NCHW shape. Fully-connected tensors use h = w = 1 with c = features.
struct Shape {
  int n = 1, c = 1, h = 1, w = 1;

  size_t size() const {
    return static_cast<size_t>(n) * c * h * w;
  }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    return "[" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + "]";
  }
};

/// Dense row-major NCHW tensor.
template <typename T>
struct TensorT {
  Shape shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(Shape s) : shape(s), data(s.size(), T{}) {}
  TensorT(Shape s, std::vector<T> d) : shape(s), data(std::move(d)) {
    if (data.size() != shape.size())
      throw ShapeError("tensor data size " + std::to_string(data.size()) +
                       " does not match shape " + shape.str());
  }

  T& at(int n, int c, int h, int w) {
    return data[idx(n, c, h, w)];
  }
  T at(int n, int c, int h, int w) const {
    return data[idx(n, c, h, w)];
  }
  size_t idx(int n, int c, int h, int w) const {
    return ((static_cast<size_t>(n) * shape.c + c) * shape.h + h) * shape.w + w;
  }
  size_t size() const { return data.size(); }
};

using TensorQ = TensorT<int8_t>;    // quantized activations and weights
using TensorF = TensorT<float>;     // dequantized / float-domain tensors
using TensorI32 = TensorT<int32_t>; // accumulators and biases

}  // namespace r2f
