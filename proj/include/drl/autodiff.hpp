#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "drl/tensor.hpp"

namespace drl {

// Reverse-mode tape node. A graph of Nodes is a single-use tape: backward()
// runs once and then severs the edges, so freeing the loss frees the tape.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;
};

using Var = std::shared_ptr<Node>;

Var leaf(Tensor value, bool requires_grad = true);
Var constant(Tensor value);
inline Var scalar_const(double v) { return constant(Tensor::scalar(v)); }

// Gradient of a scalar loss w.r.t. every requires_grad leaf reachable from
// it. Gradients accumulate into Node::grad; call zero_grad on parameters
// between steps. The tape is cleared afterwards.
void backward(const Var& loss);
void zero_grad(const std::vector<Var>& params);

// Elementwise / arithmetic primitives.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
// mat (B x D) + row vector (D): bias broadcast over rows.
Var add_rowvec(const Var& mat, const Var& vec);

Var matmul(const Var& a, const Var& b);  // (B x K) * (K x N)

Var tanh_v(const Var& a);
Var sigmoid_v(const Var& a);
Var softplus_v(const Var& a);  // log(1+e^x), linear branch for x > 30
Var exp_v(const Var& a);
Var log_v(const Var& a);
Var sqrt_v(const Var& a);
Var square_v(const Var& a);

Var sum_all(const Var& a);   // scalar
Var mean_all(const Var& a);  // scalar
Var rowsum(const Var& a);    // (B x D) -> (B)

Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& a, std::size_t start, std::size_t len);
Var reshape(const Var& a, std::vector<std::size_t> shape);

// x: (B, C, H, W), w: (F, C, k, k), bias: (F); valid padding.
Var conv2d(const Var& x, const Var& w, const Var& bias, std::size_t stride);

}  // namespace drl
