#pragma once

#include <functional>
#include <span>
#include <vector>

#include "uedsr/tensor.hpp"

namespace uedsr {

// Reverse-mode tape over Tensor<T>. Nodes are appended in evaluation order;
// backward() walks them in reverse, so every gradient is complete before its
// node's backward function runs.
using Var = int;

template <typename T>
class Tape {
public:
    using Backward = std::function<void(Tape&, Var)>;

    Var leaf(Tensor<T> value, bool requires_grad = false);
    Var record(Tensor<T> value, std::span<const Var> inputs, Backward backward);

    const Tensor<T>& value(Var v) const { return nodes_[v].value; }
    bool requires_grad(Var v) const { return nodes_[v].requires_grad; }
    // Gradient of the last backward() root w.r.t. v; zeros if none flowed.
    const Tensor<T>& grad(Var v);
    // Accumulation target used by backward functions.
    Tensor<T>& grad_buffer(Var v);

    void backward(Var root);
    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool requires_grad = false;
        Backward backward;
    };
    std::vector<Node> nodes_;
};

namespace ops {

// 'same'-padded stride-1 convolution with square odd kernel.
template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var weight, Var bias, int dilation);

// Kernel 2, stride 2 transposed convolution: doubles height and width.
template <typename T>
Var conv_transpose2x(Tape<T>& tape, Var x, Var weight, Var bias);

template <typename T>
Var relu(Tape<T>& tape, Var x);

// Logistic function, clamped to the open interval (0, 1) of T.
template <typename T>
Var sigmoid(Tape<T>& tape, Var x);

template <typename T>
Var concat(Tape<T>& tape, std::span<const Var> parts);

template <typename T>
Var add(Tape<T>& tape, Var a, Var b);

// x[c, y, x] * map[0, y, x] for every channel c.
template <typename T>
Var mul_map(Tape<T>& tape, Var x, Var map);

// Mean absolute difference to a constant target; returns a {1} scalar.
template <typename T>
Var l1_mean(Tape<T>& tape, Var x, const Tensor<T>& target);

// sum_i weights[i] * terms[i] over {1} scalars.
template <typename T>
Var weighted_sum(Tape<T>& tape, std::span<const Var> terms, std::span<const T> weights);

}  // namespace ops
}  // namespace uedsr
