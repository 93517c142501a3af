#pragma once

#include <cstddef>
#include <span>

#include "astnet/rng.hpp"
#include "astnet/tape.hpp"

namespace astnet {

// a[r x k] . b[k x c] -> [r x c]; a rank-1 b[k] is treated as a column and
// yields [r].
Var matmul(Var a, Var b);

// Elementwise sum. `b` may also be a vector matching a's trailing extent, in
// which case it is broadcast over a's leading extent.
Var add(Var a, Var b);

// Elementwise (Hadamard) product of equal shapes.
Var hadamard(Var a, Var b);

Var sigmoid(Var x);
Var tanh_op(Var x);
Var relu(Var x);

// Sum of all elements -> scalar [1].
Var sum(Var x);

// sum_n weights[n] * items[n]; weights is [N], items all share one shape.
Var weighted_sum(Var weights, std::span<const Var> items);

// Numerically stable -log softmax(logits)[label] -> scalar [1].
Var softmax_cross_entropy(Var logits, std::size_t label);

// sum_k BCE(sigmoid(logits_k), onehot(label)_k) -> scalar [1].
Var sigmoid_binary_cross_entropy(Var logits, std::size_t label);

// Inverted dropout: in training mode zeroes each element with probability
// `rate` and scales survivors by 1/(1-rate). Identity otherwise.
Var dropout(Var x, double rate, bool training, Rng& rng);

// Zero-padded 2-D convolution. x[C x H x W], weight[O x C x k x k], bias[O]
// -> [O x H' x W'] with H' = (H + 2 pad - k) / stride + 1.
Var conv2d(Var x, Var weight, Var bias, std::size_t stride, std::size_t pad);

// x[C x H x W] -> [C], the spatial mean of each channel.
Var global_avg_pool(Var x);

// Probabilities from logits (no tape).
Tensor softmax(const Tensor& logits);

}  // namespace astnet
