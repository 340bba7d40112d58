#pragma once

#include <span>

#include "liftgan/nn/tape.hpp"
#include "liftgan/rng.hpp"

namespace liftgan::nn {

// Differentiable ops. Every op checks its input shapes and throws ShapeError
// naming the op and the offending shapes.

// [m,k] x [k,n] -> [m,n]
Var matmul(Var a, Var b);
// Elementwise, identical shapes.
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// Sum / mean of all elements -> scalar.
Var sum(Var a);
Var mean(Var a);
// Inner product of two equally shaped tensors -> scalar.
Var dot(Var a, Var b);

// x[..., n] + b[n], broadcast over leading dimensions.
Var add_bias(Var x, Var b);
// x W + b
Var dense(Var x, Var weight, Var bias);

// Rows of table[V,d] picked by ids -> [ids.size(), d]. Ids must be in [0, V).
Var embedding_lookup(Var table, std::span<const std::int32_t> ids);

// Standard 4-gate LSTM cell, gate order (input, forget, cell, output):
//   z = x W + h U + b,  W [in,4H], U [H,4H], b [4H]
//   c' = sig(z_f) * c + sig(z_i) * tanh(z_g),  h' = sig(z_o) * tanh(c')
// x [B,in], h and c [B,H].
struct LstmState {
    Var h;
    Var c;
};
LstmState lstm_cell(Var x, Var h, Var c, Var w, Var u, Var b);

// Columns [begin, end) of a matrix.
Var slice_cols(Var x, std::size_t begin, std::size_t end);
// Stacks matrices with equal column counts vertically.
Var concat_rows(std::span<const Var> parts);
// Same values, new shape with the same element count.
Var reshape(Var x, Shape shape);

// "Valid" 1-D convolution, stride 1, no padding:
//   x [T,C] or [B,T,C], kernel [w,C,F] -> [T-w+1,F] or [B,T-w+1,F].
Var conv1d(Var x, Var kernel);
// Max over the time axis: [T,F] -> [F], [B,T,F] -> [B,F].
Var global_max_pool1d(Var x);

Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
// Over the last dimension.
Var softmax(Var x);

// Training: multiplies by a Bernoulli(1-p) mask drawn from rng, scaled by
// 1/(1-p). Inference: returns x unchanged.
Var dropout(Var x, double p, Rng& rng, bool training);

// -(1/N) sum_r w_r log probs[r, targets[r]] for probs [N,V]. Empty weights
// means all ones.
Var categorical_cross_entropy(Var probs, std::span<const std::int32_t> targets,
                              std::span<const double> weights = {});
// -(1/N) sum_r [y_r log p_r + (1 - y_r) log(1 - p_r)] for p of shape [N] or [N,1].
Var binary_cross_entropy(Var probs, std::span<const double> labels);

}  // namespace liftgan::nn
