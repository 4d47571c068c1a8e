#pragma once

#include <vector>

#include "patchcast/tensor.hpp"

namespace patchcast {

// Elementwise arithmetic with trailing-aligned broadcasting (dims must match
// or be 1). Gradients of broadcast operands are summed over the expanded axes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// Batched matrix product: a [..., m, k] x b [..., k, n] -> [..., m, n].
// Leading batch dimensions broadcast; gradients flow to both operands.
Tensor matmul(const Tensor& a, const Tensor& b);

// Swap the last two axes.
Tensor transpose_last2(const Tensor& a);

// Same data, new shape (element count must match).
Tensor reshape(const Tensor& a, Shape shape);

// Concatenate along the last axis; all leading dims must agree.
Tensor concat_lastdim(const std::vector<Tensor>& parts);

// Numerically stable softmax over the last axis; rows sum to 1.
Tensor softmax_lastdim(const Tensor& x);

// Exact GELU: x * Phi(x) with the Gaussian CDF in erf form.
Tensor gelu(const Tensor& x);

// Inverted dropout: train mode zeroes with probability p and scales the
// survivors by 1/(1-p); eval mode is the identity. Requires 0 <= p < 1.
Tensor dropout(const Tensor& x, double p, Rng& rng, bool training);

// Batch normalization over x [batch, features, tokens]: each feature is
// normalized across (batch x tokens). Train mode uses batch statistics and
// updates the running buffers with `momentum`; eval mode uses the running
// buffers. gamma/beta are learnable scale/shift of length `features`.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 std::vector<double>& running_mean, std::vector<double>& running_var,
                 double momentum, double eps, bool training);

// Full reductions to a scalar tensor.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Mean squared error over all elements; shapes must be identical.
Tensor mse(const Tensor& pred, const Tensor& target);

}  // namespace patchcast
