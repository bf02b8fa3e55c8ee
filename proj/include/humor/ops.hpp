#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "humor/rng.hpp"
#include "humor/tensor.hpp"

namespace humor::numcore {

// All ops are pure: they read their inputs, produce a fresh tensor, and
// (when autograd is enabled and any input is tracked) record a backprop
// step. Shape mismatches throw with both shapes in the message.

// (m,k) x (k,n) -> (m,n)
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise; identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// (m,n) + row(n), broadcast over rows.
Tensor add_broadcast_row(const Tensor& a, const Tensor& row);

// y = scale * x + shift, elementwise with scalars.
Tensor scalar_affine(const Tensor& x, double scale, double shift);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Row-wise softmax over the last axis of a rank-1 or rank-2 tensor.
Tensor softmax(const Tensor& x);

// Per-row normalization to zero mean / unit variance, then y = gain*xhat + bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double epsilon = 1e-5);

// softmax(Q K^T / sqrt(d_k) + mask_bias) V with mask_bias = -1e9 at key
// positions where key_masked[j] != 0. Q:(Lq,dk) K:(Lk,dk) V:(Lk,dv).
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::span<const std::uint8_t> key_masked);

// The post-softmax attention weight matrix (Lq x Lk), for inspection in
// tests and debugging. Not differentiable.
std::vector<double> attention_weights(const Tensor& q, const Tensor& k,
                                      std::span<const std::uint8_t> key_masked);

// Mean negative log softmax probability of the true labels.
// logits: (batch, classes); labels in [0, classes).
Tensor cross_entropy_loss(const Tensor& logits, std::span<const int> labels);

// table: (vocab, dim); ids index rows. Output (|ids|, dim).
Tensor embedding_lookup(const Tensor& table, std::span<const int> ids);

// Output row r is x row rows[r].
Tensor gather_rows(const Tensor& x, std::span<const int> rows);

Tensor slice_cols(const Tensor& x, int start, int count);

// All parts share the column/row count respectively.
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);

// Inverted dropout: keep with probability 1-rate and scale kept values by
// 1/(1-rate), so evaluation needs no rescaling. active=false or rate==0
// returns x unchanged.
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool active);

// x:(len,d) * kernel:(filters,width,d) + bias:(filters) -> (len-width+1, filters).
Tensor conv1d_valid(const Tensor& x, const Tensor& kernel, const Tensor& bias);

// Column-wise max over rows: (t,f) -> (1,f). Ties resolve to the earliest row.
Tensor max_over_time(const Tensor& x);

}  // namespace humor::numcore
