#pragma once

#include <vector>

#include "nn/tensor.hpp"

namespace planformer::nn {

// Shapes below use [rows, cols] for 2-D tensors.

Tensor matmul(const Tensor& a, const Tensor& b);                          // [n,k] x [k,m]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);  // [n,in] x [in,out] + [out]
Tensor add(const Tensor& a, const Tensor& b);                             // same shape
Tensor mul(const Tensor& a, const Tensor& b);                             // elementwise, same shape
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor reshape(const Tensor& x, const Shape& shape);
Tensor gather_rows(const Tensor& x, const std::vector<int>& rows);        // [n,d] -> [rows.size(),d]
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor softmax(const Tensor& x);  // along the last axis, max-subtracted

/// Mean of squared error over every element (batch and coordinate axes).
Tensor mse_loss(const Tensor& pred, const Tensor& target);

struct SeqSpan {
  int offset = 0;
  int length = 0;
};

/// Packs independent sequences into one row block. Query span i attends only to
/// key span i; keys flagged in key_masked receive zero attention weight.
struct AttentionLayout {
  std::vector<SeqSpan> query;
  std::vector<SeqSpan> key;
  std::vector<std::uint8_t> key_masked;  // per key row; empty means none masked

  static AttentionLayout single(int n_query, int n_key);
  static AttentionLayout self(const std::vector<SeqSpan>& spans, std::vector<std::uint8_t> key_masked = {});
};

/// softmax(Q K^T / sqrt(d_k)) V per head and per packed sequence. Q,K: [*, n_head*d_k],
/// V: [*, n_head*d_v]. A query whose keys are all masked yields a zero row.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionLayout& layout, int n_head = 1);

/// Attention weights of one head of one sequence (diagnostics and tests).
std::vector<double> attention_weights(const Tensor& q, const Tensor& k, const AttentionLayout& layout, int n_head,
                                      int head, int sequence);

struct MultiHeadParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv, const MultiHeadParams& p, int n_head,
                            int head_dim, const AttentionLayout& layout);

/// 2-D ([N,C,H,W] with [Co,C,3,3] kernels) or 3-D ([N,C,D,H,W] with [Co,C,3,3,3])
/// stride-1 convolution with zero padding of `padding` cells on every spatial side.
Tensor conv(const Tensor& input, const Tensor& kernel, const Tensor& bias, int padding = 1);

/// Multiplies [N,C,...] by a constant [N,1,...] mask broadcast over channels.
Tensor mask_channels(const Tensor& x, const std::vector<double>& mask);

}  // namespace planformer::nn
