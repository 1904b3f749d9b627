#pragma once

#include <cstdint>
#include <vector>

#include "shotdirector/conditioning.hpp"
#include "shotdirector/shot_mask.hpp"
#include "shotdirector/tensor.hpp"

namespace shotdirector {

/// Multi-head self-attention projections. Linear maps are y = x W^T + b
/// with W stored [out, in].
template <typename T>
struct AttentionParams {
  std::size_t n_heads = 1;
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;

  std::size_t d_model() const { return wq.extent(0); }
  std::size_t head_dim() const { return d_model() / n_heads; }

  /// Uniform in +-1/sqrt(d_model).
  static AttentionParams init(std::size_t d_model, std::size_t n_heads, std::uint64_t seed);
  static AttentionParams zeros(std::size_t d_model, std::size_t n_heads);

  std::vector<ParamRef<T>> parameters(const std::string& prefix = "attn");
  void validate() const;
};

/// Intermediates of one forward pass, kept for the backward pass.
template <typename T>
struct AttentionCache {
  Tensor<T> x, q, k, v;   // [n, d]
  Tensor<T> heads;        // [n, d] concatenated per-head outputs
  std::vector<T> weights; // [n_heads, n, n], exactly 0 on masked pairs
};

/// Masked multi-head attention over rows of x [n, d_model]. Masked keys are
/// left out of the softmax reduction entirely, so their weight is exactly 0.
/// Query rows run in parallel; each row reduces in key order, so results are
/// bit-identical to masked_attention_serial.
template <typename T>
Tensor<T> masked_attention(const AttentionParams<T>& params, const Tensor<T>& x, const AttentionMask& mask,
                           AttentionCache<T>* cache = nullptr);

template <typename T>
Tensor<T> masked_attention_serial(const AttentionParams<T>& params, const Tensor<T>& x, const AttentionMask& mask,
                                  AttentionCache<T>* cache = nullptr);

/// Accumulates parameter gradients into `grads` and returns d(loss)/dx.
template <typename T>
Tensor<T> attention_backward(const AttentionParams<T>& params, const AttentionCache<T>& cache,
                             const AttentionMask& mask, const Tensor<T>& upstream, AttentionParams<T>& grads);

inline constexpr double kRmsNormEps = 1e-6;

/// Row-wise x / sqrt(mean(x^2) + eps), no learned gain.
template <typename T>
Tensor<T> rms_norm(const Tensor<T>& x);

template <typename T>
Tensor<T> rms_norm_backward(const Tensor<T>& x, const Tensor<T>& upstream);

}  // namespace shotdirector
