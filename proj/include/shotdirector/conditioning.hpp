#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "shotdirector/camera_geometry.hpp"
#include "shotdirector/tensor.hpp"
#include "shotdirector/tensor_io.hpp"

namespace shotdirector {

/// Named handle on a trainable tensor, used for updates and gradient checks.
template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
};

template <typename T>
T gelu(T x);
template <typename T>
T gelu_grad(T x);

inline constexpr std::size_t kExtrinsicWidth = 12;

/// Two-layer perceptron over flattened [R | t]: 12 -> hidden -> d_model,
/// GELU between. The second layer is the transfer layer and starts at zero,
/// so a fresh branch contributes nothing.
template <typename T>
struct MlpBranch {
  Tensor<T> w1;  // [hidden, 12]
  Tensor<T> b1;  // [hidden]
  Tensor<T> w2;  // [d_model, hidden], transfer layer
  Tensor<T> b2;  // [d_model], transfer layer

  std::size_t hidden() const { return w1.extent(0); }
  std::size_t d_model() const { return w2.extent(0); }

  /// First layer uniform in +-1/sqrt(12), transfer layer zero.
  /// hidden == 0 selects the default width 4 * d_model.
  static MlpBranch init(std::size_t d_model, std::size_t hidden, std::uint64_t seed);
  static MlpBranch zeros(std::size_t d_model, std::size_t hidden);

  std::vector<ParamRef<T>> parameters();
  void validate() const;
};

template <typename T>
struct MlpCache {
  std::array<T, kExtrinsicWidth> input{};
  std::vector<T> pre;  // first-layer pre-activation
  std::vector<T> act;  // GELU(pre)
};

template <typename T>
Tensor<T> encode_extrinsic(const MlpBranch<T>& branch, const CameraExtrinsics& extrinsics,
                           MlpCache<T>* cache = nullptr);

/// Adds d(loss)/d(params) to `grads` given d(loss)/d(output).
template <typename T>
void mlp_backward(const MlpBranch<T>& branch, const MlpCache<T>& cache, std::span<const T> upstream,
                  MlpBranch<T>& grads);

/// Pointwise layer appended after the patchify convolution: y = W gelu(x) + b.
template <typename T>
struct PointwiseLayer {
  Tensor<T> w;  // [d_model, d_model]
  Tensor<T> b;  // [d_model]
};

/// Patchify convolution over a Plücker map: 6 channels -> d_model, kernel
/// equal to stride, no padding, optionally followed by pointwise layers.
template <typename T>
struct ConvBranch {
  std::size_t kernel = 1;
  Tensor<T> weight;  // [d_model, 6, kernel, kernel]
  Tensor<T> bias;    // [d_model]
  std::vector<PointwiseLayer<T>> extra;

  std::size_t d_model() const { return weight.extent(0); }

  /// Uniform in +-1/sqrt(fan_in) for every layer.
  static ConvBranch init(std::size_t d_model, std::size_t kernel, std::size_t extra_layers, std::uint64_t seed);
  static ConvBranch zeros(std::size_t d_model, std::size_t kernel, std::size_t extra_layers = 0);

  std::vector<ParamRef<T>> parameters();
  void validate() const;
};

template <typename T>
struct ConvCache {
  std::size_t out_h = 0, out_w = 0;
  std::vector<T> patches;                 // [out_h*out_w, 6*k*k], (c, a, b) order
  std::vector<std::vector<T>> layer_in;   // input to each pointwise layer, pre-GELU
};

/// Output [h/k, w/k, d_model]. Throws DomainError when h or w is not a
/// multiple of the kernel.
template <typename T>
Tensor<T> encode_plucker(const ConvBranch<T>& branch, const PluckerMap& map, ConvCache<T>* cache = nullptr);

template <typename T>
void conv_backward(const ConvBranch<T>& branch, const ConvCache<T>& cache, std::span<const T> upstream,
                   ConvBranch<T>& grads);

/// z + c_ext (broadcast over tokens) + c_plk.
template <typename T>
Tensor<T> inject(const Tensor<T>& z, const Tensor<T>& c_ext, const Tensor<T>& c_plk);

/// Both branches as one tensor container: mlp w1 b1 w2 b2, conv weight bias,
/// then (w, b) per pointwise layer.
template <typename T>
std::vector<AnyTensor> branch_tensors(const MlpBranch<T>& mlp, const ConvBranch<T>& conv);

template <typename T>
void branches_from_tensors(const std::vector<AnyTensor>& tensors, MlpBranch<T>& mlp, ConvBranch<T>& conv);

}  // namespace shotdirector
