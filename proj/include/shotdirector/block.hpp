#pragma once

#include <cstdint>
#include <vector>

#include "shotdirector/attention.hpp"
#include "shotdirector/camera_geometry.hpp"
#include "shotdirector/conditioning.hpp"
#include "shotdirector/shot_mask.hpp"

namespace shotdirector {

/// Ablation switches of the toy block.
struct BlockConfig {
  std::size_t layers = 1;
  std::size_t full_visibility_layers = 0;
  bool use_mask = true;
  bool use_extrinsic_branch = true;
  bool use_plucker_branch = true;
  /// x + attn(rms_norm(x)) per layer instead of plain attn(x).
  bool residual_rmsnorm = false;
  PixelSampling sampling = PixelSampling::TopLeft;

  void validate() const;
};

template <typename T>
struct ToyModel {
  MlpBranch<T> mlp;
  ConvBranch<T> conv;
  std::vector<AttentionParams<T>> layers;

  std::size_t d_model() const { return mlp.d_model(); }

  /// Fresh model: MLP transfer layer zero, everything else seeded uniform.
  static ToyModel init(std::size_t d_model, std::size_t n_heads, std::size_t layers, std::size_t mlp_hidden,
                       std::size_t conv_kernel, std::size_t conv_extra_layers, std::uint64_t seed);
  /// Same structure, all parameters zero. Used as a gradient accumulator.
  static ToyModel zeros_like(const ToyModel& other);

  std::vector<ParamRef<T>> parameters();
  void validate() const;
};

/// Per-shot camera poses. A shot's trajectory holds either one pose, used
/// for every frame of the shot, or exactly one pose per frame in order.
using ShotCameras = std::vector<Trajectory>;

template <typename T>
struct BlockInputs {
  Tensor<T> visual;  // [visual_tokens, d_model]
  Tensor<T> text;    // [text_tokens, d_model]
  ShotCameras cameras;
};

template <typename T>
struct BlockCache {
  std::vector<MlpCache<T>> mlp;    // per frame
  std::vector<ConvCache<T>> conv;  // per frame
  std::vector<Tensor<T>> layer_in; // input of each layer
  std::vector<AttentionCache<T>> attention;
  std::vector<AttentionMask> masks;
};

/// Pose for every video frame of the layout, resolved from per-shot cameras.
/// Throws DomainError on shot/pose count mismatch.
std::vector<const CameraPose*> frame_poses(const TokenLayout& layout, const ShotCameras& cameras);

/// Mask applied at each layer under `config`.
std::vector<AttentionMask> layer_masks(const BlockConfig& config, const TokenLayout& layout);

/// Injects per-frame camera features into the visual tokens, concatenates
/// [text; visual] and runs the configured attention layers.
/// Output is [total_tokens, d_model] in layout token order.
template <typename T>
Tensor<T> block_forward(const ToyModel<T>& model, const BlockConfig& config, const TokenLayout& layout,
                        const BlockInputs<T>& inputs, BlockCache<T>* cache = nullptr);

/// Gradient of a scalar loss with respect to every model parameter, given
/// d(loss)/d(output) and the cache of the matching forward pass.
template <typename T>
ToyModel<T> block_backward(const ToyModel<T>& model, const BlockConfig& config, const TokenLayout& layout,
                           const BlockCache<T>& cache, const Tensor<T>& upstream);

/// Runs block_forward on the inputs and on a copy with `epsilon` added to
/// every channel of one visual token, and returns the per-token max
/// absolute output change. `token` is an index on the full token axis and
/// must be a visual token outside frame 0.
template <typename T>
std::vector<T> leakage_probe(const ToyModel<T>& model, const BlockConfig& config, const TokenLayout& layout,
                             const BlockInputs<T>& inputs, std::size_t token, T epsilon);

}  // namespace shotdirector
