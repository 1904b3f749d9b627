#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "shotdirector/block.hpp"

namespace shotdirector {

/// Computes the loss at the current parameters and writes one gradient
/// tensor per parameter, in parameter order.
template <typename T>
using Objective = std::function<T(std::vector<Tensor<T>>& grads)>;

/// Plain gradient descent. Returns the loss evaluated before each update.
/// Throws std::runtime_error naming the step if a loss is not finite.
template <typename T>
std::vector<T> gradient_descent(const std::vector<ParamRef<T>>& params, const Objective<T>& objective,
                                std::size_t steps, T learning_rate);

/// Mean squared error of block_forward against `target`; fills `grads`
/// (same structure as the model) with its gradient.
template <typename T>
T mse_loss_and_grad(const ToyModel<T>& model, const BlockConfig& config, const TokenLayout& layout,
                    const BlockInputs<T>& inputs, const Tensor<T>& target, ToyModel<T>* grads);

/// Trains every model parameter against `target` and returns the loss trace.
template <typename T>
std::vector<T> train_demo(ToyModel<T>& model, const BlockConfig& config, const TokenLayout& layout,
                          const BlockInputs<T>& inputs, const Tensor<T>& target, std::size_t steps,
                          T learning_rate);

struct GradcheckEntry {
  std::string name;
  std::size_t count = 0;
  double max_rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double max_rel_error = 0.0;
};

/// Relative floor for tensor_relative_error, as a fraction of the largest
/// analytic gradient in the model. Central differences at a 1e-5 step carry
/// ~1e-11 of rounding noise, so tensors whose gradient is structurally zero
/// (key biases: softmax ignores a per-row shift) are judged at model scale.
inline constexpr double kGradScaleFloor = 1e-3;

/// Per-tensor error between analytic and central-difference gradients:
/// max |a - n| / max(max |a|, max |n|, floor).
double tensor_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor = 1e-12);

/// Checks the MSE gradient of every model parameter against central
/// differences with the given step.
GradcheckReport gradcheck_model(ToyModel<double>& model, const BlockConfig& config, const TokenLayout& layout,
                                const BlockInputs<double>& inputs, const Tensor<double>& target, double step = 1e-5);

// Desk-scale fixtures shared by the CLI, the tests and the benchmarks.

/// `shots` shots of `frames_per_shot` frames, patch grid ph x pw, and
/// `text_per_shot` local text tokens per shot after `global_text` tokens.
TokenLayout make_layout(std::size_t shots, std::size_t frames_per_shot, std::size_t ph, std::size_t pw,
                        std::size_t global_text, std::size_t text_per_shot);

/// One pose per frame: each shot orbits at its own yaw, drifting along x.
ShotCameras synthetic_cameras(const TokenLayout& layout, std::uint64_t seed, int image_width = 64,
                              int image_height = 64);

/// Standard normal token embeddings scaled by `scale`, plus synthetic cameras.
template <typename T>
BlockInputs<T> synthetic_inputs(const TokenLayout& layout, std::size_t d_model, std::uint64_t seed, T scale = T(1));

template <typename T>
Tensor<T> random_tensor(const Shape& shape, std::uint64_t seed, T scale = T(1));

/// Small random model and inputs for a self-contained gradient check: every
/// parameter (including the transfer layer) is nonzero.
GradcheckReport gradcheck_random(std::uint64_t seed, bool residual_rmsnorm = false);

}  // namespace shotdirector
