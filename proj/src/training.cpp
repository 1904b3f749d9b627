#include "shotdirector/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Geometry>

#include "shotdirector/errors.hpp"
#include "shotdirector/rng.hpp"

namespace shotdirector {

template <typename T>
std::vector<T> gradient_descent(const std::vector<ParamRef<T>>& params, const Objective<T>& objective,
                                std::size_t steps, T learning_rate) {
  if (steps == 0) throw DomainError("gradient_descent: steps must be at least 1");
  std::vector<T> trace;
  trace.reserve(steps);
  std::vector<Tensor<T>> grads;
  for (std::size_t step = 0; step < steps; ++step) {
    grads.clear();
    const T loss = objective(grads);
    if (!std::isfinite(loss)) throw std::runtime_error("training diverged: non-finite loss at step " + std::to_string(step));
    if (grads.size() != params.size()) throw DomainError("gradient_descent: objective returned the wrong gradient count");
    trace.push_back(loss);
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto& value = params[p].value->values();
      const auto& g = grads[p].values();
      for (std::size_t i = 0; i < value.size(); ++i) value[i] -= learning_rate * g[i];
    }
  }
  return trace;
}

template <typename T>
T mse_loss_and_grad(const ToyModel<T>& model, const BlockConfig& config, const TokenLayout& layout,
                    const BlockInputs<T>& inputs, const Tensor<T>& target, ToyModel<T>* grads) {
  BlockCache<T> cache;
  const Tensor<T> out = block_forward(model, config, layout, inputs, grads ? &cache : nullptr);
  if (target.shape() != out.shape()) {
    throw DomainError("mse: target shape " + shape_to_string(target.shape()) + " does not match output " +
                      shape_to_string(out.shape()));
  }
  const T inv_n = T(1) / static_cast<T>(out.size());
  T loss = 0;
  Tensor<T> g(out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T diff = out[i] - target[i];
    loss += diff * diff;
    g[i] = T(2) * diff * inv_n;
  }
  if (grads) *grads = block_backward(model, config, layout, cache, g);
  return loss * inv_n;
}

template <typename T>
std::vector<T> train_demo(ToyModel<T>& model, const BlockConfig& config, const TokenLayout& layout,
                          const BlockInputs<T>& inputs, const Tensor<T>& target, std::size_t steps,
                          T learning_rate) {
  const auto params = model.parameters();
  Objective<T> objective = [&](std::vector<Tensor<T>>& out) {
    ToyModel<T> grads;
    const T loss = mse_loss_and_grad(model, config, layout, inputs, target, &grads);
    for (auto& ref : grads.parameters()) out.push_back(std::move(*ref.value));
    return loss;
  };
  return gradient_descent(params, objective, steps, learning_rate);
}

double tensor_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor) {
  double diff = 0.0, scale = floor;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return diff / scale;
}

GradcheckReport gradcheck_model(ToyModel<double>& model, const BlockConfig& config, const TokenLayout& layout,
                                const BlockInputs<double>& inputs, const Tensor<double>& target, double step) {
  ToyModel<double> grads;
  mse_loss_and_grad(model, config, layout, inputs, target, &grads);
  auto params = model.parameters();
  auto analytic = grads.parameters();
  double global = 0.0;
  for (const auto& a : analytic) {
    for (double v : a.value->values()) global = std::max(global, std::abs(v));
  }
  const double floor = std::max(kGradScaleFloor * global, 1e-12);
  GradcheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& values = params[p].value->values();
    std::vector<double> numeric(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double plus = mse_loss_and_grad<double>(model, config, layout, inputs, target, nullptr);
      values[i] = saved - step;
      const double minus = mse_loss_and_grad<double>(model, config, layout, inputs, target, nullptr);
      values[i] = saved;
      numeric[i] = (plus - minus) / (2.0 * step);
    }
    GradcheckEntry e{params[p].name, values.size(), tensor_relative_error(analytic[p].value->values(), numeric, floor)};
    report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
    report.entries.push_back(std::move(e));
  }
  return report;
}

TokenLayout make_layout(std::size_t shots, std::size_t frames_per_shot, std::size_t ph, std::size_t pw,
                        std::size_t global_text, std::size_t text_per_shot) {
  TokenLayout layout;
  layout.frames = shots * frames_per_shot;
  layout.patch_h = ph;
  layout.patch_w = pw;
  layout.global_text = {0, global_text};
  std::size_t cursor = global_text;
  for (std::size_t s = 0; s < shots; ++s) {
    layout.shots.push_back({static_cast<int>(s),
                            {s * frames_per_shot, (s + 1) * frames_per_shot},
                            {cursor, cursor + text_per_shot}});
    cursor += text_per_shot;
  }
  layout.validate();
  return layout;
}

ShotCameras synthetic_cameras(const TokenLayout& layout, std::uint64_t seed, int image_width, int image_height) {
  Rng rng(seed);
  const CameraIntrinsics k(image_width, image_width, image_width / 2.0, image_height / 2.0, image_width, image_height);
  ShotCameras cameras;
  for (const auto& shot : layout.shots) {
    const double yaw = rng.uniform(-1.0, 1.0);
    const double pitch = rng.uniform(-0.3, 0.3);
    const Vec3 origin(rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 0.5), rng.uniform(-1.0, 1.0));
    Trajectory traj;
    for (std::size_t f = shot.frames.start; f < shot.frames.end; ++f) {
      const double s = static_cast<double>(f - shot.frames.start);
      const Mat3 r = (Eigen::AngleAxisd(yaw + 0.02 * s, Vec3::UnitY()) * Eigen::AngleAxisd(pitch, Vec3::UnitX()))
                         .toRotationMatrix();
      traj.push_back({k, CameraExtrinsics(r, origin + Vec3(0.05 * s, 0.0, 0.0)), f});
    }
    cameras.push_back(std::move(traj));
  }
  return cameras;
}

template <typename T>
Tensor<T> random_tensor(const Shape& shape, std::uint64_t seed, T scale) {
  Rng rng(seed);
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(rng.normal()) * scale;
  return t;
}

template <typename T>
BlockInputs<T> synthetic_inputs(const TokenLayout& layout, std::size_t d_model, std::uint64_t seed, T scale) {
  Rng seeds(seed);
  BlockInputs<T> in;
  in.visual = random_tensor<T>({layout.visual_tokens(), d_model}, seeds.next_u64(), scale);
  in.text = random_tensor<T>({layout.text_tokens(), d_model}, seeds.next_u64(), scale);
  in.cameras = synthetic_cameras(layout, seeds.next_u64());
  return in;
}

GradcheckReport gradcheck_random(std::uint64_t seed, bool residual_rmsnorm) {
  const TokenLayout layout = make_layout(2, 2, 1, 2, 1, 1);
  BlockConfig config;
  config.layers = 2;
  config.full_visibility_layers = 1;
  config.residual_rmsnorm = residual_rmsnorm;
  Rng seeds(seed);
  auto model = ToyModel<double>::init(8, 2, config.layers, 8, 2, 1, seeds.next_u64());
  Rng extra(seeds.next_u64());
  for (auto& v : model.mlp.w2.values()) v = extra.uniform(-0.5, 0.5);
  for (auto& v : model.mlp.b2.values()) v = extra.uniform(-0.5, 0.5);
  // Default init gives near-uniform attention and ~1e-7 q/k gradients.
  for (auto& layer : model.layers) {
    for (auto* t : {&layer.wq, &layer.wk}) {
      for (auto& v : t->values()) v = extra.uniform(-1.0, 1.0);
    }
  }
  const auto inputs = synthetic_inputs<double>(layout, 8, seeds.next_u64());
  const auto target = random_tensor<double>({layout.total_tokens(), 8}, seeds.next_u64());
  return gradcheck_model(model, config, layout, inputs, target);
}

#define SHOTDIRECTOR_INSTANTIATE(T)                                                                             \
  template std::vector<T> gradient_descent<T>(const std::vector<ParamRef<T>>&, const Objective<T>&, std::size_t, \
                                              T);                                                               \
  template T mse_loss_and_grad<T>(const ToyModel<T>&, const BlockConfig&, const TokenLayout&,                   \
                                  const BlockInputs<T>&, const Tensor<T>&, ToyModel<T>*);                       \
  template std::vector<T> train_demo<T>(ToyModel<T>&, const BlockConfig&, const TokenLayout&,                  \
                                        const BlockInputs<T>&, const Tensor<T>&, std::size_t, T);              \
  template Tensor<T> random_tensor<T>(const Shape&, std::uint64_t, T);                                          \
  template BlockInputs<T> synthetic_inputs<T>(const TokenLayout&, std::size_t, std::uint64_t, T);

SHOTDIRECTOR_INSTANTIATE(float)
SHOTDIRECTOR_INSTANTIATE(double)

#undef SHOTDIRECTOR_INSTANTIATE

}  // namespace shotdirector
