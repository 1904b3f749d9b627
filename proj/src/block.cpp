#include "shotdirector/block.hpp"

#include <cmath>

#include "shotdirector/errors.hpp"
#include "shotdirector/rng.hpp"

namespace shotdirector {

void BlockConfig::validate() const {
  if (layers == 0) throw DomainError("block config: layers must be positive");
  if (full_visibility_layers > layers) {
    throw DomainError("block config: full_visibility_layers (" + std::to_string(full_visibility_layers) +
                      ") exceeds layers (" + std::to_string(layers) + ")");
  }
}

template <typename T>
ToyModel<T> ToyModel<T>::init(std::size_t d_model, std::size_t n_heads, std::size_t layers, std::size_t mlp_hidden,
                              std::size_t conv_kernel, std::size_t conv_extra_layers, std::uint64_t seed) {
  Rng seeds(seed);
  ToyModel m;
  m.mlp = MlpBranch<T>::init(d_model, mlp_hidden, seeds.next_u64());
  m.conv = ConvBranch<T>::init(d_model, conv_kernel, conv_extra_layers, seeds.next_u64());
  for (std::size_t l = 0; l < layers; ++l) m.layers.push_back(AttentionParams<T>::init(d_model, n_heads, seeds.next_u64()));
  return m;
}

template <typename T>
ToyModel<T> ToyModel<T>::zeros_like(const ToyModel& other) {
  ToyModel m;
  m.mlp = MlpBranch<T>::zeros(other.mlp.d_model(), other.mlp.hidden());
  m.conv = ConvBranch<T>::zeros(other.conv.d_model(), other.conv.kernel, other.conv.extra.size());
  for (const auto& l : other.layers) m.layers.push_back(AttentionParams<T>::zeros(l.d_model(), l.n_heads));
  return m;
}

template <typename T>
std::vector<ParamRef<T>> ToyModel<T>::parameters() {
  auto out = mlp.parameters();
  for (auto& p : conv.parameters()) out.push_back(p);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (auto& p : layers[l].parameters("layer" + std::to_string(l))) out.push_back(p);
  }
  return out;
}

template <typename T>
void ToyModel<T>::validate() const {
  mlp.validate();
  conv.validate();
  if (conv.d_model() != mlp.d_model()) throw DomainError("model: conv and mlp d_model differ");
  for (const auto& l : layers) {
    l.validate();
    if (l.d_model() != mlp.d_model()) throw DomainError("model: attention and mlp d_model differ");
  }
}

std::vector<const CameraPose*> frame_poses(const TokenLayout& layout, const ShotCameras& cameras) {
  if (cameras.size() != layout.shots.size()) {
    throw DomainError("block: " + std::to_string(cameras.size()) + " camera trajectories for " +
                      std::to_string(layout.shots.size()) + " shots");
  }
  std::vector<const CameraPose*> out(layout.frames, nullptr);
  for (std::size_t s = 0; s < layout.shots.size(); ++s) {
    const Range f = layout.shots[s].frames;
    const auto& traj = cameras[s];
    if (traj.size() != 1 && traj.size() != f.size()) {
      throw DomainError("block: shot " + std::to_string(layout.shots[s].shot_id) + " has " +
                        std::to_string(traj.size()) + " poses; expected 1 or " + std::to_string(f.size()));
    }
    for (std::size_t i = 0; i < f.size(); ++i) out[f.start + i] = &traj[traj.size() == 1 ? 0 : i];
  }
  return out;
}

std::vector<AttentionMask> layer_masks(const BlockConfig& config, const TokenLayout& layout) {
  config.validate();
  const std::size_t n = layout.total_tokens();
  const AttentionMask base = config.use_mask ? build_mask(layout) : AttentionMask::all_visible(n);
  std::vector<AttentionMask> masks;
  for (std::size_t l = 0; l < config.layers; ++l) masks.push_back(mask_for_layer(base, l, config.full_visibility_layers));
  return masks;
}

template <typename T>
Tensor<T> block_forward(const ToyModel<T>& model, const BlockConfig& config, const TokenLayout& layout,
                        const BlockInputs<T>& inputs, BlockCache<T>* cache) {
  config.validate();
  layout.validate();
  model.validate();
  if (model.layers.size() != config.layers) {
    throw DomainError("block: model has " + std::to_string(model.layers.size()) + " layers, config asks for " +
                      std::to_string(config.layers));
  }
  const std::size_t d = model.d_model();
  const std::size_t per_frame = layout.tokens_per_frame();
  const std::size_t n_text = layout.text_tokens();
  if (inputs.visual.shape() != Shape{layout.visual_tokens(), d}) {
    throw DomainError("block: visual tokens must be " + shape_to_string({layout.visual_tokens(), d}) + ", got " +
                      shape_to_string(inputs.visual.shape()));
  }
  if (inputs.text.shape() != Shape{n_text, d}) {
    throw DomainError("block: text tokens must be " + shape_to_string({n_text, d}) + ", got " +
                      shape_to_string(inputs.text.shape()));
  }
  const auto poses = frame_poses(layout, inputs.cameras);
  const std::size_t k = model.conv.kernel;

  if (cache) {
    cache->mlp.assign(layout.frames, {});
    cache->conv.assign(layout.frames, {});
  }

  // A disabled branch contributes a zero tensor through the same inject path.
  Tensor<T> x({n_text + layout.visual_tokens(), d});
  std::copy(inputs.text.values().begin(), inputs.text.values().end(), x.values().begin());
  for (std::size_t f = 0; f < layout.frames; ++f) {
    Tensor<T> z({per_frame, d});
    std::copy_n(inputs.visual.values().begin() + static_cast<std::ptrdiff_t>(f * per_frame * d), per_frame * d,
                z.values().begin());
    Tensor<T> c_ext({d});
    if (config.use_extrinsic_branch) {
      c_ext = encode_extrinsic(model.mlp, poses[f]->extrinsics, cache ? &cache->mlp[f] : nullptr);
    }
    Tensor<T> c_plk({per_frame, d});
    if (config.use_plucker_branch) {
      const auto map = plucker_map(*poses[f], layout.patch_h * k, layout.patch_w * k, config.sampling);
      c_plk = Tensor<T>({per_frame, d}, encode_plucker(model.conv, map, cache ? &cache->conv[f] : nullptr).values());
    }
    const Tensor<T> injected = inject(z, c_ext, c_plk);
    std::copy(injected.values().begin(), injected.values().end(),
              x.values().begin() + static_cast<std::ptrdiff_t>((n_text + f * per_frame) * d));
  }

  auto masks = layer_masks(config, layout);
  if (cache) {
    cache->layer_in.clear();
    cache->attention.assign(config.layers, {});
  }
  for (std::size_t l = 0; l < config.layers; ++l) {
    if (cache) cache->layer_in.push_back(x);
    AttentionCache<T>* ac = cache ? &cache->attention[l] : nullptr;
    if (config.residual_rmsnorm) {
      Tensor<T> y = masked_attention(model.layers[l], rms_norm(x), masks[l], ac);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
    } else {
      x = masked_attention(model.layers[l], x, masks[l], ac);
    }
  }
  if (cache) cache->masks = std::move(masks);
  return x;
}

template <typename T>
ToyModel<T> block_backward(const ToyModel<T>& model, const BlockConfig& config, const TokenLayout& layout,
                           const BlockCache<T>& cache, const Tensor<T>& upstream) {
  auto grads = ToyModel<T>::zeros_like(model);
  const std::size_t d = model.d_model();
  Tensor<T> g = upstream;
  for (std::size_t l = config.layers; l-- > 0;) {
    Tensor<T> gx = attention_backward(model.layers[l], cache.attention[l], cache.masks[l], g, grads.layers[l]);
    if (config.residual_rmsnorm) {
      const Tensor<T> g_norm = rms_norm_backward(cache.layer_in[l], gx);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += g_norm[i];
    } else {
      g = std::move(gx);
    }
  }

  const std::size_t per_frame = layout.tokens_per_frame();
  const std::size_t n_text = layout.text_tokens();
  for (std::size_t f = 0; f < layout.frames; ++f) {
    const std::span<const T> frame_grad =
        std::span<const T>(g.values()).subspan((n_text + f * per_frame) * d, per_frame * d);
    if (config.use_plucker_branch) conv_backward(model.conv, cache.conv[f], frame_grad, grads.conv);
    if (config.use_extrinsic_branch) {
      std::vector<T> g_ext(d, T(0));
      for (std::size_t t = 0; t < per_frame; ++t) {
        for (std::size_t c = 0; c < d; ++c) g_ext[c] += frame_grad[t * d + c];
      }
      mlp_backward(model.mlp, cache.mlp[f], std::span<const T>(g_ext), grads.mlp);
    }
  }
  return grads;
}

template <typename T>
std::vector<T> leakage_probe(const ToyModel<T>& model, const BlockConfig& config, const TokenLayout& layout,
                             const BlockInputs<T>& inputs, std::size_t token, T epsilon) {
  layout.validate();
  const std::size_t n_text = layout.text_tokens();
  if (token < n_text || token >= layout.total_tokens()) {
    throw DomainError("leakage_probe: token " + std::to_string(token) + " is not a visual token");
  }
  if (layout.first_frame_range().contains(token)) {
    throw DomainError("leakage_probe: token " + std::to_string(token) +
                      " is in frame 0, which every shot sees; pick a token outside frame 0");
  }
  const Tensor<T> base = block_forward(model, config, layout, inputs);
  BlockInputs<T> perturbed = inputs;
  for (auto& v : perturbed.visual.row(token - n_text)) v += epsilon;
  const Tensor<T> moved = block_forward(model, config, layout, perturbed);

  std::vector<T> deltas(base.extent(0), T(0));
  for (std::size_t t = 0; t < base.extent(0); ++t) {
    for (std::size_t c = 0; c < base.extent(1); ++c) {
      deltas[t] = std::max(deltas[t], std::abs(moved.at(t, c) - base.at(t, c)));
    }
  }
  return deltas;
}

#define SHOTDIRECTOR_INSTANTIATE(T)                                                                            \
  template struct ToyModel<T>;                                                                                 \
  template Tensor<T> block_forward<T>(const ToyModel<T>&, const BlockConfig&, const TokenLayout&,              \
                                      const BlockInputs<T>&, BlockCache<T>*);                                  \
  template ToyModel<T> block_backward<T>(const ToyModel<T>&, const BlockConfig&, const TokenLayout&,           \
                                         const BlockCache<T>&, const Tensor<T>&);                              \
  template std::vector<T> leakage_probe<T>(const ToyModel<T>&, const BlockConfig&, const TokenLayout&,         \
                                           const BlockInputs<T>&, std::size_t, T);

SHOTDIRECTOR_INSTANTIATE(float)
SHOTDIRECTOR_INSTANTIATE(double)

#undef SHOTDIRECTOR_INSTANTIATE

}  // namespace shotdirector
