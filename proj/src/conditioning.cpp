#include "shotdirector/conditioning.hpp"

#include <cmath>

#include "shotdirector/errors.hpp"
#include "shotdirector/rng.hpp"

namespace shotdirector {

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::sqrt(T(2))));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::sqrt(T(2))));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * T(3.14159265358979323846));
  return cdf + x * pdf;
}

namespace {

template <typename T>
void fill_uniform(Tensor<T>& t, double bound, Rng& rng) {
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
void expect_shape(const Tensor<T>& t, const Shape& shape, const char* what) {
  if (t.shape() != shape) {
    throw DomainError(std::string(what) + ": expected shape " + shape_to_string(shape) + ", got " +
                      shape_to_string(t.shape()));
  }
}

}  // namespace

// ---------------------------------------------------------------- MLP branch

template <typename T>
MlpBranch<T> MlpBranch<T>::zeros(std::size_t d_model, std::size_t hidden) {
  if (d_model == 0) throw DomainError("mlp branch: d_model must be positive");
  if (hidden == 0) hidden = 4 * d_model;
  return MlpBranch{Tensor<T>({hidden, kExtrinsicWidth}), Tensor<T>({hidden}), Tensor<T>({d_model, hidden}),
                   Tensor<T>({d_model})};
}

template <typename T>
MlpBranch<T> MlpBranch<T>::init(std::size_t d_model, std::size_t hidden, std::uint64_t seed) {
  auto b = zeros(d_model, hidden);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(kExtrinsicWidth));
  fill_uniform(b.w1, bound, rng);
  fill_uniform(b.b1, bound, rng);
  return b;
}

template <typename T>
std::vector<ParamRef<T>> MlpBranch<T>::parameters() {
  return {{"mlp.w1", &w1}, {"mlp.b1", &b1}, {"mlp.w2", &w2}, {"mlp.b2", &b2}};
}

template <typename T>
void MlpBranch<T>::validate() const {
  if (w1.rank() != 2 || w1.extent(1) != kExtrinsicWidth) throw DomainError("mlp branch: w1 must be [hidden, 12]");
  const std::size_t h = w1.extent(0);
  expect_shape(b1, {h}, "mlp branch b1");
  if (w2.rank() != 2 || w2.extent(1) != h) throw DomainError("mlp branch: w2 must be [d_model, hidden]");
  expect_shape(b2, {w2.extent(0)}, "mlp branch b2");
}

template <typename T>
Tensor<T> encode_extrinsic(const MlpBranch<T>& branch, const CameraExtrinsics& extrinsics, MlpCache<T>* cache) {
  const std::size_t hidden = branch.hidden();
  const std::size_t d = branch.d_model();
  const auto flat = extrinsics.flatten();
  std::array<T, kExtrinsicWidth> x{};
  for (std::size_t i = 0; i < kExtrinsicWidth; ++i) x[i] = static_cast<T>(flat[i]);

  std::vector<T> pre(hidden), act(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    T s = branch.b1[j];
    for (std::size_t i = 0; i < kExtrinsicWidth; ++i) s += branch.w1.at(j, i) * x[i];
    pre[j] = s;
    act[j] = gelu(s);
  }
  Tensor<T> out({d});
  for (std::size_t o = 0; o < d; ++o) {
    T s = branch.b2[o];
    for (std::size_t j = 0; j < hidden; ++j) s += branch.w2.at(o, j) * act[j];
    out[o] = s;
  }
  if (cache) {
    cache->input = x;
    cache->pre = std::move(pre);
    cache->act = std::move(act);
  }
  return out;
}

template <typename T>
void mlp_backward(const MlpBranch<T>& branch, const MlpCache<T>& cache, std::span<const T> upstream,
                  MlpBranch<T>& grads) {
  const std::size_t hidden = branch.hidden();
  const std::size_t d = branch.d_model();
  if (upstream.size() != d) throw DomainError("mlp_backward: upstream gradient must have d_model entries");
  std::vector<T> d_act(hidden, T(0));
  for (std::size_t o = 0; o < d; ++o) {
    const T g = upstream[o];
    grads.b2[o] += g;
    for (std::size_t j = 0; j < hidden; ++j) {
      grads.w2.at(o, j) += g * cache.act[j];
      d_act[j] += g * branch.w2.at(o, j);
    }
  }
  for (std::size_t j = 0; j < hidden; ++j) {
    const T g = d_act[j] * gelu_grad(cache.pre[j]);
    grads.b1[j] += g;
    for (std::size_t i = 0; i < kExtrinsicWidth; ++i) grads.w1.at(j, i) += g * cache.input[i];
  }
}

// --------------------------------------------------------------- Conv branch

template <typename T>
ConvBranch<T> ConvBranch<T>::zeros(std::size_t d_model, std::size_t kernel, std::size_t extra_layers) {
  if (d_model == 0) throw DomainError("conv branch: d_model must be positive");
  if (kernel == 0) throw DomainError("conv branch: kernel must be positive");
  ConvBranch b;
  b.kernel = kernel;
  b.weight = Tensor<T>({d_model, 6, kernel, kernel});
  b.bias = Tensor<T>({d_model});
  for (std::size_t l = 0; l < extra_layers; ++l) {
    b.extra.push_back({Tensor<T>({d_model, d_model}), Tensor<T>({d_model})});
  }
  return b;
}

template <typename T>
ConvBranch<T> ConvBranch<T>::init(std::size_t d_model, std::size_t kernel, std::size_t extra_layers,
                                  std::uint64_t seed) {
  auto b = zeros(d_model, kernel, extra_layers);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(6.0 * static_cast<double>(kernel * kernel));
  fill_uniform(b.weight, bound, rng);
  fill_uniform(b.bias, bound, rng);
  const double pw_bound = 1.0 / std::sqrt(static_cast<double>(d_model));
  for (auto& layer : b.extra) {
    fill_uniform(layer.w, pw_bound, rng);
    fill_uniform(layer.b, pw_bound, rng);
  }
  return b;
}

template <typename T>
std::vector<ParamRef<T>> ConvBranch<T>::parameters() {
  std::vector<ParamRef<T>> out{{"conv.weight", &weight}, {"conv.bias", &bias}};
  for (std::size_t l = 0; l < extra.size(); ++l) {
    out.push_back({"conv.pointwise" + std::to_string(l) + ".w", &extra[l].w});
    out.push_back({"conv.pointwise" + std::to_string(l) + ".b", &extra[l].b});
  }
  return out;
}

template <typename T>
void ConvBranch<T>::validate() const {
  if (kernel == 0) throw DomainError("conv branch: kernel must be positive");
  if (weight.rank() != 4 || weight.extent(1) != 6 || weight.extent(2) != kernel || weight.extent(3) != kernel) {
    throw DomainError("conv branch: weight must be [d_model, 6, k, k]");
  }
  const std::size_t d = weight.extent(0);
  expect_shape(bias, {d}, "conv branch bias");
  for (const auto& layer : extra) {
    expect_shape(layer.w, {d, d}, "conv branch pointwise weight");
    expect_shape(layer.b, {d}, "conv branch pointwise bias");
  }
}

template <typename T>
Tensor<T> encode_plucker(const ConvBranch<T>& branch, const PluckerMap& map, ConvCache<T>* cache) {
  const std::size_t k = branch.kernel;
  if (map.h % k != 0 || map.w % k != 0) {
    throw DomainError("encode_plucker: map " + std::to_string(map.h) + "x" + std::to_string(map.w) +
                      " is not divisible by kernel " + std::to_string(k) + " (h=" + std::to_string(map.h) +
                      ", w=" + std::to_string(map.w) + ", k=" + std::to_string(k) + ")");
  }
  const std::size_t oh = map.h / k, ow = map.w / k, d = branch.d_model();
  const std::size_t window = 6 * k * k;

  // Gather windows in (channel, row, col) order to match the weight layout.
  std::vector<T> patches(oh * ow * window);
  for (std::size_t p = 0; p < oh; ++p) {
    for (std::size_t q = 0; q < ow; ++q) {
      T* dst = &patches[(p * ow + q) * window];
      for (std::size_t c = 0; c < 6; ++c) {
        for (std::size_t a = 0; a < k; ++a) {
          for (std::size_t b = 0; b < k; ++b) {
            dst[(c * k + a) * k + b] = static_cast<T>(map.at(p * k + a, q * k + b)[c]);
          }
        }
      }
    }
  }

  std::vector<T> y(oh * ow * d);
  for (std::size_t t = 0; t < oh * ow; ++t) {
    const T* src = &patches[t * window];
    for (std::size_t o = 0; o < d; ++o) {
      const T* wrow = &branch.weight[o * window];
      T s = branch.bias[o];
      for (std::size_t i = 0; i < window; ++i) s += wrow[i] * src[i];
      y[t * d + o] = s;
    }
  }

  std::vector<std::vector<T>> layer_in;
  for (const auto& layer : branch.extra) {
    layer_in.push_back(y);
    std::vector<T> next(y.size());
    for (std::size_t t = 0; t < oh * ow; ++t) {
      for (std::size_t o = 0; o < d; ++o) {
        T s = layer.b[o];
        for (std::size_t i = 0; i < d; ++i) s += layer.w.at(o, i) * gelu(y[t * d + i]);
        next[t * d + o] = s;
      }
    }
    y = std::move(next);
  }

  if (cache) {
    cache->out_h = oh;
    cache->out_w = ow;
    cache->patches = std::move(patches);
    cache->layer_in = std::move(layer_in);
  }
  return Tensor<T>({oh, ow, d}, std::move(y));
}

template <typename T>
void conv_backward(const ConvBranch<T>& branch, const ConvCache<T>& cache, std::span<const T> upstream,
                   ConvBranch<T>& grads) {
  const std::size_t d = branch.d_model();
  const std::size_t tokens = cache.out_h * cache.out_w;
  const std::size_t window = 6 * branch.kernel * branch.kernel;
  if (upstream.size() != tokens * d) throw DomainError("conv_backward: upstream gradient has wrong size");

  std::vector<T> g(upstream.begin(), upstream.end());
  for (std::size_t l = branch.extra.size(); l-- > 0;) {
    const auto& layer = branch.extra[l];
    auto& lg = grads.extra[l];
    const auto& in = cache.layer_in[l];
    std::vector<T> g_in(tokens * d, T(0));
    for (std::size_t t = 0; t < tokens; ++t) {
      for (std::size_t o = 0; o < d; ++o) {
        const T go = g[t * d + o];
        lg.b[o] += go;
        for (std::size_t i = 0; i < d; ++i) {
          lg.w.at(o, i) += go * gelu(in[t * d + i]);
          g_in[t * d + i] += go * layer.w.at(o, i);
        }
      }
      for (std::size_t i = 0; i < d; ++i) g_in[t * d + i] *= gelu_grad(in[t * d + i]);
    }
    g = std::move(g_in);
  }

  for (std::size_t t = 0; t < tokens; ++t) {
    const T* src = &cache.patches[t * window];
    for (std::size_t o = 0; o < d; ++o) {
      const T go = g[t * d + o];
      grads.bias[o] += go;
      T* wg = &grads.weight[o * window];
      for (std::size_t i = 0; i < window; ++i) wg[i] += go * src[i];
    }
  }
}

// ----------------------------------------------------------------- injection

template <typename T>
Tensor<T> inject(const Tensor<T>& z, const Tensor<T>& c_ext, const Tensor<T>& c_plk) {
  if (z.rank() != 2) throw DomainError("inject: z must be [n_tokens, d_model], got " + shape_to_string(z.shape()));
  const std::size_t n = z.extent(0), d = z.extent(1);
  if (c_ext.shape() != Shape{d}) {
    throw DomainError("inject: c_ext must be [" + std::to_string(d) + "], got " + shape_to_string(c_ext.shape()));
  }
  if (c_plk.shape() != z.shape()) {
    throw DomainError("inject: c_plk shape " + shape_to_string(c_plk.shape()) + " does not match z " +
                      shape_to_string(z.shape()));
  }
  Tensor<T> out(z.shape());
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c < d; ++c) out.at(t, c) = (z.at(t, c) + c_ext[c]) + c_plk.at(t, c);
  }
  return out;
}

// ------------------------------------------------------------- serialization

template <typename T>
std::vector<AnyTensor> branch_tensors(const MlpBranch<T>& mlp, const ConvBranch<T>& conv) {
  std::vector<AnyTensor> out{mlp.w1, mlp.b1, mlp.w2, mlp.b2, conv.weight, conv.bias};
  for (const auto& layer : conv.extra) {
    out.emplace_back(layer.w);
    out.emplace_back(layer.b);
  }
  return out;
}

template <typename T>
void branches_from_tensors(const std::vector<AnyTensor>& tensors, MlpBranch<T>& mlp, ConvBranch<T>& conv) {
  if (tensors.size() < 6 || tensors.size() % 2 != 0) {
    throw LoadError("branch file: expected 6 + 2*L tensors, got " + std::to_string(tensors.size()));
  }
  auto take = [&](std::size_t i) -> Tensor<T> {
    const auto* t = std::get_if<Tensor<T>>(&tensors[i]);
    if (!t) throw LoadError("branch file: tensor " + std::to_string(i) + " has the wrong precision");
    return *t;
  };
  MlpBranch<T> m{take(0), take(1), take(2), take(3)};
  ConvBranch<T> c;
  c.weight = take(4);
  c.bias = take(5);
  c.kernel = c.weight.rank() == 4 ? c.weight.extent(2) : 0;
  for (std::size_t i = 6; i < tensors.size(); i += 2) c.extra.push_back({take(i), take(i + 1)});
  try {
    m.validate();
    c.validate();
  } catch (const DomainError& e) {
    throw LoadError(std::string("branch file: ") + e.what());
  }
  if (m.d_model() != c.d_model()) throw LoadError("branch file: mlp and conv d_model differ");
  mlp = std::move(m);
  conv = std::move(c);
}

#define SHOTDIRECTOR_INSTANTIATE(T)                                                                              \
  template T gelu<T>(T);                                                                                         \
  template T gelu_grad<T>(T);                                                                                    \
  template struct MlpBranch<T>;                                                                                  \
  template struct ConvBranch<T>;                                                                                 \
  template Tensor<T> encode_extrinsic<T>(const MlpBranch<T>&, const CameraExtrinsics&, MlpCache<T>*);            \
  template void mlp_backward<T>(const MlpBranch<T>&, const MlpCache<T>&, std::span<const T>, MlpBranch<T>&);     \
  template Tensor<T> encode_plucker<T>(const ConvBranch<T>&, const PluckerMap&, ConvCache<T>*);                  \
  template void conv_backward<T>(const ConvBranch<T>&, const ConvCache<T>&, std::span<const T>, ConvBranch<T>&); \
  template Tensor<T> inject<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                            \
  template std::vector<AnyTensor> branch_tensors<T>(const MlpBranch<T>&, const ConvBranch<T>&);                  \
  template void branches_from_tensors<T>(const std::vector<AnyTensor>&, MlpBranch<T>&, ConvBranch<T>&);

SHOTDIRECTOR_INSTANTIATE(float)
SHOTDIRECTOR_INSTANTIATE(double)

#undef SHOTDIRECTOR_INSTANTIATE

}  // namespace shotdirector
