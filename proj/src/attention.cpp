#include "shotdirector/attention.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <utility>

#include "shotdirector/errors.hpp"
#include "shotdirector/rng.hpp"

namespace shotdirector {

template <typename T>
AttentionParams<T> AttentionParams<T>::zeros(std::size_t d_model, std::size_t n_heads) {
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw DomainError("attention: d_model (" + std::to_string(d_model) + ") must be a positive multiple of n_heads (" +
                      std::to_string(n_heads) + ")");
  }
  const Shape w{d_model, d_model}, b{d_model};
  return AttentionParams{n_heads, Tensor<T>(w), Tensor<T>(b), Tensor<T>(w), Tensor<T>(b),
                         Tensor<T>(w),  Tensor<T>(b), Tensor<T>(w), Tensor<T>(b)};
}

template <typename T>
AttentionParams<T> AttentionParams<T>::init(std::size_t d_model, std::size_t n_heads, std::uint64_t seed) {
  auto p = zeros(d_model, n_heads);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_model));
  for (auto& ref : p.parameters()) {
    for (auto& v : ref.value->values()) v = static_cast<T>(rng.uniform(-bound, bound));
  }
  return p;
}

template <typename T>
std::vector<ParamRef<T>> AttentionParams<T>::parameters(const std::string& prefix) {
  return {{prefix + ".wq", &wq}, {prefix + ".bq", &bq}, {prefix + ".wk", &wk}, {prefix + ".bk", &bk},
          {prefix + ".wv", &wv}, {prefix + ".bv", &bv}, {prefix + ".wo", &wo}, {prefix + ".bo", &bo}};
}

template <typename T>
void AttentionParams<T>::validate() const {
  if (wq.rank() != 2 || wq.extent(0) != wq.extent(1)) throw DomainError("attention: wq must be square");
  const std::size_t d = wq.extent(0);
  if (n_heads == 0 || d % n_heads != 0) throw DomainError("attention: d_model must be divisible by n_heads");
  for (const Tensor<T>* w : {&wq, &wk, &wv, &wo}) {
    if (w->shape() != Shape{d, d}) throw DomainError("attention: projection weights must be [d_model, d_model]");
  }
  for (const Tensor<T>* b : {&bq, &bk, &bv, &bo}) {
    if (b->shape() != Shape{d}) throw DomainError("attention: biases must be [d_model]");
  }
}

namespace {

template <typename T>
void linear_row(const Tensor<T>& w, const Tensor<T>& b, std::span<const T> x, std::span<T> y) {
  const std::size_t out = w.extent(0), in = w.extent(1);
  for (std::size_t o = 0; o < out; ++o) {
    T s = b[o];
    for (std::size_t i = 0; i < in; ++i) s += w.at(o, i) * x[i];
    y[o] = s;
  }
}

template <typename T>
void check_inputs(const AttentionParams<T>& params, const Tensor<T>& x, const AttentionMask& mask) {
  params.validate();
  if (x.rank() != 2 || x.extent(1) != params.d_model()) {
    throw DomainError("masked_attention: x must be [n, " + std::to_string(params.d_model()) + "], got " +
                      shape_to_string(x.shape()));
  }
  if (mask.size() != x.extent(0)) {
    throw DomainError("masked_attention: mask covers " + std::to_string(mask.size()) + " tokens, x has " +
                      std::to_string(x.extent(0)));
  }
}

// Projections for token t.
template <typename T>
void project_row(const AttentionParams<T>& p, const Tensor<T>& x, std::size_t t, Tensor<T>& q, Tensor<T>& k,
                 Tensor<T>& v) {
  linear_row(p.wq, p.bq, x.row(t), q.row(t));
  linear_row(p.wk, p.bk, x.row(t), k.row(t));
  linear_row(p.wv, p.bv, x.row(t), v.row(t));
}

// Attention for query row `qi` across all heads. `weights` points at the
// [n_heads, n, n] buffer.
template <typename T>
void attend_row(const AttentionParams<T>& p, const AttentionMask& mask, const Tensor<T>& q, const Tensor<T>& k,
                const Tensor<T>& v, std::size_t qi, T* weights, Tensor<T>& heads) {
  const std::size_t n = mask.size(), dh = p.head_dim();
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  std::vector<T> logits(n);
  for (std::size_t h = 0; h < p.n_heads; ++h) {
    const std::size_t off = h * dh;
    T* w = weights + (h * n + qi) * n;
    T max_logit = -std::numeric_limits<T>::infinity();
    for (std::size_t ki = 0; ki < n; ++ki) {
      if (!mask.visible(qi, ki)) continue;
      T s = 0;
      for (std::size_t j = 0; j < dh; ++j) s += q.at(qi, off + j) * k.at(ki, off + j);
      logits[ki] = s * scale;
      if (logits[ki] > max_logit) max_logit = logits[ki];
    }
    T sum = 0;
    for (std::size_t ki = 0; ki < n; ++ki) {
      if (!mask.visible(qi, ki)) {
        w[ki] = T(0);
        continue;
      }
      w[ki] = std::exp(logits[ki] - max_logit);
      sum += w[ki];
    }
    for (std::size_t ki = 0; ki < n; ++ki) {
      if (mask.visible(qi, ki)) w[ki] /= sum;
    }
    for (std::size_t j = 0; j < dh; ++j) {
      T s = 0;
      for (std::size_t ki = 0; ki < n; ++ki) {
        if (mask.visible(qi, ki)) s += w[ki] * v.at(ki, off + j);
      }
      heads.at(qi, off + j) = s;
    }
  }
}

template <typename T, bool Parallel>
Tensor<T> attention_impl(const AttentionParams<T>& p, const Tensor<T>& x, const AttentionMask& mask,
                         AttentionCache<T>* cache) {
  check_inputs(p, x, mask);
  const std::size_t n = x.extent(0), d = p.d_model();
  Tensor<T> q({n, d}), k({n, d}), v({n, d}), heads({n, d}), out({n, d});
  std::vector<T> weights(p.n_heads * n * n, T(0));
  const auto rows = static_cast<std::ptrdiff_t>(n);

  if constexpr (Parallel) {
#pragma omp parallel
    {
#pragma omp for schedule(static)
      for (std::ptrdiff_t t = 0; t < rows; ++t) project_row(p, x, static_cast<std::size_t>(t), q, k, v);
#pragma omp for schedule(static)
      for (std::ptrdiff_t t = 0; t < rows; ++t) {
        const auto qi = static_cast<std::size_t>(t);
        attend_row(p, mask, q, k, v, qi, weights.data(), heads);
        linear_row(p.wo, p.bo, std::as_const(heads).row(qi), out.row(qi));
      }
    }
  } else {
    for (std::size_t t = 0; t < n; ++t) project_row(p, x, t, q, k, v);
    for (std::size_t qi = 0; qi < n; ++qi) {
      attend_row(p, mask, q, k, v, qi, weights.data(), heads);
      linear_row(p.wo, p.bo, std::as_const(heads).row(qi), out.row(qi));
    }
  }

  if (cache) {
    cache->x = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->heads = std::move(heads);
    cache->weights = std::move(weights);
  }
  return out;
}

// grads.w += g^T x, grads.b += sum g, returns g W.
template <typename T>
Tensor<T> linear_backward(const Tensor<T>& w, const Tensor<T>& x, const Tensor<T>& g, Tensor<T>& gw, Tensor<T>& gb) {
  const std::size_t n = x.extent(0), out = w.extent(0), in = w.extent(1);
  Tensor<T> gx({n, in});
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t o = 0; o < out; ++o) {
      const T go = g.at(t, o);
      gb[o] += go;
      for (std::size_t i = 0; i < in; ++i) {
        gw.at(o, i) += go * x.at(t, i);
        gx.at(t, i) += go * w.at(o, i);
      }
    }
  }
  return gx;
}

}  // namespace

template <typename T>
Tensor<T> masked_attention(const AttentionParams<T>& params, const Tensor<T>& x, const AttentionMask& mask,
                           AttentionCache<T>* cache) {
  return attention_impl<T, true>(params, x, mask, cache);
}

template <typename T>
Tensor<T> masked_attention_serial(const AttentionParams<T>& params, const Tensor<T>& x, const AttentionMask& mask,
                                  AttentionCache<T>* cache) {
  return attention_impl<T, false>(params, x, mask, cache);
}

template <typename T>
Tensor<T> attention_backward(const AttentionParams<T>& p, const AttentionCache<T>& c, const AttentionMask& mask,
                             const Tensor<T>& upstream, AttentionParams<T>& grads) {
  const std::size_t n = c.x.extent(0), d = p.d_model(), dh = p.head_dim();
  if (upstream.shape() != Shape{n, d}) throw DomainError("attention_backward: upstream shape mismatch");
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  const Tensor<T> g_heads = linear_backward(p.wo, c.heads, upstream, grads.wo, grads.bo);
  Tensor<T> gq({n, d}), gk({n, d}), gv({n, d});
  std::vector<T> g_w(n);
  for (std::size_t h = 0; h < p.n_heads; ++h) {
    const std::size_t off = h * dh;
    for (std::size_t qi = 0; qi < n; ++qi) {
      const T* w = &c.weights[(h * n + qi) * n];
      T dot = 0;
      for (std::size_t ki = 0; ki < n; ++ki) {
        if (!mask.visible(qi, ki)) continue;
        T s = 0;
        for (std::size_t j = 0; j < dh; ++j) {
          s += g_heads.at(qi, off + j) * c.v.at(ki, off + j);
          gv.at(ki, off + j) += w[ki] * g_heads.at(qi, off + j);
        }
        g_w[ki] = s;
        dot += w[ki] * s;
      }
      for (std::size_t ki = 0; ki < n; ++ki) {
        if (!mask.visible(qi, ki)) continue;
        const T g_logit = w[ki] * (g_w[ki] - dot) * scale;
        for (std::size_t j = 0; j < dh; ++j) {
          gq.at(qi, off + j) += g_logit * c.k.at(ki, off + j);
          gk.at(ki, off + j) += g_logit * c.q.at(qi, off + j);
        }
      }
    }
  }
  Tensor<T> gx = linear_backward(p.wq, c.x, gq, grads.wq, grads.bq);
  const Tensor<T> gx_k = linear_backward(p.wk, c.x, gk, grads.wk, grads.bk);
  const Tensor<T> gx_v = linear_backward(p.wv, c.x, gv, grads.wv, grads.bv);
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gx_k[i] + gx_v[i];
  return gx;
}

template <typename T>
Tensor<T> rms_norm(const Tensor<T>& x) {
  const std::size_t n = x.extent(0), d = x.extent(1);
  Tensor<T> y(x.shape());
  for (std::size_t t = 0; t < n; ++t) {
    T ss = 0;
    for (std::size_t i = 0; i < d; ++i) ss += x.at(t, i) * x.at(t, i);
    const T r = std::sqrt(ss / static_cast<T>(d) + static_cast<T>(kRmsNormEps));
    for (std::size_t i = 0; i < d; ++i) y.at(t, i) = x.at(t, i) / r;
  }
  return y;
}

template <typename T>
Tensor<T> rms_norm_backward(const Tensor<T>& x, const Tensor<T>& upstream) {
  const std::size_t n = x.extent(0), d = x.extent(1);
  Tensor<T> gx(x.shape());
  for (std::size_t t = 0; t < n; ++t) {
    T ss = 0;
    for (std::size_t i = 0; i < d; ++i) ss += x.at(t, i) * x.at(t, i);
    const T r = std::sqrt(ss / static_cast<T>(d) + static_cast<T>(kRmsNormEps));
    T gy_dot_y = 0;
    for (std::size_t i = 0; i < d; ++i) gy_dot_y += upstream.at(t, i) * x.at(t, i) / r;
    for (std::size_t i = 0; i < d; ++i) {
      gx.at(t, i) = (upstream.at(t, i) - (x.at(t, i) / r) * gy_dot_y / static_cast<T>(d)) / r;
    }
  }
  return gx;
}

#define SHOTDIRECTOR_INSTANTIATE(T)                                                                                \
  template struct AttentionParams<T>;                                                                              \
  template Tensor<T> masked_attention<T>(const AttentionParams<T>&, const Tensor<T>&, const AttentionMask&,        \
                                         AttentionCache<T>*);                                                      \
  template Tensor<T> masked_attention_serial<T>(const AttentionParams<T>&, const Tensor<T>&, const AttentionMask&, \
                                                AttentionCache<T>*);                                               \
  template Tensor<T> attention_backward<T>(const AttentionParams<T>&, const AttentionCache<T>&,                    \
                                           const AttentionMask&, const Tensor<T>&, AttentionParams<T>&);           \
  template Tensor<T> rms_norm<T>(const Tensor<T>&);                                                                \
  template Tensor<T> rms_norm_backward<T>(const Tensor<T>&, const Tensor<T>&);

SHOTDIRECTOR_INSTANTIATE(float)
SHOTDIRECTOR_INSTANTIATE(double)

#undef SHOTDIRECTOR_INSTANTIATE

}  // namespace shotdirector
