#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "shotdirector/attention.hpp"
#include "shotdirector/block.hpp"
#include "shotdirector/errors.hpp"
#include "shotdirector/training.hpp"
#include "test_support.hpp"

using namespace shotdirector;
using testing::random_layout;

namespace {

template <typename T>
Tensor<T> noise(const Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-scale, scale));
  return t;
}

// y = W x + b for one row, in plain double.
std::vector<double> affine(const Tensor<double>& w, const Tensor<double>& b, std::span<const double> x) {
  std::vector<double> y(w.extent(0));
  for (std::size_t o = 0; o < y.size(); ++o) {
    y[o] = b[o];
    for (std::size_t i = 0; i < x.size(); ++i) y[o] += w.at(o, i) * x[i];
  }
  return y;
}

// Independent reference: per head, explicit exp/sum over visible keys.
Tensor<double> reference_attention(const AttentionParams<double>& p, const Tensor<double>& x, const AttentionMask& m) {
  const std::size_t n = x.extent(0), d = p.d_model(), hd = p.head_dim();
  std::vector<std::vector<double>> q(n), k(n), v(n);
  for (std::size_t t = 0; t < n; ++t) {
    q[t] = affine(p.wq, p.bq, x.row(t));
    k[t] = affine(p.wk, p.bk, x.row(t));
    v[t] = affine(p.wv, p.bv, x.row(t));
  }
  Tensor<double> out({n, d});
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> heads(d, 0.0);
    for (std::size_t h = 0; h < p.n_heads; ++h) {
      std::vector<double> w(n, 0.0);
      double z = 0;
      for (std::size_t s = 0; s < n; ++s) {
        if (!m.visible(t, s)) continue;
        double dotp = 0;
        for (std::size_t c = 0; c < hd; ++c) dotp += q[t][h * hd + c] * k[s][h * hd + c];
        w[s] = std::exp(dotp / std::sqrt(double(hd)));
        z += w[s];
      }
      for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t c = 0; c < hd; ++c) heads[h * hd + c] += w[s] / z * v[s][h * hd + c];
      }
    }
    const auto y = affine(p.wo, p.bo, heads);
    for (std::size_t c = 0; c < d; ++c) out.at(t, c) = y[c];
  }
  return out;
}

double weighted_sum(const Tensor<double>& a, const Tensor<double>& g) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * g[i];
  return s;
}

// Per-tensor max |a - n| / max(max |a|, max |n|, floor), where floor is
// 1e-3 of the largest analytic gradient overall (see README).
double fd_error(std::vector<ParamRef<double>> params, std::vector<ParamRef<double>> analytic,
                const std::function<double()>& loss) {
  double global = 0;
  for (const auto& a : analytic) {
    for (double v : a.value->values()) global = std::max(global, std::abs(v));
  }
  const double h = 1e-5;
  double worst = 0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& v = params[p].value->values();
    double diff = 0, scale = 1e-3 * global;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + h;
      const double plus = loss();
      v[i] = saved - h;
      const double minus = loss();
      v[i] = saved;
      const double numeric = (plus - minus) / (2 * h);
      const double a = (*analytic[p].value)[i];
      diff = std::max(diff, std::abs(a - numeric));
      scale = std::max({scale, std::abs(a), std::abs(numeric)});
    }
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

std::size_t param_count(ToyModel<double>& m) {
  std::size_t n = 0;
  for (const auto& p : m.parameters()) n += p.value->size();
  return n;
}

}  // namespace

TEST_SUITE("attention_core") {

TEST_CASE("single token attention is a linear map") {
  Rng rng(1);
  const auto p = AttentionParams<double>::init(6, 2, 3);
  const auto x = noise<double>({1, 6}, rng);
  const auto out = masked_attention(p, x, AttentionMask::all_visible(1));
  const auto want = affine(p.wo, p.bo, affine(p.wv, p.bv, x.row(0)));
  for (std::size_t c = 0; c < 6; ++c) CHECK(out[c] == doctest::Approx(want[c]).epsilon(1e-14));
}

TEST_CASE("identity mask applies the single-token formula per row") {
  Rng rng(2);
  const auto p = AttentionParams<double>::init(4, 2, 5);
  const auto x = noise<double>({5, 4}, rng);
  std::vector<std::uint8_t> eye(25, 0);
  for (int i = 0; i < 5; ++i) eye[i * 5 + i] = 1;
  const auto out = masked_attention(p, x, AttentionMask(5, eye));
  for (std::size_t t = 0; t < 5; ++t) {
    const auto want = affine(p.wo, p.bo, affine(p.wv, p.bv, x.row(t)));
    for (std::size_t c = 0; c < 4; ++c) CHECK(out.at(t, c) == doctest::Approx(want[c]).epsilon(1e-14));
  }
}

TEST_CASE("zero query projection gives uniform weights") {
  Rng rng(3);
  auto p = AttentionParams<double>::init(4, 2, 7);
  p.wq.fill(0);
  p.bq.fill(0);
  const auto x = noise<double>({6, 4}, rng);
  AttentionCache<double> cache;
  masked_attention(p, x, AttentionMask::all_visible(6), &cache);
  for (double w : cache.weights) CHECK(w == doctest::Approx(1.0 / 6).epsilon(1e-15));
}

TEST_CASE("masked attention matches the reference on random layouts") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto l = random_layout(rng, 40);
    const auto m = build_mask(l);
    const auto p = AttentionParams<double>::init(6, 3, rng.next_u64());
    const auto x = noise<double>({m.size(), 6}, rng, 2.0);
    const auto got = masked_attention(p, x, m);
    const auto want = reference_attention(p, x, m);
    for (std::size_t i = 0; i < got.size(); ++i) REQUIRE(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("weights are row-stochastic and exactly zero on masked pairs") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto l = random_layout(rng, 64);
    const auto m = build_mask(l);
    const std::size_t n = m.size();
    const auto p = AttentionParams<float>::init(8, 2, rng.next_u64());
    AttentionCache<float> cache;
    masked_attention(p, noise<float>({n, 8}, rng, 3.0), m, &cache);
    for (std::size_t h = 0; h < 2; ++h) {
      for (std::size_t q = 0; q < n; ++q) {
        double sum = 0;
        for (std::size_t k = 0; k < n; ++k) {
          const float w = cache.weights[(h * n + q) * n + k];
          if (!m.visible(q, k)) REQUIRE(w == 0.0f);
          sum += w;
        }
        REQUIRE(std::abs(sum - 1.0) < 1e-6);
      }
    }
  }
}

TEST_CASE("parallel and serial attention are bit-identical") {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto l = random_layout(rng, 64);
    const auto m = build_mask(l);
    const auto p = AttentionParams<float>::init(8, 4, rng.next_u64());
    const auto x = noise<float>({m.size(), 8}, rng);
    AttentionCache<float> a, b;
    CHECK(masked_attention(p, x, m, &a) == masked_attention_serial(p, x, m, &b));
    CHECK(a.weights == b.weights);
  }
}

TEST_CASE("permutation consistency") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto l = random_layout(rng, 48);
    const auto m = build_mask(l);
    const std::size_t n = m.size();
    const auto p = AttentionParams<float>::init(8, 2, rng.next_u64());
    const auto x = noise<float>({n, 8}, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

    Tensor<float> px({n, 8});
    std::vector<std::uint8_t> bits(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 8; ++c) px.at(i, c) = x.at(perm[i], c);
      for (std::size_t j = 0; j < n; ++j) bits[i * n + j] = m.visible(perm[i], perm[j]);
    }
    const auto out = masked_attention(p, x, m);
    const auto pout = masked_attention(p, px, AttentionMask(n, bits));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 8; ++c) REQUIRE(std::abs(pout.at(i, c) - out.at(perm[i], c)) < 1e-6f);
    }
  }
}

TEST_CASE("attention rejects mismatched inputs") {
  const auto p = AttentionParams<double>::init(4, 2, 1);
  CHECK_THROWS_AS(masked_attention(p, Tensor<double>({3, 4}), AttentionMask::all_visible(4)), DomainError);
  CHECK_THROWS_AS(masked_attention(p, Tensor<double>({3, 5}), AttentionMask::all_visible(3)), DomainError);
  CHECK_THROWS_AS(AttentionParams<double>::init(6, 4, 1), DomainError);
}

TEST_CASE("attention gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto l = random_layout(rng, 12);
    const auto m = build_mask(l);
    const std::size_t n = m.size();
    auto p = AttentionParams<double>::init(6, 2, seed);
    for (auto* t : {&p.wq, &p.wk}) *t = noise<double>(t->shape(), rng);
    auto x = noise<double>({n, 6}, rng);
    const auto g = noise<double>({n, 6}, rng);

    AttentionCache<double> cache;
    masked_attention(p, x, m, &cache);
    auto grads = AttentionParams<double>::zeros(6, 2);
    const auto dx = attention_backward(p, cache, m, g, grads);
    const auto loss = [&] { return weighted_sum(masked_attention(p, x, m), g); };
    CHECK(fd_error(p.parameters(), grads.parameters(), loss) < 1e-5);

    Tensor<double> dx_copy = dx;
    std::vector<ParamRef<double>> xs = {{"x", &x}}, dxs = {{"dx", &dx_copy}};
    CHECK(fd_error(xs, dxs, loss) < 1e-5);
  }
}

TEST_CASE("key bias gradient is structurally zero") {
  // softmax is invariant to adding q . bk to every logit in a row.
  Rng rng(8);
  const auto l = random_layout(rng, 20);
  const auto m = build_mask(l);
  const auto p = AttentionParams<double>::init(4, 2, 2);
  AttentionCache<double> cache;
  masked_attention(p, noise<double>({m.size(), 4}, rng), m, &cache);
  auto grads = AttentionParams<double>::zeros(4, 2);
  attention_backward(p, cache, m, noise<double>({m.size(), 4}, rng), grads);
  double wmax = 0;
  for (double v : grads.wq.values()) wmax = std::max(wmax, std::abs(v));
  for (double v : grads.bk.values()) CHECK(std::abs(v) < 1e-12 * std::max(1.0, wmax));
}

TEST_CASE("rms_norm forward and backward") {
  Rng rng(9);
  auto x = noise<double>({3, 5}, rng);
  const auto y = rms_norm(x);
  for (std::size_t t = 0; t < 3; ++t) {
    double ms = 0;
    for (double v : x.row(t)) ms += v * v;
    const double r = std::sqrt(ms / 5 + kRmsNormEps);
    for (std::size_t c = 0; c < 5; ++c) CHECK(y.at(t, c) == doctest::Approx(x.at(t, c) / r).epsilon(1e-14));
  }
  const auto g = noise<double>({3, 5}, rng);
  Tensor<double> dx = rms_norm_backward(x, g);
  std::vector<ParamRef<double>> xs = {{"x", &x}}, dxs = {{"dx", &dx}};
  CHECK(fd_error(xs, dxs, [&] { return weighted_sum(rms_norm(x), g); }) < 1e-7);
}

TEST_CASE("block with everything off is plain attention") {
  Rng rng(10);
  const auto l = make_layout(2, 2, 1, 2, 1, 1);
  BlockConfig cfg;
  cfg.use_mask = cfg.use_extrinsic_branch = cfg.use_plucker_branch = false;
  auto model = ToyModel<double>::init(4, 2, 1, 8, 2, 0, 3);
  const auto inputs = synthetic_inputs<double>(l, 4, 4);
  Tensor<double> x({l.total_tokens(), 4});
  std::copy(inputs.text.values().begin(), inputs.text.values().end(), x.values().begin());
  std::copy(inputs.visual.values().begin(), inputs.visual.values().end(),
            x.values().begin() + static_cast<std::ptrdiff_t>(inputs.text.size()));
  const auto want = masked_attention(model.layers[0], x, AttentionMask::all_visible(l.total_tokens()));
  CHECK(block_forward(model, cfg, l, inputs) == want);

  // With W_q = 0 every row is the same mean of projected values.
  model.layers[0].wq.fill(0);
  model.layers[0].bq.fill(0);
  const auto out = block_forward(model, cfg, l, inputs);
  for (std::size_t t = 1; t < out.extent(0); ++t) {
    for (std::size_t c = 0; c < 4; ++c) CHECK(out.at(t, c) == doctest::Approx(out.at(0, c)).epsilon(1e-13));
  }
}

TEST_CASE("ablation equivalences are bitwise") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto l = make_layout(3, 2, 2, 2, 2, 1);
    auto model = ToyModel<float>::init(8, 2, 2, 0, 2, 1, seed);
    Rng rng(seed);
    model.mlp.w2 = noise<float>(model.mlp.w2.shape(), rng);
    const auto inputs = synthetic_inputs<float>(l, 8, seed + 10);
    BlockConfig on;
    on.layers = 2;
    on.full_visibility_layers = 1;

    auto no_ext = on;
    no_ext.use_extrinsic_branch = false;
    auto zero_mlp = model;
    zero_mlp.mlp = MlpBranch<float>::zeros(8, model.mlp.hidden());
    CHECK(block_forward(model, no_ext, l, inputs) == block_forward(zero_mlp, on, l, inputs));

    auto no_plk = on;
    no_plk.use_plucker_branch = false;
    auto zero_conv = model;
    zero_conv.conv = ConvBranch<float>::zeros(8, 2, 1);
    CHECK(block_forward(model, no_plk, l, inputs) == block_forward(zero_conv, on, l, inputs));

    auto none = no_ext;
    none.use_plucker_branch = false;
    auto both_zero = zero_mlp;
    both_zero.conv = zero_conv.conv;
    CHECK(block_forward(model, none, l, inputs) == block_forward(both_zero, on, l, inputs));

    // Fresh transfer layer: the extrinsic branch is a no-op.
    const auto fresh = ToyModel<float>::init(8, 2, 2, 0, 2, 1, seed);
    CHECK(block_forward(fresh, no_ext, l, inputs) == block_forward(fresh, on, l, inputs));

    // One shot spanning the video: the mask is all-true.
    const auto single = make_layout(1, 4, 2, 2, 2, 0);
    const auto single_inputs = synthetic_inputs<float>(single, 8, seed + 20);
    auto unmasked = on;
    unmasked.use_mask = false;
    unmasked.full_visibility_layers = 0;
    auto masked = unmasked;
    masked.use_mask = true;
    CHECK(block_forward(model, masked, single, single_inputs) == block_forward(model, unmasked, single, single_inputs));
  }
}

TEST_CASE("block rejects inconsistent inputs") {
  const auto l = make_layout(2, 2, 1, 1, 1, 1);
  const auto model = ToyModel<double>::init(4, 2, 1, 4, 1, 0, 1);
  auto inputs = synthetic_inputs<double>(l, 4, 2);
  BlockConfig cfg;
  auto missing = inputs;
  missing.cameras.pop_back();
  CHECK_THROWS_AS(block_forward(model, cfg, l, missing), DomainError);
  auto wrong = inputs;
  wrong.cameras[0].push_back(wrong.cameras[0].front());
  CHECK_THROWS_AS(block_forward(model, cfg, l, wrong), DomainError);
  auto single = inputs;
  for (auto& shot : single.cameras) shot.erase(shot.begin() + 1, shot.end());
  CHECK_NOTHROW(block_forward(model, cfg, l, single));
  BlockConfig deep = cfg;
  deep.layers = 2;
  CHECK_THROWS_AS(block_forward(model, deep, l, inputs), DomainError);
  deep.full_visibility_layers = 3;
  CHECK_THROWS_AS(deep.validate(), DomainError);
}

TEST_CASE("leakage probe") {
  const auto l = make_layout(3, 3, 2, 2, 2, 1);
  const auto model = ToyModel<double>::init(8, 2, 1, 0, 1, 0, 5);
  const auto inputs = synthetic_inputs<double>(l, 8, 6);
  BlockConfig masked;
  BlockConfig open = masked;
  open.use_mask = false;

  for (std::size_t j = 0; j < l.shots.size(); ++j) {
    const auto range = l.shot_visual_range(j);
    for (std::size_t token = range.start; token < range.end; ++token) {
      if (l.first_frame_range().contains(token)) continue;
      const auto deltas = leakage_probe(model, masked, l, inputs, token, 1e-3);
      const auto open_deltas = leakage_probe(model, open, l, inputs, token, 1e-3);
      double open_max = 0;
      for (std::size_t t = 0; t < deltas.size(); ++t) {
        const auto c = classify_token(l, t);
        if (c.kind == TokenKind::GlobalText || c.shot == j) continue;
        REQUIRE(deltas[t] == 0.0);
        open_max = std::max(open_max, open_deltas[t]);
      }
      CHECK(open_max > 1e-8);
      CHECK(deltas[token] > 0.0);
    }
  }
  const auto zero = leakage_probe(model, masked, l, inputs, l.shot_visual_range(1).start, 0.0);
  for (double d : zero) CHECK(d == 0.0);
  CHECK_THROWS_AS(leakage_probe(model, masked, l, inputs, l.first_frame_range().start, 1e-3), DomainError);
  CHECK_THROWS_AS(leakage_probe(model, masked, l, inputs, 0, 1e-3), DomainError);
}

TEST_CASE("stacked masked layers stay isolated without global text") {
  // Global text and frame 0 relay information across shots once layers
  // stack; with neither in play, isolation holds at any depth for j != 0.
  const auto l = make_layout(3, 2, 1, 2, 0, 1);
  BlockConfig cfg;
  cfg.layers = 3;
  const auto model = ToyModel<double>::init(8, 2, 3, 0, 1, 0, 7);
  const auto inputs = synthetic_inputs<double>(l, 8, 8);
  for (std::size_t j = 1; j < l.shots.size(); ++j) {
    const auto range = l.shot_visual_range(j);
    for (std::size_t token = range.start; token < range.end; ++token) {
      const auto deltas = leakage_probe(model, cfg, l, inputs, token, 1e-3);
      for (std::size_t t = 0; t < deltas.size(); ++t) {
        if (classify_token(l, t).shot != j) REQUIRE(deltas[t] == 0.0);
      }
    }
  }
}

TEST_CASE("block gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (bool residual : {false, true}) {
      const auto l = make_layout(2, 2, 1, 2, 1, 1);
      BlockConfig cfg;
      cfg.layers = 2;
      cfg.full_visibility_layers = 1;
      cfg.residual_rmsnorm = residual;
      auto model = ToyModel<double>::init(4, 2, 2, 4, 2, 0, seed);
      REQUIRE(param_count(model) <= 500);
      Rng rng(seed + 1000);
      model.mlp.w2 = noise<double>(model.mlp.w2.shape(), rng, 0.5);
      model.mlp.b2 = noise<double>(model.mlp.b2.shape(), rng, 0.5);
      for (auto& layer : model.layers) {
        for (auto* t : {&layer.wq, &layer.wk}) *t = noise<double>(t->shape(), rng);
      }
      const auto inputs = synthetic_inputs<double>(l, 4, seed);
      const auto target = noise<double>({l.total_tokens(), 4}, rng);
      ToyModel<double> grads;
      mse_loss_and_grad(model, cfg, l, inputs, target, &grads);
      const auto loss = [&] { return double(mse_loss_and_grad<double>(model, cfg, l, inputs, target, nullptr)); };
      CHECK(fd_error(model.parameters(), grads.parameters(), loss) < 1e-5);
    }
  }
}

TEST_CASE("gradcheck_random passes the tool threshold") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = gradcheck_random(seed);
    CHECK(r.max_rel_error < 1e-5);
    CHECK(r.entries.size() == ToyModel<double>::init(8, 2, 2, 8, 2, 1, 0).parameters().size());
  }
}

TEST_CASE("gradient descent on a parabola decays geometrically") {
  // L = a x^2 / 2, so x_k = (1 - lr a)^k x_0 and L_k = L_0 (1 - lr a)^(2k).
  const double a = 3.0, lr = 0.1, x0 = 2.0;
  Tensor<double> x({1}, {x0});
  std::vector<ParamRef<double>> params = {{"x", &x}};
  Objective<double> f = [&](std::vector<Tensor<double>>& g) {
    g.push_back(Tensor<double>({1}, {a * x[0]}));
    return 0.5 * a * x[0] * x[0];
  };
  const auto trace = gradient_descent(params, f, 30, lr);
  REQUIRE(trace.size() == 30);
  for (std::size_t k = 0; k < trace.size(); ++k) {
    CHECK(trace[k] == doctest::Approx(0.5 * a * x0 * x0 * std::pow(1 - lr * a, 2.0 * k)).epsilon(1e-12));
  }

  Tensor<double> y({1}, {1.0});
  std::vector<ParamRef<double>> yp = {{"y", &y}};
  Objective<double> blowup = [&](std::vector<Tensor<double>>& g) {
    g.push_back(Tensor<double>({1}, {1e300 * y[0]}));
    return y[0] * y[0];
  };
  try {
    gradient_descent(yp, blowup, 10, 1.0);
    FAIL("expected divergence");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
  CHECK_THROWS_AS(gradient_descent(yp, blowup, 0, 1.0), DomainError);
}

TEST_CASE("train_demo with zero learning rate is constant") {
  const auto l = make_layout(2, 2, 1, 2, 1, 1);
  BlockConfig cfg;
  auto model = ToyModel<float>::init(8, 2, 1, 0, 2, 0, 1);
  const auto inputs = synthetic_inputs<float>(l, 8, 2);
  const auto target = random_tensor<float>({l.total_tokens(), 8}, 3);
  const auto trace = train_demo(model, cfg, l, inputs, target, 5, 0.0f);
  for (float v : trace) CHECK(v == trace.front());
}

TEST_CASE("train_demo reproduces the recorded loss trace") {
  // Default tool config (d_model 64, 4 heads, 4 layers, 2 full-visibility
  // layers), seed 0, 200 steps.
  const auto l = make_layout(2, 3, 2, 2, 2, 2);
  BlockConfig cfg;
  cfg.layers = 4;
  cfg.full_visibility_layers = 2;
  Rng seeds(0);
  auto model = ToyModel<float>::init(64, 4, 4, 0, 2, 0, seeds.next_u64());
  const auto inputs = synthetic_inputs<float>(l, 64, seeds.next_u64());
  const auto target = random_tensor<float>({l.total_tokens(), 64}, seeds.next_u64());
  const auto trace = train_demo(model, cfg, l, inputs, target, 200, 0.5f);
  REQUIRE(trace.size() == 200);
  CHECK(trace.back() < trace.front());

  const std::string path = std::string(SHOTDIRECTOR_FIXTURE_DIR) + "/train_demo_loss.json";
  if (const char* record = std::getenv("SHOTDIRECTOR_RECORD_FIXTURES"); record && std::string(record) == "1") {
    nlohmann::json j;
    j["seed"] = 0;
    j["steps"] = 200;
    j["learning_rate"] = 0.5;
    j["loss"] = trace;
    std::ofstream(path) << j.dump(1) << "\n";
  }
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), "missing fixture " << path);
  const auto recorded = nlohmann::json::parse(in)["loss"].get<std::vector<float>>();
  REQUIRE(recorded.size() == trace.size());
  CHECK(recorded.back() < recorded.front());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    CHECK(trace[i] == doctest::Approx(recorded[i]).epsilon(1e-4));
  }
}

}  // TEST_SUITE
