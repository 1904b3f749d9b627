// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cli_inputs.hpp"
#include "curation_cases.hpp"
#include "mask_oracle.hpp"
#include "shotdirector/config.hpp"
#include "shotdirector/conditioning.hpp"
#include "shotdirector/metrics.hpp"
#include "test_support.hpp"

using namespace shotdirector;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

/// Runs one criterion; `budget` > 0 adds a runtime bound in seconds.
void criterion(const std::string& name, double budget, const std::function<Outcome()>& check) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double elapsed = seconds_since(t0);
  if (budget > 0 && elapsed >= budget) {
    o.pass = false;
    o.detail += "; runtime over budget";
  }
  std::ostringstream line;
  line << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << " [" << std::fixed << std::setprecision(3)
       << elapsed << " s";
  if (budget > 0) line << " / " << budget << " s";
  line << "]";
  std::cout << line.str() << std::endl;
  if (!o.pass) ++failures;
}

template <typename T>
Tensor<T> uniform_noise(const Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-scale, scale));
  return t;
}

std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(3) << x;
  return s.str();
}

Outcome plucker_geometry() {
  Rng rng(1);
  double worst_norm = 0, worst_dot = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto pose = testing::random_pose(rng);
    for (const auto& c : plucker_map(pose, 4, 4).cells) {
      const Vec3 m(c[0], c[1], c[2]), d(c[3], c[4], c[5]);
      worst_norm = std::max(worst_norm, std::abs(d.norm() - 1.0));
      worst_dot = std::max(worst_dot, std::abs(m.dot(d)));
    }
  }
  // Identity camera at the origin: every moment is zero. Shifted to x = 1,
  // the top-left cell looks down +z, so the moment is (1,0,0) x (0,0,1).
  const CameraIntrinsics k(1, 1, 0, 0, 4, 4);
  const auto origin = plucker_map({k, CameraExtrinsics(), 0}, 4, 4);
  bool hand = true;
  for (const auto& c : origin.cells) hand = hand && c[0] == 0.0 && c[1] == 0.0 && c[2] == 0.0;
  const auto shifted = plucker_map({k, CameraExtrinsics(Mat3::Identity(), Vec3(1, 0, 0)), 0}, 4, 4);
  hand = hand && shifted.at(0, 0) == PluckerCell{0, -1, 0, 0, 0, 1};
  const bool ok = worst_norm < 1e-9 && worst_dot < 1e-9 && hand;
  return {ok, "1000 poses, max | |d|-1 | = " + fmt(worst_norm) + ", max |m.d| = " + fmt(worst_dot) +
                  ", hand cells " + (hand ? "exact" : "MISMATCH")};
}

Outcome mask_oracle() {
  Rng rng(2);
  std::size_t pairs = 0, multi_shot = 0, mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto l = testing::random_layout(rng, 64);
    const auto m = build_mask(l);
    multi_shot += l.shots.size() > 1;
    for (std::size_t q = 0; q < m.size(); ++q) {
      for (std::size_t k = 0; k < m.size(); ++k) {
        mismatches += m.visible(q, k) != testing::oracle_visible(l, q, k);
        ++pairs;
      }
    }
  }
  return {mismatches == 0 && multi_shot > 0, "100 layouts (" + std::to_string(multi_shot) + " multi-shot), " +
                                                 std::to_string(pairs) + " pairs, " + std::to_string(mismatches) +
                                                 " mismatches"};
}

Outcome leakage() {
  // One masked layer over a layout with global and local text.
  const auto l = make_layout(3, 3, 2, 2, 2, 1);
  const auto model = ToyModel<double>::init(8, 2, 1, 0, 1, 0, 5);
  const auto inputs = synthetic_inputs<double>(l, 8, 6);
  BlockConfig masked;
  BlockConfig open = masked;
  open.use_mask = false;
  std::size_t probes = 0, nonzero = 0;
  double min_open = INFINITY;
  for (std::size_t j = 0; j < l.shots.size(); ++j) {
    const auto range = l.shot_visual_range(j);
    for (std::size_t token = range.start; token < range.end; ++token) {
      if (l.first_frame_range().contains(token)) continue;
      const auto d = leakage_probe(model, masked, l, inputs, token, 1e-3);
      const auto od = leakage_probe(model, open, l, inputs, token, 1e-3);
      double open_max = 0;
      for (std::size_t t = 0; t < d.size(); ++t) {
        const auto c = classify_token(l, t);
        if (c.kind == TokenKind::GlobalText || c.shot == j) continue;
        nonzero += d[t] != 0.0;
        open_max = std::max(open_max, od[t]);
      }
      min_open = std::min(min_open, open_max);
      ++probes;
    }
  }
  // Three stacked masked layers, no global text, j != 0.
  const auto deep_layout = make_layout(3, 2, 1, 2, 0, 1);
  BlockConfig deep;
  deep.layers = 3;
  const auto deep_model = ToyModel<double>::init(8, 2, 3, 0, 1, 0, 7);
  const auto deep_inputs = synthetic_inputs<double>(deep_layout, 8, 8);
  std::size_t deep_probes = 0;
  for (std::size_t j = 1; j < deep_layout.shots.size(); ++j) {
    const auto range = deep_layout.shot_visual_range(j);
    for (std::size_t token = range.start; token < range.end; ++token) {
      const auto d = leakage_probe(deep_model, deep, deep_layout, deep_inputs, token, 1e-3);
      for (std::size_t t = 0; t < d.size(); ++t) {
        if (classify_token(deep_layout, t).shot != j) nonzero += d[t] != 0.0;
      }
      ++deep_probes;
    }
  }
  const bool ok = nonzero == 0 && min_open > 1e-8;
  return {ok, std::to_string(probes) + " single-layer + " + std::to_string(deep_probes) +
                  " stacked probes, nonzero cross-shot deltas with mask = " + std::to_string(nonzero) +
                  ", min unmasked delta = " + fmt(min_open)};
}

Outcome gradient_checks() {
  double worst = 0;
  std::map<std::string, double> groups;  // mlp, conv, layer
  for (bool residual : {false, true}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto r = gradcheck_random(seed, residual);
      worst = std::max(worst, r.max_rel_error);
      for (const auto& e : r.entries) {
        const auto group = e.name.substr(0, e.name.find_first_of(".0123456789"));
        groups[group] = std::max(groups[group], e.max_rel_error);
      }
    }
  }
  std::string detail = "20 seeds x {plain, residual}, step 1e-5";
  for (const auto& [g, e] : groups) detail += ", " + g + " " + fmt(e);
  const bool ok = worst < 1e-4 && groups.count("mlp") && groups.count("conv") && groups.count("layer");
  return {ok, detail + " (threshold 1e-4)"};
}

Outcome zero_init() {
  Rng rng(3);
  std::size_t nonzero = 0, mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto mlp = MlpBranch<float>::init(8, 0, static_cast<std::uint64_t>(trial));
    const auto pose = testing::random_pose(rng);
    const auto c_ext = encode_extrinsic(mlp, pose.extrinsics);
    for (float v : c_ext.values()) nonzero += v != 0.0f;
    const auto z = uniform_noise<float>({6, 8}, rng), c_plk = uniform_noise<float>({6, 8}, rng);
    const auto out = inject(z, c_ext, c_plk);
    for (std::size_t i = 0; i < z.size(); ++i) mismatches += out[i] != z[i] + c_plk[i];
  }
  return {nonzero == 0 && mismatches == 0, "50 fresh branches: " + std::to_string(nonzero) +
                                               " nonzero outputs, " + std::to_string(mismatches) +
                                               " inject mismatches vs z + c_plk"};
}

Outcome ablations() {
  std::size_t checks = 0, mismatches = 0;
  auto expect_same = [&](const Tensor<float>& a, const Tensor<float>& b) {
    ++checks;
    mismatches += !(a == b);
  };
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto l = make_layout(3, 2, 2, 2, 2, 1);
    auto model = ToyModel<float>::init(8, 2, 2, 0, 2, 1, seed);
    Rng rng(seed);
    model.mlp.w2 = uniform_noise<float>(model.mlp.w2.shape(), rng);
    const auto inputs = synthetic_inputs<float>(l, 8, seed + 10);
    BlockConfig on;
    on.layers = 2;
    on.full_visibility_layers = 1;

    auto no_ext = on;
    no_ext.use_extrinsic_branch = false;
    auto zero_mlp = model;
    zero_mlp.mlp = MlpBranch<float>::zeros(8, model.mlp.hidden());
    expect_same(block_forward(model, no_ext, l, inputs), block_forward(zero_mlp, on, l, inputs));

    auto no_plk = on;
    no_plk.use_plucker_branch = false;
    auto zero_conv = model;
    zero_conv.conv = ConvBranch<float>::zeros(8, 2, 1);
    expect_same(block_forward(model, no_plk, l, inputs), block_forward(zero_conv, on, l, inputs));

    const auto single = make_layout(1, 4, 2, 2, 2, 0);
    const auto single_inputs = synthetic_inputs<float>(single, 8, seed + 20);
    auto unmasked = on;
    unmasked.use_mask = false;
    unmasked.full_visibility_layers = 0;
    auto masked = unmasked;
    masked.use_mask = true;
    expect_same(block_forward(model, masked, single, single_inputs),
                block_forward(model, unmasked, single, single_inputs));
  }
  return {mismatches == 0, std::to_string(checks) + " bitwise comparisons (branch off vs zero branch, "
                                                    "single-shot mask on vs off), " +
                               std::to_string(mismatches) + " mismatches"};
}

Outcome curation_thresholds() {
  const CurationThresholds t;
  const bool defaults = t.segmentation == 0.45 && t.first_last_similarity_min == 0.90 && t.stitching_min == 0.65 &&
                        t.pair_similarity_max == 0.95 && t.duration_min == 5.0 && t.duration_max == 12.0 &&
                        t.required_shot_count == 2;
  const auto cases = testing::boundary_cases();
  std::size_t fixture_bad = 0, kept = 0;
  for (const auto& c : cases) {
    const auto r = apply_filters(c.line.record, c.line.caption, t);
    std::vector<std::string> rules;
    for (const auto& f : r.failed_rules) rules.push_back(f.rule);
    fixture_bad += rules != c.expected_failed || (r.verdict == Verdict::Keep) != c.expected_failed.empty();
    kept += r.verdict == Verdict::Keep;
  }
  Rng rng(42);
  std::size_t oracle_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto rec = testing::random_record(rng, i);
    const auto r = apply_filters(rec, std::nullopt, t);
    std::vector<std::string> rules;
    for (const auto& f : r.failed_rules) rules.push_back(f.rule);
    oracle_bad += rules != testing::oracle_failures(rec, t);
  }
  const bool ok = defaults && cases.size() == 64 && fixture_bad == 0 && oracle_bad == 0;
  return {ok, std::string("defaults ") + (defaults ? "match" : "DIFFER") + ", " + std::to_string(cases.size()) +
                  " boundary records (" + std::to_string(kept) + " kept), " + std::to_string(fixture_bad) +
                  " fixture mismatches, " + std::to_string(oracle_bad) + "/1000 rule-table mismatches"};
}

Outcome mixing_sampler() {
  MixingSampler a(1000, 1000, {7, 3}, 2024), b(1000, 1000, {7, 3}, 2024);
  const auto draws = a.take(100000);
  std::size_t real = 0;
  for (const auto& d : draws) real += d.source == SourceTag::Real;
  const double fraction = static_cast<double>(real) / 1e5;
  const bool same = draws == b.take(100000);
  return {std::abs(fraction - 0.7) <= 0.01 && same,
          "real fraction " + fmt(fraction) + " over 100000 draws, identical seeds " + (same ? "identical" : "DIFFER")};
}

Outcome metrics_closed_forms() {
  const std::vector<double> logits = {-2, 0, 3};
  const double conf_err = std::abs(transition_confidence(logits) - 1.0 / (1.0 + std::exp(-3.0)));

  std::vector<TypedPrediction> preds;
  const std::pair<TransitionType, int> composition[] = {{TransitionType::CutIn, 24},
                                                        {TransitionType::CutOut, 26},
                                                        {TransitionType::ShotReverseShot, 25},
                                                        {TransitionType::MultiAngle, 15}};
  for (auto [type, n] : composition) {
    for (int i = 0; i < n; ++i) preds.push_back({"", PredictedType::CutIn, type});
  }
  const double acc_err = std::abs(type_accuracy(preds) - 24.0 / 90.0);

  const double h = std::sqrt(0.5);
  FeatureSet fa(2, 1), fb(2, 1);
  fa << -h, h;          // mean 0, unbiased variance 1
  fb << 1 - h, 1 + h;   // mean 1, unbiased variance 1
  const double fd_err = std::abs(frechet_distance(fa, fb) - 1.0);
  Rng rng(12);
  FeatureSet many(64, 5);
  for (Eigen::Index i = 0; i < many.size(); ++i) many.data()[i] = rng.normal();
  const double fd_same = frechet_distance(many, many);

  const bool ok = conf_err < 1e-9 && acc_err < 1e-12 && fd_err < 1e-9 && fd_same < 1e-9;
  return {ok, "confidence err " + fmt(conf_err) + ", accuracy err " + fmt(acc_err) + ", 1-D Frechet err " +
                  fmt(fd_err) + ", identical-set distance " + fmt(fd_same)};
}

Outcome determinism() {
  ::unsetenv(kConfigEnvVar);
  testing::CliInputs in;
  const std::vector<std::vector<std::string>> commands = {
      {"plucker", "--trajectory", in.trajectory, "--grid", "4x4", "--out", in.dir.file("p.bin")},
      {"mask", "--layout", in.layout, "--pgm", in.dir.file("m.pgm"), "--blocks", in.dir.file("m.json")},
      {"curate", "--records", in.records, "--out", in.dir.file("c.jsonl"), "--summary", in.dir.file("c.json")},
      {"metrics", "confidence", "--input", in.logits},
      {"metrics", "types", "--input", in.predictions},
      {"metrics", "consistency", "--input", in.consistency},
      {"metrics", "fvd", "--a", in.features_a, "--b", in.features_b},
      {"--set", "d_model=16", "--set", "n_heads=2", "demo-forward", "--layout", in.layout, "--trajectory",
       in.trajectory, "--out", in.dir.file("d.json"), "--tensor-out", in.dir.file("d.bin"), "--seed", "9"},
      {"gradcheck", "--seed", "1"},
  };
  std::size_t differ = 0, failed = 0;
  for (const auto& cmd : commands) {
    auto snapshot = [&] {
      const auto r = testing::invoke(cmd);
      failed += r.code != kExitOk;
      std::map<std::string, std::string> files;
      for (const auto& e : std::filesystem::directory_iterator(in.dir.path())) {
        files[e.path().filename().string()] = read_file(e.path());
      }
      return std::pair{r.out, files};
    };
    differ += snapshot() != snapshot();
  }

  Rng rng(13);
  std::size_t roundtrip_bad = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<double> td({3, 1 + rng.below(5)});
    for (auto& v : td.values()) v = rng.normal() * std::pow(10.0, rng.uniform(-20, 20));
    Tensor<float> tf({1 + rng.below(7)});
    for (auto& v : tf.values()) v = static_cast<float>(rng.normal());
    const std::string bytes = encode_tensors({td, tf});
    const auto back = decode_tensors(bytes);
    const auto& bd = std::get<Tensor<double>>(back[0]);
    roundtrip_bad += std::memcmp(bd.values().data(), td.values().data(), td.size() * sizeof(double)) != 0;
    roundtrip_bad += !(std::get<Tensor<float>>(back[1]) == tf) || encode_tensors(back) != bytes;

    const LayoutFile lf{testing::random_layout(rng, 64), rng.below(3)};
    roundtrip_bad += !(layout_from_json(Json::parse(layout_to_json(lf).dump())) == lf);

    Trajectory traj;
    for (std::size_t f = 0; f < 4; ++f) traj.push_back(testing::random_pose(rng, f));
    roundtrip_bad += !(trajectory_from_json(Json::parse(trajectory_to_json(traj).dump())) == traj);
  }
  const bool ok = differ == 0 && failed == 0 && roundtrip_bad == 0;
  return {ok, std::to_string(commands.size()) + " subcommands run twice: " + std::to_string(differ) +
                  " differ, " + std::to_string(failed) + " failed; 20 x {tensor, layout, trajectory} round-trips: " +
                  std::to_string(roundtrip_bad) + " inexact"};
}

}  // namespace

int main() {
  const auto start = Clock::now();
  criterion("plucker_geometry", 1.0, plucker_geometry);
  criterion("mask_oracle_equivalence", 5.0, mask_oracle);
  criterion("leakage_structural_zero", 5.0, leakage);
  criterion("gradient_checks", 30.0, gradient_checks);
  criterion("zero_init_contract", 0, zero_init);
  criterion("ablation_equivalences", 0, ablations);
  criterion("curation_thresholds", 1.0, curation_thresholds);
  criterion("mixing_sampler", 0, mixing_sampler);
  criterion("metrics_closed_forms", 1.0, metrics_closed_forms);
  criterion("determinism", 0, determinism);

  // Full suite: the unit test binary plus everything above.
  criterion("suite_wall_time", 0, [&] {
    const auto t0 = Clock::now();
    const std::string cmd = std::string("\"") + SHOTDIRECTOR_UNIT_TESTS + "\" > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    const double units = seconds_since(t0);
    const double total = seconds_since(start);
    return Outcome{status == 0 && total < 120.0, "unit tests " + fmt(units) + " s (" +
                                                     (status == 0 ? "passed" : "FAILED") + ") + acceptance " +
                                                     fmt(total - units) + " s = " + fmt(total) + " s (limit 120 s)"};
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
