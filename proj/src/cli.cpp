#include "shotdirector/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"

#include "shotdirector/block.hpp"
#include "shotdirector/config.hpp"
#include "shotdirector/errors.hpp"
#include "shotdirector/file_util.hpp"
#include "shotdirector/json_io.hpp"
#include "shotdirector/metrics.hpp"
#include "shotdirector/tensor_io.hpp"
#include "shotdirector/training.hpp"

namespace shotdirector {

namespace {

Json parse_json_file(const std::string& path) {
  const std::string body = read_file(path);
  try {
    return Json::parse(body);
  } catch (const Json::parse_error& e) {
    throw LoadError(path + ": invalid JSON (" + e.what() + ")");
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::pair<std::size_t, std::size_t> parse_grid(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t used_h = 0, used_w = 0;
    const auto h = std::stoul(s.substr(0, x), &used_h);
    const auto w = std::stoul(s.substr(x + 1), &used_w);
    if (used_h != x || used_w != s.size() - x - 1 || h == 0 || w == 0) throw std::invalid_argument(s);
    return {h, w};
  } catch (const std::exception&) {
    throw DomainError("--grid expects HxW with positive integers, got '" + s + "'");
  }
}

/// Groups trajectory poses by shot frame range, relative to the first pose.
ShotCameras cameras_for_layout(const TokenLayout& layout, Trajectory traj) {
  if (traj.empty()) throw DomainError("trajectory has no frames");
  std::sort(traj.begin(), traj.end(), [](const CameraPose& a, const CameraPose& b) { return a.frame_index < b.frame_index; });
  const CameraExtrinsics reference = traj.front().extrinsics;
  ShotCameras cameras(layout.shots.size());
  for (const auto& pose : traj) {
    bool placed = false;
    for (std::size_t s = 0; s < layout.shots.size(); ++s) {
      if (layout.shots[s].frames.contains(pose.frame_index)) {
        cameras[s].push_back({pose.intrinsics, relative_pose(reference, pose.extrinsics), pose.frame_index});
        placed = true;
      }
    }
    if (!placed) {
      throw DomainError("trajectory frame_index " + std::to_string(pose.frame_index) + " is outside the layout's " +
                        std::to_string(layout.frames) + " frames");
    }
  }
  for (std::size_t s = 0; s < layout.shots.size(); ++s) {
    const auto& shot = layout.shots[s];
    if (cameras[s].size() == 1) continue;
    if (cameras[s].size() != shot.frames.size()) {
      throw DomainError("shot " + std::to_string(shot.shot_id) + " has " + std::to_string(cameras[s].size()) +
                        " poses; expected 1 or " + std::to_string(shot.frames.size()));
    }
  }
  return cameras;
}

Json mask_stats_to_json(const MaskStats& s) {
  Json j;
  j["n"] = s.n;
  j["visible_pairs"] = s.visible_pairs;
  j["density"] = s.density;
  Json blocks = Json::object();
  for (const auto& [key, density] : s.block_density) {
    blocks[std::string(to_string(key.first)) + "->" + to_string(key.second)] = density;
  }
  j["block_density"] = std::move(blocks);
  return j;
}

Json config_to_json(const ToolConfig& c) {
  Json j;
  j["d_model"] = c.d_model;
  j["n_heads"] = c.n_heads;
  j["layers"] = c.layers;
  j["full_visibility_layers"] = c.full_visibility_layers;
  j["conv_kernel"] = c.conv_kernel;
  j["conv_extra_layers"] = c.conv_extra_layers;
  j["mlp_hidden"] = c.mlp_hidden;
  j["seed"] = c.seed;
  j["use_mask"] = c.use_mask;
  j["use_extrinsic_branch"] = c.use_extrinsic_branch;
  j["use_plucker_branch"] = c.use_plucker_branch;
  j["residual_rmsnorm"] = c.residual_rmsnorm;
  j["center_sampling"] = c.center_sampling;
  return j;
}

std::vector<double> double_array(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_array()) throw LoadError(where + ": '" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : *it) {
    if (!v.is_number()) throw LoadError(where + ": '" + key + "' must contain only numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

FeatureSet load_features(const std::string& path) {
  const auto tensors = load_tensors(path);
  if (tensors.size() != 1) throw LoadError(path + ": expected exactly one tensor, found " + std::to_string(tensors.size()));
  const Tensor<double> t = as_double(tensors.front());
  if (t.rank() != 2) throw LoadError(path + ": feature tensor must be [n, dim], got " + shape_to_string(t.shape()));
  FeatureSet f(static_cast<Eigen::Index>(t.extent(0)), static_cast<Eigen::Index>(t.extent(1)));
  std::copy(t.values().begin(), t.values().end(), f.data());
  return f;
}

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  bool json_errors = false;
};

ToolConfig resolve_config(const Options& opt) {
  ToolConfig config;
  std::string path = opt.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv(kConfigEnvVar); env && *env) path = env;
  }
  if (!path.empty()) config = config_from_text(read_file(path));
  for (const auto& kv : opt.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw LoadError("--set expects key=value, got '" + kv + "'");
    apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opt.seed) config.seed = *opt.seed;
  config.validate();
  return config;
}

void write_error(std::ostream& err, bool json, const char* kind, const std::string& message) {
  if (json) {
    Json j;
    j["error"] = {{"kind", kind}, {"message", message}};
    err << j.dump() << "\n";
  } else {
    err << "error: " << message << "\n";
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Camera-conditioned multi-shot toolkit: Plücker maps, shot-aware masks, curation and metrics"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config_path, std::string("Config file (key = value); default from $") + kConfigEnvVar);
  app.add_option("--set", opt.overrides, "Override a config key: --set key=value (repeatable)");
  app.add_flag("--json-errors", opt.json_errors, "Report errors as a JSON object on stderr");

  // plucker
  auto* plucker = app.add_subcommand("plucker", "Write one Plücker map per trajectory frame");
  std::string trajectory_path, grid = "", out_path;
  bool center = false;
  plucker->add_option("--trajectory", trajectory_path, "Camera trajectory JSON")->required();
  plucker->add_option("--grid", grid, "Grid size HxW")->required();
  plucker->add_option("--out", out_path, "Output tensor file")->required();
  plucker->add_flag("--center", center, "Sample cell centers instead of top-left corners");

  // mask
  auto* mask = app.add_subcommand("mask", "Build the shot-aware mask for a layout");
  std::string layout_path, pgm_path, blocks_path;
  std::optional<std::size_t> layer;
  mask->add_option("--layout", layout_path, "Layout JSON")->required();
  mask->add_option("--layer", layer, "Apply the early-layer schedule for this layer index");
  mask->add_option("--pgm", pgm_path, "Write the mask as a PGM image");
  mask->add_option("--blocks", blocks_path, "Write the block-descriptor JSON");

  // curate
  auto* curate = app.add_subcommand("curate", "Filter clip records and summarize the kept set");
  std::string records_path, thresholds_arg = "default", summary_path;
  curate->add_option("--records", records_path, "Clip records, line-delimited JSON")->required();
  curate->add_option("--thresholds", thresholds_arg, "'default' or a key = value thresholds file");
  curate->add_option("--out", out_path, "FilterReport lines (default stdout)");
  curate->add_option("--summary", summary_path, "Summary JSON (default stdout)");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Evaluation metrics");
  metrics->require_subcommand(1);
  std::string input_path, fvd_a, fvd_b;
  auto* confidence = metrics->add_subcommand("confidence", "Transition confidence per logit sequence");
  confidence->add_option("--input", input_path, "JSONL: {\"id\", \"logits\": [...]} per line")->required();
  auto* types = metrics->add_subcommand("types", "Transition type accuracy and distribution");
  types->add_option("--input", input_path, "JSONL: {\"clip_id\", \"predicted\", \"ground_truth\"} per line")->required();
  auto* consistency = metrics->add_subcommand("consistency", "Cross-shot semantic and visual consistency");
  consistency->add_option("--input", input_path,
                          "JSONL: {\"id\", \"semantic_a\", \"semantic_b\", \"subject_sims\", \"background_sims\"}")
      ->required();
  auto* fvd = metrics->add_subcommand("fvd", "Fréchet distance between two feature tensors");
  fvd->add_option("--a", fvd_a, "Feature tensor file [n, dim]")->required();
  fvd->add_option("--b", fvd_b, "Feature tensor file [n, dim]")->required();

  // demo-forward
  auto* demo = app.add_subcommand("demo-forward", "Run the toy conditioned block on synthetic tokens");
  std::string tensor_out;
  demo->add_option("--layout", layout_path, "Layout JSON")->required();
  demo->add_option("--trajectory", trajectory_path, "Camera trajectory JSON")->required();
  demo->add_option("--out", out_path, "Results JSON")->required();
  demo->add_option("--tensor-out", tensor_out, "Also write the output tensor in binary form");
  demo->add_option("--seed", opt.seed, "Seed override");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradients");
  std::size_t seed_count = 1;
  double threshold = 1e-4;
  bool residual = false;
  gradcheck->add_option("--seed", opt.seed, "First seed (default: config seed)");
  gradcheck->add_option("--seeds", seed_count, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  gradcheck->add_option("--threshold", threshold, "Maximum allowed relative error");
  gradcheck->add_flag("--residual", residual, "Use the residual + RMS-norm block variant");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    write_error(err, opt.json_errors, "usage", e.what());
    if (!opt.json_errors) err << app.help();
    return kExitInvalid;
  }

  try {
    if (*plucker) {
      const auto [h, w] = parse_grid(grid);
      const auto traj = trajectory_from_json(parse_json_file(trajectory_path));
      std::vector<AnyTensor> maps;
      for (const auto& pose : traj) {
        const auto map = plucker_map(pose, h, w, center ? PixelSampling::Center : PixelSampling::TopLeft);
        std::vector<double> data;
        data.reserve(map.cells.size() * 6);
        for (const auto& c : map.cells) data.insert(data.end(), c.begin(), c.end());
        maps.emplace_back(Tensor<double>({h, w, 6}, std::move(data)));
      }
      save_tensors(out_path, maps);
      Json summary;
      summary["frames"] = traj.size();
      summary["grid"] = {h, w};
      summary["out"] = out_path;
      out << dump(summary);
    } else if (*mask) {
      const auto file = layout_from_json(parse_json_file(layout_path));
      AttentionMask m = build_mask(file.layout);
      if (layer) m = mask_for_layer(m, *layer, file.full_visibility_layers);
      Json result = mask_stats_to_json(mask_stats(m, file.layout));
      const std::string pgm = pgm_path.empty() ? std::string() : mask_to_pgm(m);
      const std::string blocks =
          blocks_path.empty() ? std::string()
                              : dump(mask_blocks_to_json(file.layout.total_tokens(), mask_blocks(file.layout)));
      if (!pgm_path.empty()) write_file_atomic(pgm_path, pgm);
      if (!blocks_path.empty()) write_file_atomic(blocks_path, blocks);
      out << dump(result);
    } else if (*curate) {
      CurationThresholds thresholds;
      if (thresholds_arg != "default") thresholds = thresholds_from_text(read_file(thresholds_arg));
      const auto lines = parse_jsonl(read_file(records_path));
      std::string reports;
      std::vector<ClipRecord> kept;
      std::vector<HierarchicalCaption> kept_captions;
      bool all_captioned = true;
      std::size_t lineno = 0;
      for (const auto& obj : lines) {
        ++lineno;
        RecordLine rec;
        try {
          rec = record_from_json(obj);
        } catch (const LoadError& e) {
          throw LoadError("record #" + std::to_string(lineno) + ": " + e.what());
        }
        const auto report = apply_filters(rec.record, rec.caption, thresholds);
        reports += report_to_json(report).dump() + "\n";
        if (report.verdict == Verdict::Keep) {
          kept.push_back(rec.record);
          if (rec.caption) kept_captions.push_back(*rec.caption);
          else all_captioned = false;
        }
      }
      Json summary;
      summary["records"] = lines.size();
      summary["kept"] = kept.size();
      summary["dropped"] = lines.size() - kept.size();
      summary["thresholds"] = thresholds_to_json(thresholds);
      if (!kept.empty()) {
        summary["stats"] = stats_to_json(dataset_stats(kept, all_captioned ? &kept_captions : nullptr));
      } else {
        summary["stats"] = nullptr;
      }
      if (!out_path.empty()) write_file_atomic(out_path, reports);
      if (!summary_path.empty()) write_file_atomic(summary_path, dump(summary));
      if (out_path.empty()) out << reports;
      if (summary_path.empty()) out << dump(summary);
    } else if (*confidence) {
      Json result;
      Json scores = Json::array();
      double sum = 0.0;
      std::size_t i = 0;
      for (const auto& obj : parse_jsonl(read_file(input_path))) {
        const std::string where = "confidence line " + std::to_string(++i);
        const auto logits = double_array(obj, "logits", where);
        const double score = transition_confidence(logits);
        sum += score;
        Json entry;
        entry["id"] = obj.contains("id") ? obj["id"] : Json(i - 1);
        entry["score"] = score;
        scores.push_back(std::move(entry));
      }
      if (scores.empty()) throw DomainError("confidence: no logit sequences");
      result["scores"] = std::move(scores);
      result["mean"] = sum / static_cast<double>(i);
      out << dump(result);
    } else if (*types) {
      std::vector<TypedPrediction> preds;
      for (const auto& obj : parse_jsonl(read_file(input_path))) preds.push_back(prediction_from_json(obj));
      const auto dist = type_distribution(preds);
      Json result;
      result["n"] = preds.size();
      result["accuracy"] = type_accuracy(preds);
      Json d = Json::object();
      for (auto t : kPredictedTypes) d[to_string(t)] = dist[static_cast<std::size_t>(t)];
      result["distribution"] = std::move(d);
      out << dump(result);
    } else if (*consistency) {
      Json per = Json::array();
      double sem = 0.0, vis = 0.0;
      std::size_t i = 0;
      for (const auto& obj : parse_jsonl(read_file(input_path))) {
        const std::string where = "consistency line " + std::to_string(++i);
        const auto s = consistency_scores(double_array(obj, "semantic_a", where), double_array(obj, "semantic_b", where),
                                          double_array(obj, "subject_sims", where),
                                          double_array(obj, "background_sims", where));
        sem += s.semantic;
        vis += s.visual;
        Json entry;
        entry["id"] = obj.contains("id") ? obj["id"] : Json(i - 1);
        entry["semantic"] = s.semantic;
        entry["visual"] = s.visual;
        per.push_back(std::move(entry));
      }
      if (per.empty()) throw DomainError("consistency: no entries");
      Json result;
      result["videos"] = std::move(per);
      result["mean_semantic"] = sem / static_cast<double>(i);
      result["mean_visual"] = vis / static_cast<double>(i);
      out << dump(result);
    } else if (*fvd) {
      const FeatureSet a = load_features(fvd_a);
      const FeatureSet b = load_features(fvd_b);
      Json result;
      result["n_a"] = a.rows();
      result["n_b"] = b.rows();
      result["dim"] = a.cols();
      result["frechet_distance"] = frechet_distance(a, b);
      out << dump(result);
    } else if (*demo) {
      const ToolConfig config = resolve_config(opt);
      const auto file = layout_from_json(parse_json_file(layout_path));
      const auto traj = trajectory_from_json(parse_json_file(trajectory_path));
      BlockConfig block = config.block_config();
      block.full_visibility_layers = file.full_visibility_layers;
      block.validate();
      const auto& layout = file.layout;

      Rng seeds(config.seed);
      const auto model = ToyModel<float>::init(config.d_model, config.n_heads, config.layers, config.mlp_hidden,
                                               config.conv_kernel, config.conv_extra_layers, seeds.next_u64());
      BlockInputs<float> inputs;
      inputs.visual = random_tensor<float>({layout.visual_tokens(), config.d_model}, seeds.next_u64());
      inputs.text = random_tensor<float>({layout.text_tokens(), config.d_model}, seeds.next_u64());
      inputs.cameras = cameras_for_layout(layout, traj);
      const Tensor<float> output = block_forward(model, block, layout, inputs);

      Json result;
      result["config"] = config_to_json(config);
      result["config"]["full_visibility_layers"] = block.full_visibility_layers;
      Json densities = Json::array();
      for (const auto& m : layer_masks(block, layout)) densities.push_back(mask_stats(m, layout).density);
      result["mask_density"] = std::move(densities);
      result["shape"] = output.shape();
      result["output"] = output.values();
      const std::string body = dump(result);
      const std::string bin = tensor_out.empty() ? std::string() : encode_tensors({output});
      write_file_atomic(out_path, body);
      if (!tensor_out.empty()) write_file_atomic(tensor_out, bin);
    } else if (*gradcheck) {
      const ToolConfig config = resolve_config(opt);
      std::map<std::string, GradcheckEntry> worst;
      std::vector<std::string> order;
      double max_err = 0.0;
      Json per_seed = Json::array();
      for (std::size_t s = 0; s < seed_count; ++s) {
        const std::uint64_t seed = config.seed + s;
        const auto report = gradcheck_random(seed, residual || config.residual_rmsnorm);
        per_seed.push_back({{"seed", seed}, {"max_rel_error", report.max_rel_error}});
        max_err = std::max(max_err, report.max_rel_error);
        for (const auto& e : report.entries) {
          auto [it, inserted] = worst.emplace(e.name, e);
          if (inserted) order.push_back(e.name);
          else it->second.max_rel_error = std::max(it->second.max_rel_error, e.max_rel_error);
        }
      }
      Json tensors = Json::array();
      for (const auto& name : order) {
        const auto& e = worst.at(name);
        tensors.push_back({{"name", e.name}, {"count", e.count}, {"max_rel_error", e.max_rel_error}});
      }
      Json result;
      result["threshold"] = threshold;
      result["max_rel_error"] = max_err;
      result["pass"] = max_err < threshold;
      result["seeds"] = std::move(per_seed);
      result["tensors"] = std::move(tensors);
      out << dump(result);
      if (!(max_err < threshold)) {
        write_error(err, opt.json_errors, "gradcheck", "max relative gradient error exceeds threshold");
        return kExitInvalid;
      }
    }
  } catch (const IoError& e) {
    write_error(err, opt.json_errors, "io", e.what());
    return kExitIo;
  } catch (const LoadError& e) {
    write_error(err, opt.json_errors, "load", e.what());
    return kExitInvalid;
  } catch (const DomainError& e) {
    write_error(err, opt.json_errors, "domain", e.what());
    return kExitInvalid;
  } catch (const std::exception& e) {
    write_error(err, opt.json_errors, "runtime", e.what());
    return kExitInvalid;
  }
  return kExitOk;
}

}  // namespace shotdirector
