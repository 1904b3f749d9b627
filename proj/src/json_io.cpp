#include "shotdirector/json_io.hpp"

#include <sstream>

#include "shotdirector/errors.hpp"

namespace shotdirector {

namespace {

const Json& member(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw LoadError(where + ": expected a JSON object");
  auto it = obj.find(key);
  if (it == obj.end()) throw LoadError(where + ": missing field '" + key + "'");
  return *it;
}

double number(const Json& obj, const char* key, const std::string& where) {
  const Json& v = member(obj, key, where);
  if (!v.is_number()) throw LoadError(where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

long long integer(const Json& obj, const char* key, const std::string& where) {
  const Json& v = member(obj, key, where);
  if (!v.is_number_integer()) throw LoadError(where + ": field '" + key + "' must be an integer");
  return v.get<long long>();
}

std::size_t count(const Json& obj, const char* key, const std::string& where) {
  const long long v = integer(obj, key, where);
  if (v < 0) throw LoadError(where + ": field '" + key + "' must be nonnegative");
  return static_cast<std::size_t>(v);
}

std::string text(const Json& obj, const char* key, const std::string& where) {
  const Json& v = member(obj, key, where);
  if (!v.is_string()) throw LoadError(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

bool boolean(const Json& obj, const char* key, const std::string& where) {
  const Json& v = member(obj, key, where);
  if (!v.is_boolean()) throw LoadError(where + ": field '" + key + "' must be a boolean");
  return v.get<bool>();
}

std::vector<double> numbers(const Json& obj, const char* key, std::size_t expected, const std::string& where) {
  const Json& v = member(obj, key, where);
  if (!v.is_array() || v.size() != expected) {
    throw LoadError(where + ": field '" + key + "' must be an array of " + std::to_string(expected) + " numbers");
  }
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw LoadError(where + ": field '" + key + "' must contain only numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- trajectory

Trajectory trajectory_from_json(const Json& doc) {
  const Json& frames = member(doc, "frames", "trajectory");
  if (!frames.is_array()) throw LoadError("trajectory: 'frames' must be an array");
  Trajectory out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Json& f = frames[i];
    std::string where = "trajectory frame #" + std::to_string(i);
    const std::size_t frame_index = count(f, "frame_index", where);
    where += " (frame_index " + std::to_string(frame_index) + ")";
    const auto r = numbers(f, "rotation", 9, where);
    const auto t = numbers(f, "translation", 3, where);
    Mat3 rot;
    rot << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
    try {
      CameraIntrinsics k(number(f, "fx", where), number(f, "fy", where), number(f, "cx", where),
                         number(f, "cy", where), static_cast<int>(integer(f, "width", where)),
                         static_cast<int>(integer(f, "height", where)));
      out.push_back({k, CameraExtrinsics(rot, Vec3(t[0], t[1], t[2])), frame_index});
    } catch (const DomainError& e) {
      throw LoadError(where + ": " + e.what());
    }
  }
  try {
    check_unique_frames(out);
  } catch (const DomainError& e) {
    throw LoadError(e.what());
  }
  return out;
}

Json trajectory_to_json(const Trajectory& trajectory) {
  Json frames = Json::array();
  for (const auto& p : trajectory) {
    const auto& k = p.intrinsics;
    const auto& r = p.extrinsics.rotation();
    const auto& t = p.extrinsics.translation();
    Json f;
    f["frame_index"] = p.frame_index;
    f["fx"] = k.fx();
    f["fy"] = k.fy();
    f["cx"] = k.cx();
    f["cy"] = k.cy();
    f["width"] = k.width();
    f["height"] = k.height();
    f["rotation"] = {r(0, 0), r(0, 1), r(0, 2), r(1, 0), r(1, 1), r(1, 2), r(2, 0), r(2, 1), r(2, 2)};
    f["translation"] = {t(0), t(1), t(2)};
    frames.push_back(std::move(f));
  }
  Json doc;
  doc["frames"] = std::move(frames);
  return doc;
}

// -------------------------------------------------------------------- layout

LayoutFile layout_from_json(const Json& doc) {
  const std::string where = "layout";
  LayoutFile out;
  auto& l = out.layout;
  l.frames = count(doc, "frames", where);
  l.patch_h = count(doc, "patch_h", where);
  l.patch_w = count(doc, "patch_w", where);
  l.global_text = {count(doc, "global_text_start", where), count(doc, "global_text_end", where)};
  out.full_visibility_layers = count(doc, "full_visibility_layers", where);
  const Json& shots = member(doc, "shots", where);
  if (!shots.is_array()) throw LoadError("layout: 'shots' must be an array");
  for (std::size_t i = 0; i < shots.size(); ++i) {
    const std::string sw = "layout shot #" + std::to_string(i);
    ShotSpec s;
    s.shot_id = static_cast<int>(integer(shots[i], "shot_id", sw));
    s.frames = {count(shots[i], "frame_start", sw), count(shots[i], "frame_end", sw)};
    s.local_text = {count(shots[i], "local_text_start", sw), count(shots[i], "local_text_end", sw)};
    l.shots.push_back(s);
  }
  try {
    l.validate();
  } catch (const DomainError& e) {
    throw LoadError(e.what());
  }
  return out;
}

Json layout_to_json(const LayoutFile& file) {
  const auto& l = file.layout;
  Json doc;
  doc["frames"] = l.frames;
  doc["patch_h"] = l.patch_h;
  doc["patch_w"] = l.patch_w;
  Json shots = Json::array();
  for (const auto& s : l.shots) {
    Json j;
    j["shot_id"] = s.shot_id;
    j["frame_start"] = s.frames.start;
    j["frame_end"] = s.frames.end;
    j["local_text_start"] = s.local_text.start;
    j["local_text_end"] = s.local_text.end;
    shots.push_back(std::move(j));
  }
  doc["shots"] = std::move(shots);
  doc["global_text_start"] = l.global_text.start;
  doc["global_text_end"] = l.global_text.end;
  doc["full_visibility_layers"] = file.full_visibility_layers;
  return doc;
}

Json mask_blocks_to_json(std::size_t n, const std::vector<MaskBlock>& blocks) {
  Json doc;
  doc["n"] = n;
  Json arr = Json::array();
  for (const auto& b : blocks) {
    Json j;
    j["rule"] = b.rule;
    j["q"] = {b.q.start, b.q.end};
    j["k"] = {b.k.start, b.k.end};
    arr.push_back(std::move(j));
  }
  doc["blocks"] = std::move(arr);
  return doc;
}

std::vector<MaskBlock> mask_blocks_from_json(const Json& doc, std::size_t* n) {
  if (n) *n = count(doc, "n", "mask blocks");
  const Json& arr = member(doc, "blocks", "mask blocks");
  if (!arr.is_array()) throw LoadError("mask blocks: 'blocks' must be an array");
  std::vector<MaskBlock> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = "mask block #" + std::to_string(i);
    auto q = numbers(arr[i], "q", 2, where);
    auto k = numbers(arr[i], "k", 2, where);
    out.push_back({{static_cast<std::size_t>(q[0]), static_cast<std::size_t>(q[1])},
                   {static_cast<std::size_t>(k[0]), static_cast<std::size_t>(k[1])},
                   text(arr[i], "rule", where)});
  }
  return out;
}

// ------------------------------------------------------------------ curation

HierarchicalCaption caption_from_json(const Json& obj) {
  const std::string where = "caption";
  HierarchicalCaption c;
  c.subject = text(obj, "subject", where);
  c.overall = text(obj, "overall", where);
  c.transition_type = text(obj, "transition_type", where);
  c.transition_description = text(obj, "transition_description", where);
  const Json& shots = member(obj, "shots", where);
  if (!shots.is_array()) throw LoadError("caption: 'shots' must be an array");
  for (std::size_t i = 0; i < shots.size(); ++i) {
    const std::string sw = "caption shot #" + std::to_string(i);
    c.shots.push_back({text(shots[i], "content", sw), text(shots[i], "cinematography", sw)});
  }
  return c;
}

Json caption_to_json(const HierarchicalCaption& c) {
  Json j;
  j["subject"] = c.subject;
  j["overall"] = c.overall;
  Json shots = Json::array();
  for (const auto& s : c.shots) shots.push_back({{"content", s.content}, {"cinematography", s.cinematography}});
  j["shots"] = std::move(shots);
  j["transition_type"] = c.transition_type;
  j["transition_description"] = c.transition_description;
  return j;
}

RecordLine record_from_json(const Json& obj) {
  std::string where = "record";
  RecordLine line;
  auto& r = line.record;
  r.clip_id = text(obj, "clip_id", where);
  where += " " + r.clip_id;
  r.duration_seconds = number(obj, "duration_seconds", where);
  r.fps = number(obj, "fps", where);
  r.width = static_cast<int>(integer(obj, "width", where));
  r.height = static_cast<int>(integer(obj, "height", where));
  r.shot_count = static_cast<int>(integer(obj, "shot_count", where));
  r.aesthetic_score = number(obj, "aesthetic_score", where);
  r.boundary_aesthetic_score = number(obj, "boundary_aesthetic_score", where);
  r.first_last_frame_similarity = number(obj, "first_last_frame_similarity", where);
  r.stitch_similarity = number(obj, "stitch_similarity", where);
  r.clip_pair_similarity = number(obj, "clip_pair_similarity", where);
  r.vlm_coherence_pass = boolean(obj, "vlm_coherence_pass", where);
  const std::string tag = text(obj, "source_tag", where);
  if (tag == "real") {
    r.source_tag = SourceTag::Real;
  } else if (tag == "synthetic") {
    r.source_tag = SourceTag::Synthetic;
  } else {
    throw LoadError(where + ": source_tag must be 'real' or 'synthetic'");
  }
  try {
    r.validate();
  } catch (const DomainError& e) {
    throw LoadError(e.what());
  }
  if (auto it = obj.find("caption"); it != obj.end() && !it->is_null()) line.caption = caption_from_json(*it);
  return line;
}

Json record_to_json(const RecordLine& line) {
  const auto& r = line.record;
  Json j;
  j["clip_id"] = r.clip_id;
  j["duration_seconds"] = r.duration_seconds;
  j["fps"] = r.fps;
  j["width"] = r.width;
  j["height"] = r.height;
  j["shot_count"] = r.shot_count;
  j["aesthetic_score"] = r.aesthetic_score;
  j["boundary_aesthetic_score"] = r.boundary_aesthetic_score;
  j["first_last_frame_similarity"] = r.first_last_frame_similarity;
  j["stitch_similarity"] = r.stitch_similarity;
  j["clip_pair_similarity"] = r.clip_pair_similarity;
  j["vlm_coherence_pass"] = r.vlm_coherence_pass;
  j["source_tag"] = to_string(r.source_tag);
  if (line.caption) j["caption"] = caption_to_json(*line.caption);
  return j;
}

Json report_to_json(const FilterReport& report) {
  Json j;
  j["clip_id"] = report.clip_id;
  j["verdict"] = report.verdict == Verdict::Keep ? "keep" : "drop";
  Json failed = Json::array();
  for (const auto& f : report.failed_rules) {
    Json fr;
    fr["rule"] = f.rule;
    fr["measured"] = f.measured;
    fr["threshold"] = f.threshold;
    if (!f.detail.empty()) fr["detail"] = f.detail;
    failed.push_back(std::move(fr));
  }
  j["failed_rules"] = std::move(failed);
  return j;
}

namespace {

Json summary_to_json(const Summary& s) {
  Json j;
  j["mean"] = s.mean;
  j["min"] = s.min;
  j["max"] = s.max;
  j["histogram"] = {{"edges", s.histogram.edges},
                    {"counts", s.histogram.counts},
                    {"below", s.histogram.below},
                    {"above", s.histogram.above}};
  return j;
}

}  // namespace

Json stats_to_json(const DatasetStats& stats) {
  Json j;
  j["count"] = stats.count;
  j["duration_seconds"] = summary_to_json(stats.duration);
  j["aesthetic_score"] = summary_to_json(stats.aesthetic);
  j["clip_pair_similarity"] = summary_to_json(stats.pair_similarity);
  if (!stats.transition_types.empty()) {
    Json t;
    for (auto type : kTransitionTypes) t[to_string(type)] = stats.transition_types.at(to_string(type));
    j["transition_types"] = std::move(t);
  }
  return j;
}

Json thresholds_to_json(const CurationThresholds& t) {
  Json j;
  j["segmentation"] = t.segmentation;
  j["first_last_similarity_min"] = t.first_last_similarity_min;
  j["stitching_min"] = t.stitching_min;
  j["pair_similarity_max"] = t.pair_similarity_max;
  j["duration_min"] = t.duration_min;
  j["duration_max"] = t.duration_max;
  j["required_shot_count"] = t.required_shot_count;
  j["aesthetic_min"] = t.aesthetic_min;
  j["boundary_aesthetic_min"] = t.boundary_aesthetic_min;
  j["aesthetic_scale_max"] = t.aesthetic_scale_max;
  return j;
}

std::vector<Json> parse_jsonl(const std::string& body) {
  std::vector<Json> out;
  std::istringstream in(body);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw LoadError("line " + std::to_string(lineno) + ": invalid JSON (" + e.what() + ")");
    }
  }
  return out;
}

TypedPrediction prediction_from_json(const Json& obj) {
  const std::string where = "prediction";
  TypedPrediction p;
  p.clip_id = text(obj, "clip_id", where);
  const std::string pred = text(obj, "predicted", where);
  const std::string gt = text(obj, "ground_truth", where);
  auto pt = parse_predicted_type(pred);
  if (!pt) throw LoadError(where + " " + p.clip_id + ": unknown predicted type '" + pred + "'");
  auto gtt = parse_transition_type(gt);
  if (!gtt) {
    throw LoadError(where + " " + p.clip_id + ": ground_truth '" + gt +
                    "' must be one of shot_reverse_shot, cut_in, cut_out, multi_angle");
  }
  p.predicted = *pt;
  p.ground_truth = *gtt;
  return p;
}

}  // namespace shotdirector
