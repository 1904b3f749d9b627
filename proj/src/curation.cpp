#include "shotdirector/curation.hpp"

#include <algorithm>
#include <cmath>

#include "shotdirector/errors.hpp"

namespace shotdirector {

const char* to_string(TransitionType t) {
  switch (t) {
    case TransitionType::ShotReverseShot: return "shot_reverse_shot";
    case TransitionType::CutIn: return "cut_in";
    case TransitionType::CutOut: return "cut_out";
    case TransitionType::MultiAngle: return "multi_angle";
  }
  return "?";
}

std::optional<TransitionType> parse_transition_type(const std::string& s) {
  for (auto t : kTransitionTypes) {
    if (s == to_string(t)) return t;
  }
  return std::nullopt;
}

const char* to_string(SourceTag s) { return s == SourceTag::Real ? "real" : "synthetic"; }

namespace {

void check_unit(double v, const char* field) {
  if (!(v >= 0.0 && v <= 1.0)) throw DomainError(std::string("record: ") + field + " must be in [0, 1]");
}

}  // namespace

void ClipRecord::validate() const {
  if (clip_id.empty()) throw DomainError("record: clip_id is empty");
  if (!(duration_seconds > 0.0) || !std::isfinite(duration_seconds)) {
    throw DomainError("record " + clip_id + ": duration_seconds must be positive");
  }
  if (!(fps > 0.0) || !std::isfinite(fps)) throw DomainError("record " + clip_id + ": fps must be positive");
  if (width < 1 || height < 1) throw DomainError("record " + clip_id + ": resolution must be at least 1x1");
  if (shot_count < 1) throw DomainError("record " + clip_id + ": shot_count must be at least 1");
  if (!std::isfinite(aesthetic_score) || !std::isfinite(boundary_aesthetic_score)) {
    throw DomainError("record " + clip_id + ": aesthetic scores must be finite");
  }
  check_unit(first_last_frame_similarity, "first_last_frame_similarity");
  check_unit(stitch_similarity, "stitch_similarity");
  check_unit(clip_pair_similarity, "clip_pair_similarity");
}

void CurationThresholds::validate() const {
  for (double v : {segmentation, first_last_similarity_min, stitching_min, pair_similarity_max}) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("thresholds: similarity thresholds must be in [0, 1]");
  }
  if (!(duration_min < duration_max)) throw DomainError("thresholds: duration_min must be below duration_max");
  if (required_shot_count < 1) throw DomainError("thresholds: required_shot_count must be at least 1");
  if (!(aesthetic_scale_max > 0.0)) throw DomainError("thresholds: aesthetic_scale_max must be positive");
  for (double v : {aesthetic_min, boundary_aesthetic_min}) {
    if (!(v >= 0.0 && v <= aesthetic_scale_max)) {
      throw DomainError("thresholds: aesthetic minima must lie in [0, aesthetic_scale_max]");
    }
  }
}

FilterReport apply_filters(const ClipRecord& record, const std::optional<HierarchicalCaption>& caption,
                           const CurationThresholds& t) {
  try {
    record.validate();
  } catch (const DomainError& e) {
    throw LoadError(e.what());
  }
  t.validate();
  FilterReport report{record.clip_id, Verdict::Keep, {}};
  auto check = [&](bool keep, const char* rule, double measured, double threshold) {
    if (!keep) report.failed_rules.push_back({rule, measured, threshold, {}});
  };
  check(record.first_last_frame_similarity >= t.first_last_similarity_min, "first_last_similarity_min",
        record.first_last_frame_similarity, t.first_last_similarity_min);
  check(record.stitch_similarity >= t.stitching_min, "stitching_min", record.stitch_similarity, t.stitching_min);
  check(record.duration_seconds >= t.duration_min, "duration_min", record.duration_seconds, t.duration_min);
  check(record.duration_seconds <= t.duration_max, "duration_max", record.duration_seconds, t.duration_max);
  check(record.shot_count == t.required_shot_count, "required_shot_count", record.shot_count, t.required_shot_count);
  check(record.aesthetic_score >= t.aesthetic_min, "aesthetic_min", record.aesthetic_score, t.aesthetic_min);
  check(record.boundary_aesthetic_score >= t.boundary_aesthetic_min, "boundary_aesthetic_min",
        record.boundary_aesthetic_score, t.boundary_aesthetic_min);
  check(record.clip_pair_similarity <= t.pair_similarity_max, "pair_similarity_max", record.clip_pair_similarity,
        t.pair_similarity_max);
  check(record.vlm_coherence_pass, "vlm_coherence", record.vlm_coherence_pass ? 1.0 : 0.0, 1.0);
  if (caption) {
    const auto violations = validate_caption(*caption, record.shot_count);
    if (!violations.empty()) {
      std::string detail;
      for (const auto& v : violations) detail += (detail.empty() ? "" : "; ") + v;
      report.failed_rules.push_back({"caption_schema", static_cast<double>(violations.size()), 0.0, detail});
    }
  }
  report.verdict = report.failed_rules.empty() ? Verdict::Keep : Verdict::Drop;
  return report;
}

std::vector<std::string> validate_caption(const HierarchicalCaption& caption, int shot_count) {
  std::vector<std::string> out;
  if (caption.subject.empty()) out.push_back("subject: empty");
  if (caption.overall.empty()) out.push_back("overall: empty");
  if (shot_count < 0 || caption.shots.size() != static_cast<std::size_t>(shot_count)) {
    out.push_back("shots: expected " + std::to_string(shot_count) + " shot captions, got " +
                  std::to_string(caption.shots.size()));
  }
  for (std::size_t i = 0; i < caption.shots.size(); ++i) {
    if (caption.shots[i].content.empty()) out.push_back("shots[" + std::to_string(i) + "].content: empty");
    if (caption.shots[i].cinematography.empty()) {
      out.push_back("shots[" + std::to_string(i) + "].cinematography: empty");
    }
  }
  if (!parse_transition_type(caption.transition_type)) {
    out.push_back("transition_type: '" + caption.transition_type +
                  "' is not one of shot_reverse_shot, cut_in, cut_out, multi_angle");
  }
  if (caption.transition_description.empty()) out.push_back("transition_description: empty");
  return out;
}

namespace {

Summary summarize(std::vector<double> values, const std::vector<double>& edges) {
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end())) {
    throw DomainError("dataset_stats: histogram edges must be sorted with at least two entries");
  }
  std::sort(values.begin(), values.end());
  Summary s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  s.min = values.front();
  s.max = values.back();
  s.histogram.edges = edges;
  s.histogram.counts.assign(edges.size() - 1, 0);
  for (double v : values) {
    if (v < edges.front()) {
      ++s.histogram.below;
    } else if (v > edges.back()) {
      ++s.histogram.above;
    } else {
      auto it = std::upper_bound(edges.begin(), edges.end(), v);
      auto bin = static_cast<std::size_t>(it - edges.begin()) - 1;
      bin = std::min(bin, s.histogram.counts.size() - 1);
      ++s.histogram.counts[bin];
    }
  }
  return s;
}

}  // namespace

DatasetStats dataset_stats(const std::vector<ClipRecord>& records, const std::vector<HierarchicalCaption>* captions,
                           const StatsConfig& config) {
  if (records.empty()) throw DomainError("dataset_stats: no records");
  std::vector<double> duration, aesthetic, similarity;
  for (const auto& r : records) {
    r.validate();
    duration.push_back(r.duration_seconds);
    aesthetic.push_back(r.aesthetic_score);
    similarity.push_back(r.clip_pair_similarity);
  }
  DatasetStats stats;
  stats.count = records.size();
  stats.duration = summarize(std::move(duration), config.duration_edges);
  stats.aesthetic = summarize(std::move(aesthetic), config.aesthetic_edges);
  stats.pair_similarity = summarize(std::move(similarity), config.similarity_edges);
  if (captions) {
    if (captions->size() != records.size()) {
      throw DomainError("dataset_stats: " + std::to_string(captions->size()) + " captions for " +
                        std::to_string(records.size()) + " records");
    }
    for (auto t : kTransitionTypes) stats.transition_types[to_string(t)] = 0;
    for (const auto& c : *captions) {
      if (!parse_transition_type(c.transition_type)) {
        throw DomainError("dataset_stats: unknown transition type '" + c.transition_type + "'");
      }
      ++stats.transition_types[c.transition_type];
    }
  }
  return stats;
}

MixingSampler::MixingSampler(std::size_t real_pool, std::size_t synthetic_pool, MixRatio ratio, std::uint64_t seed)
    : real_pool_(real_pool), synthetic_pool_(synthetic_pool), ratio_(ratio), rng_(seed) {
  if (real_pool == 0 || synthetic_pool == 0) throw DomainError("mixing_sampler: both pools must be nonempty");
  if (ratio.real + ratio.synthetic == 0) throw DomainError("mixing_sampler: ratio must have a positive part");
}

MixDraw MixingSampler::next() {
  const bool real = rng_.below(ratio_.real + ratio_.synthetic) < ratio_.real;
  const std::size_t pool = real ? real_pool_ : synthetic_pool_;
  return {real ? SourceTag::Real : SourceTag::Synthetic, static_cast<std::size_t>(rng_.below(pool))};
}

std::vector<MixDraw> MixingSampler::take(std::size_t n) {
  std::vector<MixDraw> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(next());
  return out;
}

}  // namespace shotdirector
