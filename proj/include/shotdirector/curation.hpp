#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shotdirector/rng.hpp"

namespace shotdirector {

enum class TransitionType { ShotReverseShot, CutIn, CutOut, MultiAngle };

inline constexpr std::array<TransitionType, 4> kTransitionTypes = {
    TransitionType::ShotReverseShot, TransitionType::CutIn, TransitionType::CutOut, TransitionType::MultiAngle};

const char* to_string(TransitionType t);
std::optional<TransitionType> parse_transition_type(const std::string& s);

enum class SourceTag { Real, Synthetic };

const char* to_string(SourceTag s);

/// Per-clip metadata. Scores come from upstream feature extractors.
struct ClipRecord {
  std::string clip_id;
  double duration_seconds = 0.0;
  double fps = 0.0;
  int width = 0;
  int height = 0;
  int shot_count = 0;
  double aesthetic_score = 0.0;
  double boundary_aesthetic_score = 0.0;
  double first_last_frame_similarity = 0.0;
  double stitch_similarity = 0.0;
  double clip_pair_similarity = 0.0;
  bool vlm_coherence_pass = false;
  SourceTag source_tag = SourceTag::Real;

  /// Throws DomainError on the first broken invariant.
  void validate() const;
};

struct ShotCaption {
  std::string content;
  std::string cinematography;
};

/// Caption schema. transition_type is kept as raw text so that invalid
/// labels surface as schema violations rather than parse failures.
struct HierarchicalCaption {
  std::string subject;
  std::string overall;
  std::vector<ShotCaption> shots;
  std::string transition_type;
  std::string transition_description;
};

struct CurationThresholds {
  double segmentation = 0.45;  // shot boundary proposals; applied upstream, echoed in reports
  double first_last_similarity_min = 0.90;
  double stitching_min = 0.65;
  double pair_similarity_max = 0.95;
  double duration_min = 5.0;
  double duration_max = 12.0;
  int required_shot_count = 2;
  double aesthetic_min = 0.0;
  double boundary_aesthetic_min = 0.0;
  double aesthetic_scale_max = 10.0;

  void validate() const;
};

struct FailedRule {
  std::string rule;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;  // schema violations only
};

enum class Verdict { Keep, Drop };

struct FilterReport {
  std::string clip_id;
  Verdict verdict = Verdict::Keep;
  std::vector<FailedRule> failed_rules;
};

/// Rule identifiers in evaluation order.
inline constexpr std::array<const char*, 10> kFilterRules = {
    "first_last_similarity_min", "stitching_min",          "duration_min",   "duration_max",
    "required_shot_count",       "aesthetic_min",          "boundary_aesthetic_min",
    "pair_similarity_max",       "vlm_coherence",          "caption_schema"};

/// Every rule is evaluated and recorded; keep-side comparisons are
/// inclusive. A malformed record is a LoadError, never a drop verdict.
FilterReport apply_filters(const ClipRecord& record, const std::optional<HierarchicalCaption>& caption,
                           const CurationThresholds& thresholds);

/// Empty iff every text field is nonempty, there is one shot caption per
/// shot, and transition_type is one of the four known types.
std::vector<std::string> validate_caption(const HierarchicalCaption& caption, int shot_count);

struct Histogram {
  std::vector<double> edges;           // bin i is [edges[i], edges[i+1]), last bin closed
  std::vector<std::size_t> counts;     // edges.size() - 1 bins
  std::size_t below = 0, above = 0;    // outside the edges
};

struct Summary {
  double mean = 0.0, min = 0.0, max = 0.0;
  Histogram histogram;
};

struct StatsConfig {
  std::vector<double> duration_edges = {5, 6, 7, 8, 9, 10, 11, 12};
  std::vector<double> aesthetic_edges = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<double> similarity_edges = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
};

struct DatasetStats {
  std::size_t count = 0;
  Summary duration, aesthetic, pair_similarity;
  std::map<std::string, std::size_t> transition_types;  // only when captions are supplied
};

/// Summary of kept records. Values are sorted before reduction, so the
/// result does not depend on input order. Throws DomainError when empty.
/// Captions, when given, pair one-to-one with records.
DatasetStats dataset_stats(const std::vector<ClipRecord>& records,
                           const std::vector<HierarchicalCaption>* captions = nullptr,
                           const StatsConfig& config = {});

struct MixRatio {
  std::uint32_t real = 7;
  std::uint32_t synthetic = 3;
};

struct MixDraw {
  SourceTag source;
  std::size_t index;
  bool operator==(const MixDraw&) const = default;
};

/// Seeded real/synthetic source selector: each draw picks the real pool
/// with probability real / (real + synthetic), then an item uniformly with
/// replacement. The stream is a pure function of (pool sizes, ratio, seed).
class MixingSampler {
public:
  MixingSampler(std::size_t real_pool, std::size_t synthetic_pool, MixRatio ratio, std::uint64_t seed);

  MixDraw next();
  std::vector<MixDraw> take(std::size_t n);

private:
  std::size_t real_pool_, synthetic_pool_;
  MixRatio ratio_;
  Rng rng_;
};

}  // namespace shotdirector
