#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "shotdirector/camera_geometry.hpp"
#include "shotdirector/curation.hpp"
#include "shotdirector/metrics.hpp"
#include "shotdirector/shot_mask.hpp"

namespace shotdirector {

using Json = nlohmann::ordered_json;

// Loaders throw LoadError on malformed content, naming the offending entry.

/// {"frames": [{frame_index, fx, fy, cx, cy, width, height,
///              rotation: [9 row-major], translation: [3]}]}
Trajectory trajectory_from_json(const Json& doc);
Json trajectory_to_json(const Trajectory& trajectory);

struct LayoutFile {
  TokenLayout layout;
  std::size_t full_visibility_layers = 2;
  bool operator==(const LayoutFile&) const = default;
};

/// {frames, patch_h, patch_w, shots: [{shot_id, frame_start, frame_end,
///  local_text_start, local_text_end}], global_text_start, global_text_end,
///  full_visibility_layers}
LayoutFile layout_from_json(const Json& doc);
Json layout_to_json(const LayoutFile& layout);

Json mask_blocks_to_json(std::size_t n, const std::vector<MaskBlock>& blocks);
std::vector<MaskBlock> mask_blocks_from_json(const Json& doc, std::size_t* n = nullptr);

struct RecordLine {
  ClipRecord record;
  std::optional<HierarchicalCaption> caption;
};

/// One ClipRecord object per line, optionally with a "caption" member.
RecordLine record_from_json(const Json& obj);
Json record_to_json(const RecordLine& line);
Json report_to_json(const FilterReport& report);
Json stats_to_json(const DatasetStats& stats);
Json thresholds_to_json(const CurationThresholds& t);

HierarchicalCaption caption_from_json(const Json& obj);
Json caption_to_json(const HierarchicalCaption& c);

/// Parses line-delimited JSON, skipping blank lines. Errors carry the line number.
std::vector<Json> parse_jsonl(const std::string& text);

TypedPrediction prediction_from_json(const Json& obj);

}  // namespace shotdirector
