#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace shotdirector {

/// Half-open index range [start, end).
struct Range {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  bool empty() const { return end <= start; }
  bool contains(std::size_t i) const { return i >= start && i < end; }
  bool operator==(const Range&) const = default;
};

struct ShotSpec {
  int shot_id = 0;
  Range frames;      // video frames
  Range local_text;  // text tokens describing this shot
  bool operator==(const ShotSpec&) const = default;
};

/// Token axis: all text tokens first (indices [0, text_tokens())), then
/// visual tokens frame-major, row-major within a frame.
struct TokenLayout {
  std::size_t frames = 0;
  std::size_t patch_h = 0;
  std::size_t patch_w = 0;
  std::vector<ShotSpec> shots;
  Range global_text;

  /// Throws DomainError naming the first broken invariant.
  void validate() const;

  std::size_t tokens_per_frame() const { return patch_h * patch_w; }
  std::size_t visual_tokens() const { return frames * tokens_per_frame(); }
  /// One past the last text token of any range.
  std::size_t text_tokens() const;
  std::size_t total_tokens() const { return text_tokens() + visual_tokens(); }

  std::size_t visual_index(std::size_t frame, std::size_t row, std::size_t col) const {
    return text_tokens() + frame * tokens_per_frame() + row * patch_w + col;
  }
  /// Token range covering the visual tokens of `shot` (position in `shots`).
  Range shot_visual_range(std::size_t shot) const;
  /// Token range covering frame 0.
  Range first_frame_range() const;

  bool operator==(const TokenLayout&) const = default;
};

enum class TokenKind : std::uint8_t { GlobalText, LocalText, Visual };

struct TokenClass {
  TokenKind kind;
  std::size_t shot;  // position in layout.shots; unused for GlobalText
};

TokenClass classify_token(const TokenLayout& layout, std::size_t token);

const char* to_string(TokenKind kind);

/// Boolean visibility relation; visible(q, k) means query q may attend to key k.
/// Every token sees itself and no row is empty.
class AttentionMask {
public:
  AttentionMask(std::size_t n, std::vector<std::uint8_t> bits);

  static AttentionMask all_visible(std::size_t n);

  std::size_t size() const { return n_; }
  bool visible(std::size_t q, std::size_t k) const { return bits_[q * n_ + k] != 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  std::size_t visible_count() const;

  bool operator==(const AttentionMask&) const = default;

private:
  std::size_t n_;
  std::vector<std::uint8_t> bits_;
};

/// Shot-aware mask. A visual query in shot i sees shot i's visual tokens,
/// every frame-0 visual token, shot i's local text and the global text.
/// Local text of shot i sees shot i's visuals, its own range and the global
/// text. Global text sees everything. Rows are built in parallel.
AttentionMask build_mask(const TokenLayout& layout);

/// Serial reference for build_mask.
AttentionMask build_mask_serial(const TokenLayout& layout);

/// All-visible for layer_index < full_visibility_layers, otherwise `mask`.
AttentionMask mask_for_layer(const AttentionMask& mask, std::size_t layer_index,
                             std::size_t full_visibility_layers);

struct MaskStats {
  std::size_t n = 0;
  std::size_t visible_pairs = 0;
  double density = 0.0;
  /// Keyed by (query kind, key kind); only pairs with nonzero area appear.
  std::map<std::pair<TokenKind, TokenKind>, double> block_density;
};

MaskStats mask_stats(const AttentionMask& mask, const TokenLayout& layout);

/// Rectangle of visible pairs [q.start, q.end) x [k.start, k.end).
struct MaskBlock {
  Range q;
  Range k;
  std::string rule;
  bool operator==(const MaskBlock&) const = default;
};

/// Block-descriptor form of build_mask: the mask is the union of these
/// rectangles. Size is linear in the shot count rather than n^2.
std::vector<MaskBlock> mask_blocks(const TokenLayout& layout);

AttentionMask mask_from_blocks(std::size_t n, const std::vector<MaskBlock>& blocks);

/// Binary PGM (P5), one pixel per pair, 255 = visible.
std::string mask_to_pgm(const AttentionMask& mask);

}  // namespace shotdirector
