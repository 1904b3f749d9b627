#include "shotdirector/shot_mask.hpp"

#include <algorithm>
#include <set>

#include "shotdirector/errors.hpp"

namespace shotdirector {

namespace {

std::string range_str(const Range& r) {
  return "[" + std::to_string(r.start) + ", " + std::to_string(r.end) + ")";
}

}  // namespace

std::size_t TokenLayout::text_tokens() const {
  std::size_t end = global_text.end;
  for (const auto& s : shots) end = std::max(end, s.local_text.end);
  return end;
}

void TokenLayout::validate() const {
  if (frames == 0) throw DomainError("layout: frames must be positive");
  if (patch_h == 0 || patch_w == 0) throw DomainError("layout: patch grid must be at least 1x1");
  if (shots.empty()) throw DomainError("layout: at least one shot is required");

  std::size_t expected_start = 0;
  std::set<int> ids;
  for (std::size_t i = 0; i < shots.size(); ++i) {
    const auto& s = shots[i];
    if (!ids.insert(s.shot_id).second) throw DomainError("layout: duplicate shot_id " + std::to_string(s.shot_id));
    if (s.frames.end <= s.frames.start) {
      throw DomainError("layout: shot " + std::to_string(s.shot_id) + " has empty frame range " +
                        range_str(s.frames));
    }
    if (s.frames.start != expected_start) {
      throw DomainError("layout: shot " + std::to_string(s.shot_id) + " frame range " + range_str(s.frames) +
                        " must start at " + std::to_string(expected_start) + " (ordered, disjoint, gap-free)");
    }
    expected_start = s.frames.end;
  }
  if (expected_start != frames) {
    throw DomainError("layout: shot frame ranges cover [0, " + std::to_string(expected_start) + ") but frames = " +
                      std::to_string(frames));
  }

  // Text ranges must be well-formed, pairwise disjoint and tile [0, text_tokens()).
  std::vector<Range> text{global_text};
  for (const auto& s : shots) text.push_back(s.local_text);
  for (const auto& r : text) {
    if (r.end < r.start) throw DomainError("layout: malformed text range " + range_str(r));
  }
  std::vector<Range> nonempty;
  std::copy_if(text.begin(), text.end(), std::back_inserter(nonempty), [](const Range& r) { return !r.empty(); });
  std::sort(nonempty.begin(), nonempty.end(), [](const Range& a, const Range& b) { return a.start < b.start; });
  std::size_t cursor = 0;
  for (const auto& r : nonempty) {
    if (r.start < cursor) throw DomainError("layout: text range " + range_str(r) + " overlaps another text range");
    if (r.start > cursor) {
      throw DomainError("layout: text tokens [" + std::to_string(cursor) + ", " + std::to_string(r.start) +
                        ") belong to no text range");
    }
    cursor = r.end;
  }
}

Range TokenLayout::shot_visual_range(std::size_t shot) const {
  const auto& f = shots.at(shot).frames;
  const std::size_t base = text_tokens();
  return {base + f.start * tokens_per_frame(), base + f.end * tokens_per_frame()};
}

Range TokenLayout::first_frame_range() const {
  const std::size_t base = text_tokens();
  return {base, base + tokens_per_frame()};
}

TokenClass classify_token(const TokenLayout& layout, std::size_t token) {
  const std::size_t text = layout.text_tokens();
  if (token < text) {
    if (layout.global_text.contains(token)) return {TokenKind::GlobalText, 0};
    for (std::size_t s = 0; s < layout.shots.size(); ++s) {
      if (layout.shots[s].local_text.contains(token)) return {TokenKind::LocalText, s};
    }
    throw DomainError("classify_token: text token " + std::to_string(token) + " belongs to no range");
  }
  const std::size_t frame = (token - text) / layout.tokens_per_frame();
  for (std::size_t s = 0; s < layout.shots.size(); ++s) {
    if (layout.shots[s].frames.contains(frame)) return {TokenKind::Visual, s};
  }
  throw DomainError("classify_token: token " + std::to_string(token) + " is outside the layout");
}

const char* to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::GlobalText: return "global_text";
    case TokenKind::LocalText: return "local_text";
    case TokenKind::Visual: return "visual";
  }
  return "?";
}

// ------------------------------------------------------------ AttentionMask

AttentionMask::AttentionMask(std::size_t n, std::vector<std::uint8_t> bits) : n_(n), bits_(std::move(bits)) {
  if (bits_.size() != n_ * n_) throw DomainError("attention mask: bit count does not equal n*n");
  for (std::size_t q = 0; q < n_; ++q) {
    if (!bits_[q * n_ + q]) throw DomainError("attention mask: token " + std::to_string(q) + " cannot see itself");
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

AttentionMask AttentionMask::all_visible(std::size_t n) {
  return AttentionMask(n, std::vector<std::uint8_t>(n * n, 1));
}

std::size_t AttentionMask::visible_count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

// --------------------------------------------------------------- build_mask

namespace {

void fill_row(std::uint8_t* row, const Range& r) { std::fill(row + r.start, row + r.end, std::uint8_t{1}); }

void build_row(const TokenLayout& layout, std::size_t q, std::uint8_t* row) {
  const auto cls = classify_token(layout, q);
  const std::size_t n = layout.total_tokens();
  switch (cls.kind) {
    case TokenKind::GlobalText:
      fill_row(row, {0, n});
      break;
    case TokenKind::LocalText:
      fill_row(row, layout.shot_visual_range(cls.shot));
      fill_row(row, layout.shots[cls.shot].local_text);
      fill_row(row, layout.global_text);
      break;
    case TokenKind::Visual:
      fill_row(row, layout.shot_visual_range(cls.shot));
      fill_row(row, layout.first_frame_range());
      fill_row(row, layout.shots[cls.shot].local_text);
      fill_row(row, layout.global_text);
      break;
  }
}

}  // namespace

AttentionMask build_mask_serial(const TokenLayout& layout) {
  layout.validate();
  const std::size_t n = layout.total_tokens();
  std::vector<std::uint8_t> bits(n * n, 0);
  for (std::size_t q = 0; q < n; ++q) build_row(layout, q, &bits[q * n]);
  return AttentionMask(n, std::move(bits));
}

AttentionMask build_mask(const TokenLayout& layout) {
  layout.validate();
  const std::size_t n = layout.total_tokens();
  std::vector<std::uint8_t> bits(n * n, 0);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t q = 0; q < rows; ++q) {
    build_row(layout, static_cast<std::size_t>(q), &bits[static_cast<std::size_t>(q) * n]);
  }
  return AttentionMask(n, std::move(bits));
}

AttentionMask mask_for_layer(const AttentionMask& mask, std::size_t layer_index, std::size_t full_visibility_layers) {
  if (layer_index < full_visibility_layers) return AttentionMask::all_visible(mask.size());
  return mask;
}

MaskStats mask_stats(const AttentionMask& mask, const TokenLayout& layout) {
  const std::size_t n = mask.size();
  if (n != layout.total_tokens()) throw DomainError("mask_stats: mask size does not match layout");
  MaskStats stats;
  stats.n = n;
  stats.visible_pairs = mask.visible_count();
  stats.density = n ? static_cast<double>(stats.visible_pairs) / static_cast<double>(n * n) : 0.0;

  std::vector<TokenKind> kinds(n);
  for (std::size_t t = 0; t < n; ++t) kinds[t] = classify_token(layout, t).kind;
  std::map<std::pair<TokenKind, TokenKind>, std::pair<std::size_t, std::size_t>> counts;
  for (std::size_t q = 0; q < n; ++q) {
    for (std::size_t k = 0; k < n; ++k) {
      auto& c = counts[{kinds[q], kinds[k]}];
      c.first += mask.visible(q, k) ? 1 : 0;
      c.second += 1;
    }
  }
  for (const auto& [key, c] : counts) {
    stats.block_density[key] = static_cast<double>(c.first) / static_cast<double>(c.second);
  }
  return stats;
}

std::vector<MaskBlock> mask_blocks(const TokenLayout& layout) {
  layout.validate();
  const std::size_t n = layout.total_tokens();
  std::vector<MaskBlock> blocks;
  auto add = [&](Range q, Range k, const char* rule) {
    if (!q.empty() && !k.empty()) blocks.push_back({q, k, rule});
  };
  add(layout.global_text, {0, n}, "global_text_sees_all");
  for (std::size_t s = 0; s < layout.shots.size(); ++s) {
    const Range vis = layout.shot_visual_range(s);
    const Range local = layout.shots[s].local_text;
    add(local, vis, "local_text_to_shot_visual");
    add(local, local, "local_text_to_own_text");
    add(local, layout.global_text, "local_text_to_global_text");
    add(vis, vis, "visual_local");
    add(vis, layout.first_frame_range(), "visual_global_first_frame");
    add(vis, local, "visual_to_local_text");
    add(vis, layout.global_text, "visual_to_global_text");
  }
  return blocks;
}

AttentionMask mask_from_blocks(std::size_t n, const std::vector<MaskBlock>& blocks) {
  std::vector<std::uint8_t> bits(n * n, 0);
  for (const auto& b : blocks) {
    if (b.q.end > n || b.k.end > n || b.q.end < b.q.start || b.k.end < b.k.start) {
      throw DomainError("mask block " + b.rule + " exceeds n = " + std::to_string(n));
    }
    for (std::size_t q = b.q.start; q < b.q.end; ++q) fill_row(&bits[q * n], b.k);
  }
  return AttentionMask(n, std::move(bits));
}

std::string mask_to_pgm(const AttentionMask& mask) {
  const std::size_t n = mask.size();
  std::string out = "P5\n" + std::to_string(n) + " " + std::to_string(n) + "\n255\n";
  out.reserve(out.size() + n * n);
  for (auto b : mask.bits()) out.push_back(static_cast<char>(b ? 255 : 0));
  return out;
}

}  // namespace shotdirector
