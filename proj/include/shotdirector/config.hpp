#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "shotdirector/block.hpp"
#include "shotdirector/curation.hpp"

namespace shotdirector {

/// Environment variable naming the default config file.
inline constexpr const char* kConfigEnvVar = "SHOTDIRECTOR_CONFIG";

struct ToolConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t layers = 4;
  std::size_t full_visibility_layers = 2;
  std::size_t conv_kernel = 2;
  std::size_t conv_extra_layers = 0;
  std::size_t mlp_hidden = 0;  // 0 selects 4 * d_model
  std::uint64_t seed = 0;
  bool use_mask = true;
  bool use_extrinsic_branch = true;
  bool use_plucker_branch = true;
  bool residual_rmsnorm = false;
  bool center_sampling = false;
  CurationThresholds thresholds;

  /// Checks every field against the owning module's invariants.
  void validate() const;
  BlockConfig block_config() const;
};

/// `key = value` lines; '#' starts a comment; blank lines ignored.
/// Throws LoadError with the line number on malformed lines.
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Sets one field by its key. Throws LoadError for unknown keys or values
/// that do not parse.
void apply_setting(ToolConfig& config, const std::string& key, const std::string& value);
void apply_threshold(CurationThresholds& thresholds, const std::string& key, const std::string& value);

ToolConfig config_from_text(const std::string& text, ToolConfig base = {});
CurationThresholds thresholds_from_text(const std::string& text, CurationThresholds base = {});

}  // namespace shotdirector
