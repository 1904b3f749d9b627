#include "shotdirector/config.hpp"

#include <charconv>
#include <sstream>

#include "shotdirector/attention.hpp"
#include "shotdirector/errors.hpp"

namespace shotdirector {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw LoadError("config: '" + key + "' expects a nonnegative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw LoadError("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw LoadError("config: '" + key + "' expects true or false, got '" + v + "'");
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw LoadError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw LoadError("config line " + std::to_string(lineno) + ": empty key or value");
    }
    if (!out.emplace(key, value).second) {
      throw LoadError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

void apply_threshold(CurationThresholds& t, const std::string& key, const std::string& value) {
  if (key == "segmentation") t.segmentation = parse_double(key, value);
  else if (key == "first_last_similarity_min") t.first_last_similarity_min = parse_double(key, value);
  else if (key == "stitching_min") t.stitching_min = parse_double(key, value);
  else if (key == "pair_similarity_max") t.pair_similarity_max = parse_double(key, value);
  else if (key == "duration_min") t.duration_min = parse_double(key, value);
  else if (key == "duration_max") t.duration_max = parse_double(key, value);
  else if (key == "required_shot_count") t.required_shot_count = static_cast<int>(parse_uint(key, value));
  else if (key == "aesthetic_min") t.aesthetic_min = parse_double(key, value);
  else if (key == "boundary_aesthetic_min") t.boundary_aesthetic_min = parse_double(key, value);
  else if (key == "aesthetic_scale_max") t.aesthetic_scale_max = parse_double(key, value);
  else throw LoadError("config: unknown key '" + key + "'");
}

void apply_setting(ToolConfig& c, const std::string& key, const std::string& value) {
  if (key == "d_model") c.d_model = parse_uint(key, value);
  else if (key == "n_heads") c.n_heads = parse_uint(key, value);
  else if (key == "layers") c.layers = parse_uint(key, value);
  else if (key == "full_visibility_layers") c.full_visibility_layers = parse_uint(key, value);
  else if (key == "conv_kernel") c.conv_kernel = parse_uint(key, value);
  else if (key == "conv_extra_layers") c.conv_extra_layers = parse_uint(key, value);
  else if (key == "mlp_hidden") c.mlp_hidden = parse_uint(key, value);
  else if (key == "seed") c.seed = parse_uint(key, value);
  else if (key == "use_mask") c.use_mask = parse_bool(key, value);
  else if (key == "use_extrinsic_branch") c.use_extrinsic_branch = parse_bool(key, value);
  else if (key == "use_plucker_branch") c.use_plucker_branch = parse_bool(key, value);
  else if (key == "residual_rmsnorm") c.residual_rmsnorm = parse_bool(key, value);
  else if (key == "center_sampling") c.center_sampling = parse_bool(key, value);
  else apply_threshold(c.thresholds, key, value);
}

void ToolConfig::validate() const {
  try {
    if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
      throw DomainError("d_model must be a positive multiple of n_heads");
    }
    if (conv_kernel == 0) throw DomainError("conv_kernel must be positive");
    block_config().validate();
    thresholds.validate();
  } catch (const DomainError& e) {
    throw LoadError(std::string("config: ") + e.what());
  }
}

BlockConfig ToolConfig::block_config() const {
  BlockConfig b;
  b.layers = layers;
  b.full_visibility_layers = full_visibility_layers;
  b.use_mask = use_mask;
  b.use_extrinsic_branch = use_extrinsic_branch;
  b.use_plucker_branch = use_plucker_branch;
  b.residual_rmsnorm = residual_rmsnorm;
  b.sampling = center_sampling ? PixelSampling::Center : PixelSampling::TopLeft;
  return b;
}

ToolConfig config_from_text(const std::string& text, ToolConfig base) {
  for (const auto& [k, v] : parse_key_values(text)) apply_setting(base, k, v);
  return base;
}

CurationThresholds thresholds_from_text(const std::string& text, CurationThresholds base) {
  for (const auto& [k, v] : parse_key_values(text)) apply_threshold(base, k, v);
  try {
    base.validate();
  } catch (const DomainError& e) {
    throw LoadError(std::string("thresholds: ") + e.what());
  }
  return base;
}

}  // namespace shotdirector
