#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hycot/dataio.hpp"
#include "hycot/model.hpp"
#include "hycot/training.hpp"

namespace hycot {

/// Settings shared by every CLI command. Populated from defaults, then an
/// optional key=value file, then command-line flags (last writer wins).
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SynthConfig synth;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: available parallelism
  std::filesystem::path out = ".";
  std::filesystem::path manifest;

  /// Fans `seed` out to the model, train, and synth components.
  void derive_seeds();
  unsigned resolved_threads() const;
};

struct SettingInfo {
  std::string_view key;
  std::string_view help;
};

/// Every accepted key, in documentation order.
const std::vector<SettingInfo>& setting_keys();

/// Throws ConfigError for unknown keys or unparsable values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Parses "key = value" lines. Blank lines and lines starting with '#' are
/// skipped; trailing "# ..." comments are stripped.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

}  // namespace hycot
