#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mvrad/dataset.hpp"
#include "mvrad/experiment.hpp"

namespace mvrad {

enum class DataMode { Synthetic, Real };

/// Fully resolved run settings. Exactly one data source is active: the three
/// CSV paths (real mode) or the generator parameters (synthetic mode).
struct RunConfig {
  DataMode mode = DataMode::Synthetic;
  std::uint64_t seed = 0;
  std::filesystem::path t1gd_csv;
  std::filesystem::path flair_csv;
  std::filesystem::path clinical_csv;
  std::string synth_regime = "default";  ///< "default" or "shared-signal"
  SynthConfig synth;
  ExperimentConfig experiment;
  std::filesystem::path out_dir = "out";
};

/// Raw dotted key -> value text, before defaults and validation.
using ConfigEntries = std::map<std::string, std::string>;

/// Flat document: one `key = value` or `key: value` per line, `#` comments,
/// optional surrounding quotes on values. Duplicate keys are rejected.
ConfigEntries parse_config_text(std::string_view text, std::string_view source = "<memory>");
ConfigEntries load_config_file(const std::filesystem::path& path);

/// Every key the resolver understands, in documentation order.
const std::vector<std::string>& known_config_keys();

/// Applies defaults and validates. Unknown keys, malformed values, a missing
/// seed or a mix of real-data and synthetic keys raise SchemaViolation.
RunConfig resolve_config(const ConfigEntries& entries);

/// Writes every resolved setting of the active data source; the output
/// re-resolves to the same RunConfig.
std::string render_config(const RunConfig& config);

}  // namespace mvrad
