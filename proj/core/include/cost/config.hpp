#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cost/model.hpp"
#include "cost/synth.hpp"
#include "cost/tracker.hpp"
#include "cost/trainer.hpp"

namespace cost {

/// Every configurable value of the artifact.
struct CostConfig {
  ModelConfig model = ModelConfig::desk();
  TrainConfig train;
  RuntimeConfig runtime;
  SynthConfig synth;

  /// Validates each part and their cross-constraints.
  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `section.key = value` lines; `#` starts a comment. `model.preset =
/// desk|paper` is applied before any other key. Runtime crop sizes and the
/// window side follow the model unless set explicitly. Unknown keys, bad
/// values and duplicates raise ConfigError with the source and line number.
CostConfig parse_config(std::string_view text, const std::string& source = "<config>");
CostConfig load_config(const std::filesystem::path& path);

/// Every key with its current value, one per line, in a fixed order; parses back to an equal config.
std::string to_text(const CostConfig& config);

/// All recognized keys, in to_text order.
std::vector<std::string> config_keys();

}  // namespace cost
