#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cost/dataset.hpp"
#include "cost/image.hpp"

namespace cost {

enum class SpeedRegime { Generic, HighSpeed };

std::string to_string(SpeedRegime r);
/// "generic" or "high-speed"; throws std::invalid_argument otherwise.
SpeedRegime parse_regime(const std::string& s);

struct SynthConfig {
  std::size_t frame_width = 192;
  std::size_t frame_height = 144;
  double target_size = 12.0;  ///< mean sqrt(w h), pixels
  double size_variation = 0.2;  ///< amplitude of the periodic size change, relative to the base size
  SpeedRegime regime = SpeedRegime::Generic;
  double generic_speed = 0.7;  ///< mean relative speed per frame; 0 keeps targets in place
  double high_speed_factor = 4.0;
  std::size_t distractors = 0;
  double occlusion_rate = 0.0;     ///< chance a sequence contains a full-occlusion episode
  double illumination_rate = 0.0;  ///< chance a sequence has an illumination ramp
  std::size_t sequence_length = 60;
  std::size_t sequences = 1;
  /// {color}, {shape}, {regime} and {background} are substituted.
  std::string description_template = "the {color} {shape} moving {regime} across the {background}";
  std::uint64_t seed = 1;

  double relative_speed() const {
    return regime == SpeedRegime::HighSpeed ? generic_speed * high_speed_factor : generic_speed;
  }
  void validate() const;
};

struct SyntheticSequence {
  SequenceAnnotation annotation;  ///< frame paths are bare file names until written
  std::vector<RgbImage> frames;
};

/// Renders sequence `index` of the batch described by config. Pure function of (config, index).
SyntheticSequence render_sequence(const SynthConfig& config, std::size_t index);

/// Writes config.sequences sequences under out/seq_NNN in the dataset layout
/// and returns their annotations. Throws DatasetError if out is not writable.
std::vector<SequenceAnnotation> generate_synthetic(const SynthConfig& config, const std::filesystem::path& out);

}  // namespace cost
