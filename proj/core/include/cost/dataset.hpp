#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cost/box.hpp"
#include "cost/image.hpp"

namespace cost {

/// The 17 sequence attributes, in file order.
enum class Attribute : std::size_t {
  CM, VC, PO, FO, OV, ROT, DEF, SD, IV, MB, NAO, PTI, BRI, FM, SV, ARV, LEN
};
inline constexpr std::size_t kAttributeCount = 17;

const std::array<std::string_view, kAttributeCount>& attribute_names();
/// True for the two three-level attributes (BRI, LEN).
bool is_leveled(Attribute a);

/// BRI: 0 low (b <= 83), 1 medium (83 < b <= 119), 2 high.
int brightness_level(double mean_brightness);
/// LEN: 0 short (<= 600 frames), 1 medium (<= 1800), 2 long.
int length_level(std::size_t frames);

/// Flags are 0/1; BRI and LEN hold a level 0..2.
struct AttributeSet {
  std::array<int, kAttributeCount> values{};

  int get(Attribute a) const { return values[static_cast<std::size_t>(a)]; }
  void set(Attribute a, int v) { values[static_cast<std::size_t>(a)] = v; }
  /// "CM", "BRI=low", "LEN=medium" and so on; empty for an unset flag.
  std::string label(Attribute a) const;
  std::string to_line() const;
  /// Accepts integers, or low/medium/high and short/medium/long for the leveled attributes.
  static AttributeSet parse(std::string_view line);

  friend bool operator==(const AttributeSet&, const AttributeSet&) = default;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SequenceAnnotation {
  std::string id;
  std::vector<std::filesystem::path> frames;
  std::vector<BoundingBox> boxes;
  std::vector<int> absent;
  std::vector<double> timestamps;
  std::string description;
  AttributeSet attributes;

  std::size_t size() const { return frames.size(); }
  bool visible(std::size_t t) const { return absent[t] == 0; }
  RgbImage load_frame(std::size_t t) const { return read_png(frames.at(t)); }
  /// Throws DatasetError if the per-frame lists disagree in length or the timestamps do not increase.
  void check() const;
};

/// Parses one sequence directory; all-or-nothing.
SequenceAnnotation load_sequence(const std::filesystem::path& dir);
/// Every subdirectory of root, sorted by name.
std::vector<SequenceAnnotation> load_dataset(const std::filesystem::path& root);
/// Writes the annotation files (not the frames) into dir.
void write_annotation(const std::filesystem::path& dir, const SequenceAnnotation& seq);

/// Relative speed at frame t: centre displacement over the geometric-mean size
/// and the time gap. Throws std::invalid_argument for t == 0, an absent frame
/// at t or t - 1, or a zero-size box.
double relative_speed(const SequenceAnnotation& seq, std::size_t t);
/// Mean over all frames where relative_speed is defined; nullopt if none.
std::optional<double> average_relative_speed(const SequenceAnnotation& seq);

struct SizeStatistics {
  double mean_size = 0.0;           ///< mean sqrt(w h), pixels
  double mean_relative_size = 0.0;  ///< mean (w h) / (W H)
  bool small = false;
};

inline constexpr double kSmallRelativeSize = 0.01;
inline constexpr double kSmallAbsoluteSize = 22.0;

/// small iff mean relative size < 1% and mean absolute size < 22 px.
bool classify_small(double mean_size, double mean_relative_size);
/// Statistics over visible frames with frame sizes given per frame (one entry
/// means every frame has that size).
SizeStatistics is_small_object(const std::vector<BoundingBox>& boxes, const std::vector<int>& absent,
                               const std::vector<std::array<std::size_t, 2>>& frame_sizes);
SizeStatistics is_small_object(const SequenceAnnotation& seq);

struct SequenceReport {
  std::string id;
  std::size_t frames = 0;
  std::size_t visible = 0;
  SizeStatistics size;
  std::optional<double> relative_speed;
};

struct ValidationReport {
  std::vector<SequenceReport> sequences;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

/// Loads every sequence, collecting errors instead of stopping at the first.
ValidationReport validate_dataset(const std::filesystem::path& root);

}  // namespace cost
