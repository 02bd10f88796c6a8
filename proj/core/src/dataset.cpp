#include "cost/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cost {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, kAttributeCount> kNames = {
    "CM", "VC", "PO", "FO", "OV", "ROT", "DEF", "SD", "IV", "MB", "NAO", "PTI", "BRI", "FM", "SV", "ARV", "LEN"};
constexpr std::array<std::string_view, 3> kBrightnessLevels = {"low", "medium", "high"};
constexpr std::array<std::string_view, 3> kLengthLevels = {"short", "medium", "long"};

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',' || line[i] == ' ' || line[i] == '\t') {
      auto f = trim(line.substr(start, i - start));
      if (!f.empty()) out.push_back(f);
      start = i + 1;
    }
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string where(const fs::path& path, std::size_t line) { return path.string() + ":" + std::to_string(line) + ": "; }

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError(path.string() + ": cannot open");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

void expect_count(const fs::path& path, std::size_t found, std::size_t expected) {
  if (found != expected)
    throw DatasetError(path.string() + ": expected " + std::to_string(expected) + " lines (one per frame), found " +
                       std::to_string(found));
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

const std::array<std::string_view, kAttributeCount>& attribute_names() { return kNames; }

bool is_leveled(Attribute a) { return a == Attribute::BRI || a == Attribute::LEN; }

int brightness_level(double b) {
  if (b <= 83.0) return 0;
  if (b <= 119.0) return 1;
  return 2;
}

int length_level(std::size_t frames) {
  if (frames <= 600) return 0;
  if (frames <= 1800) return 1;
  return 2;
}

std::string AttributeSet::label(Attribute a) const {
  const auto i = static_cast<std::size_t>(a);
  const std::string name(kNames[i]);
  if (a == Attribute::BRI) return name + "=" + std::string(kBrightnessLevels[static_cast<std::size_t>(values[i])]);
  if (a == Attribute::LEN) return name + "=" + std::string(kLengthLevels[static_cast<std::size_t>(values[i])]);
  return values[i] ? name : std::string();
}

std::string AttributeSet::to_line() const {
  std::string out;
  for (std::size_t i = 0; i < kAttributeCount; ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

AttributeSet AttributeSet::parse(std::string_view line) {
  const auto fields = split_fields(line);
  if (fields.size() != kAttributeCount)
    throw DatasetError("expected " + std::to_string(kAttributeCount) + " attribute values, found " +
                       std::to_string(fields.size()));
  AttributeSet set;
  for (std::size_t i = 0; i < kAttributeCount; ++i) {
    const auto a = static_cast<Attribute>(i);
    const std::string_view f = fields[i];
    int v = -1;
    if (auto d = parse_double(f); d && *d == std::floor(*d)) v = static_cast<int>(*d);
    if (is_leveled(a)) {
      const auto& levels = a == Attribute::BRI ? kBrightnessLevels : kLengthLevels;
      for (std::size_t k = 0; k < levels.size(); ++k)
        if (f == levels[k]) v = static_cast<int>(k);
      if (v < 0 || v > 2)
        throw DatasetError("attribute " + std::string(kNames[i]) + ": bad level '" + std::string(f) + "'");
    } else if (v != 0 && v != 1) {
      throw DatasetError("attribute " + std::string(kNames[i]) + ": expected 0 or 1, found '" + std::string(f) + "'");
    }
    set.values[i] = v;
  }
  return set;
}

void SequenceAnnotation::check() const {
  const std::size_t n = frames.size();
  if (boxes.size() != n || absent.size() != n || timestamps.size() != n)
    throw DatasetError(id + ": per-frame lists disagree in length (frames " + std::to_string(n) + ", boxes " +
                       std::to_string(boxes.size()) + ", absent " + std::to_string(absent.size()) + ", timestamps " +
                       std::to_string(timestamps.size()) + ")");
  for (std::size_t t = 1; t < n; ++t)
    if (!(timestamps[t] > timestamps[t - 1]))
      throw DatasetError(id + ": timestamps not strictly increasing at frame " + std::to_string(t));
  for (std::size_t t = 0; t < n; ++t)
    if (!boxes[t].valid()) throw DatasetError(id + ": invalid box at frame " + std::to_string(t));
}

SequenceAnnotation load_sequence(const fs::path& dir) {
  SequenceAnnotation seq;
  seq.id = dir.filename().string();

  const fs::path frame_dir = dir / "frames";
  if (!fs::is_directory(frame_dir)) throw DatasetError(frame_dir.string() + ": missing frames directory");
  for (const auto& entry : fs::directory_iterator(frame_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png") seq.frames.push_back(entry.path());
  std::sort(seq.frames.begin(), seq.frames.end());
  if (seq.frames.empty()) throw DatasetError(frame_dir.string() + ": no PNG frames");
  const std::size_t n = seq.frames.size();

  const fs::path gt_path = dir / "groundtruth.txt";
  const auto gt_lines = read_lines(gt_path);
  expect_count(gt_path, gt_lines.size(), n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto fields = split_fields(gt_lines[i]);
    if (fields.size() != 4) throw DatasetError(where(gt_path, i + 1) + "expected x,y,w,h");
    std::array<double, 4> v{};
    for (std::size_t k = 0; k < 4; ++k) {
      auto d = parse_double(fields[k]);
      if (!d || !std::isfinite(*d)) throw DatasetError(where(gt_path, i + 1) + "bad number '" + std::string(fields[k]) + "'");
      v[k] = *d;
    }
    if (v[2] < 0.0 || v[3] < 0.0) throw DatasetError(where(gt_path, i + 1) + "negative box extent");
    seq.boxes.push_back({v[0], v[1], v[2], v[3]});
  }

  const fs::path absent_path = dir / "absent.txt";
  if (fs::exists(absent_path)) {
    const auto lines = read_lines(absent_path);
    expect_count(absent_path, lines.size(), n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto f = trim(lines[i]);
      if (f != "0" && f != "1") throw DatasetError(where(absent_path, i + 1) + "expected 0 or 1");
      seq.absent.push_back(f == "1");
    }
  } else {
    seq.absent.assign(n, 0);
  }

  const fs::path ts_path = dir / "timestamps.txt";
  if (fs::exists(ts_path)) {
    const auto lines = read_lines(ts_path);
    expect_count(ts_path, lines.size(), n);
    for (std::size_t i = 0; i < n; ++i) {
      auto d = parse_double(trim(lines[i]));
      if (!d || !std::isfinite(*d)) throw DatasetError(where(ts_path, i + 1) + "bad timestamp");
      if (i > 0 && !(*d > seq.timestamps.back()))
        throw DatasetError(where(ts_path, i + 1) + "timestamps must be strictly increasing");
      seq.timestamps.push_back(*d);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) seq.timestamps.push_back(static_cast<double>(i));
  }

  const fs::path lang_path = dir / "language.txt";
  if (fs::exists(lang_path)) {
    const auto lines = read_lines(lang_path);
    if (lines.size() > 1) throw DatasetError(lang_path.string() + ": expected a single line");
    if (!lines.empty()) seq.description = std::string(trim(lines[0]));
  }

  const fs::path attr_path = dir / "attributes.txt";
  const auto attr_lines = read_lines(attr_path);
  if (attr_lines.size() != 1) throw DatasetError(attr_path.string() + ": expected a single line");
  try {
    seq.attributes = AttributeSet::parse(attr_lines[0]);
  } catch (const DatasetError& e) {
    throw DatasetError(where(attr_path, 1) + e.what());
  }
  return seq;
}

std::vector<SequenceAnnotation> load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw DatasetError(root.string() + ": not a directory");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<SequenceAnnotation> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) out.push_back(load_sequence(d));
  return out;
}

void write_annotation(const fs::path& dir, const SequenceAnnotation& seq) {
  seq.check();
  fs::create_directories(dir);
  const auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw DatasetError((dir / name).string() + ": cannot write");
    return f;
  };
  {
    auto f = open("groundtruth.txt");
    for (const auto& b : seq.boxes)
      f << format_double(b.x) << ',' << format_double(b.y) << ',' << format_double(b.w) << ',' << format_double(b.h)
        << '\n';
  }
  {
    auto f = open("absent.txt");
    for (int a : seq.absent) f << a << '\n';
  }
  {
    auto f = open("timestamps.txt");
    for (double t : seq.timestamps) f << format_double(t) << '\n';
  }
  open("language.txt") << seq.description << '\n';
  open("attributes.txt") << seq.attributes.to_line() << '\n';
}

double relative_speed(const SequenceAnnotation& seq, std::size_t t) {
  if (t == 0 || t >= seq.boxes.size()) throw std::invalid_argument("relative_speed: frame index out of range");
  if (!seq.visible(t) || !seq.visible(t - 1)) throw std::invalid_argument("relative_speed: absent frame");
  const BoundingBox& a = seq.boxes[t - 1];
  const BoundingBox& b = seq.boxes[t];
  const double sa = std::sqrt(a.w * a.h);
  const double sb = std::sqrt(b.w * b.h);
  if (!(sa > 0.0) || !(sb > 0.0)) throw std::invalid_argument("relative_speed: zero-size box");
  const double dt = seq.timestamps[t] - seq.timestamps[t - 1];
  const double disp = std::hypot(b.cx() - a.cx(), b.cy() - a.cy());
  return disp / (std::sqrt(sa * sb) * dt);
}

std::optional<double> average_relative_speed(const SequenceAnnotation& seq) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 1; t < seq.size(); ++t) {
    if (!seq.visible(t) || !seq.visible(t - 1) || seq.boxes[t].empty() || seq.boxes[t - 1].empty()) continue;
    total += relative_speed(seq, t);
    ++count;
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

bool classify_small(double mean_size, double mean_relative_size) {
  return mean_relative_size < kSmallRelativeSize && mean_size < kSmallAbsoluteSize;
}

SizeStatistics is_small_object(const std::vector<BoundingBox>& boxes, const std::vector<int>& absent,
                               const std::vector<std::array<std::size_t, 2>>& frame_sizes) {
  if (frame_sizes.empty() || (frame_sizes.size() != 1 && frame_sizes.size() != boxes.size()))
    throw std::invalid_argument("is_small_object: need one frame size or one per frame");
  SizeStatistics s;
  std::size_t count = 0;
  for (std::size_t t = 0; t < boxes.size(); ++t) {
    if (!absent.empty() && absent[t]) continue;
    const auto& fsz = frame_sizes.size() == 1 ? frame_sizes[0] : frame_sizes[t];
    s.mean_size += std::sqrt(boxes[t].area());
    s.mean_relative_size += boxes[t].area() / static_cast<double>(fsz[0] * fsz[1]);
    ++count;
  }
  if (count == 0) throw std::invalid_argument("is_small_object: no visible frames");
  s.mean_size /= static_cast<double>(count);
  s.mean_relative_size /= static_cast<double>(count);
  s.small = classify_small(s.mean_size, s.mean_relative_size);
  return s;
}

SizeStatistics is_small_object(const SequenceAnnotation& seq) {
  std::vector<std::array<std::size_t, 2>> sizes;
  sizes.reserve(seq.size());
  for (const auto& f : seq.frames) sizes.push_back(png_dimensions(f));
  return is_small_object(seq.boxes, seq.absent, sizes);
}

ValidationReport validate_dataset(const fs::path& root) {
  ValidationReport report;
  if (!fs::is_directory(root)) {
    report.errors.push_back(root.string() + ": not a directory");
    return report;
  }
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) report.errors.push_back(root.string() + ": no sequences");
  for (const auto& dir : dirs) {
    try {
      SequenceAnnotation seq = load_sequence(dir);
      seq.check();
      SequenceReport r;
      r.id = seq.id;
      r.frames = seq.size();
      r.visible = static_cast<std::size_t>(std::count(seq.absent.begin(), seq.absent.end(), 0));
      if (r.visible > 0) r.size = is_small_object(seq);
      r.relative_speed = average_relative_speed(seq);
      report.sequences.push_back(r);
    } catch (const std::exception& e) {
      report.errors.emplace_back(e.what());
    }
  }
  return report;
}

}  // namespace cost
