#include "cost/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "cost/rng.hpp"

namespace cost {

namespace fs = std::filesystem;

namespace {

struct Named {
  const char* name;
  std::array<double, 3> rgb;
};

constexpr std::array<Named, 8> kColors = {{{"red", {220, 40, 40}},
                                           {"green", {40, 200, 60}},
                                           {"blue", {50, 80, 230}},
                                           {"yellow", {230, 220, 40}},
                                           {"white", {245, 245, 245}},
                                           {"purple", {150, 60, 200}},
                                           {"orange", {240, 140, 30}},
                                           {"cyan", {40, 210, 220}}}};

constexpr std::array<Named, 5> kBackgrounds = {{{"grass", {70, 120, 50}},
                                                {"sand", {190, 170, 120}},
                                                {"water", {40, 80, 140}},
                                                {"asphalt", {90, 90, 95}},
                                                {"snow", {215, 220, 228}}}};

enum class Shape { Circle, Square, Triangle, Diamond };
constexpr std::array<const char*, 4> kShapeNames = {"circle", "square", "triangle", "diamond"};

bool inside(Shape s, double u, double v) {
  switch (s) {
    case Shape::Circle: return u * u + v * v <= 1.0;
    case Shape::Square: return true;
    case Shape::Triangle: return std::abs(u) <= 0.5 * (v + 1.0);
    case Shape::Diamond: return std::abs(u) + std::abs(v) <= 1.0;
  }
  return false;
}

struct Mover {
  Shape shape = Shape::Circle;
  std::array<double, 3> color{};
  double base_size = 10.0;
  double aspect = 1.0;
  double size_variation = 0.2;
  double size_period = 40.0;
  double size_phase = 0.0;
  double speed = 0.7;
  double cx = 0.0, cy = 0.0, heading = 0.0;

  double size_at(std::size_t t) const {
    return base_size * (1.0 + size_variation * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / size_period + size_phase));
  }
  BoundingBox box_at(std::size_t t) const {
    const double s = size_at(t);
    return BoundingBox::from_center(cx, cy, s * std::sqrt(aspect), s / std::sqrt(aspect));
  }
  /// Advances the centre by speed * size along a slowly turning heading,
  /// reflecting off the frame edges.
  void step(std::size_t t, double width, double height, Rng& rng) {
    heading += rng.normal(0.0, 0.15);
    const double s = std::sqrt(size_at(t) * size_at(t + 1));
    cx += speed * s * std::cos(heading);
    cy += speed * s * std::sin(heading);
    const BoundingBox b = box_at(t + 1);
    const double hw = 0.5 * b.w, hh = 0.5 * b.h;
    if (cx - hw < 0.0) { cx = 2.0 * hw - cx; heading = std::numbers::pi - heading; }
    if (cx + hw > width) { cx = 2.0 * (width - hw) - cx; heading = std::numbers::pi - heading; }
    if (cy - hh < 0.0) { cy = 2.0 * hh - cy; heading = -heading; }
    if (cy + hh > height) { cy = 2.0 * (height - hh) - cy; heading = -heading; }
    cx = std::clamp(cx, hw, width - hw);
    cy = std::clamp(cy, hh, height - hh);
  }
};

Mover make_mover(const SynthConfig& c, Rng& rng, double size_scale) {
  Mover m;
  m.shape = static_cast<Shape>(rng.below(kShapeNames.size()));
  m.base_size = c.target_size * size_scale * rng.uniform(0.85, 1.15);
  m.aspect = std::exp(rng.uniform(-0.35, 0.35));
  m.size_variation = c.size_variation;
  m.size_period = rng.uniform(30.0, 80.0);
  m.size_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  m.speed = c.relative_speed() * rng.uniform(0.85, 1.15);
  const double margin = 1.5 * m.base_size;
  const double w = static_cast<double>(c.frame_width), h = static_cast<double>(c.frame_height);
  m.cx = rng.uniform(std::min(margin, 0.5 * w), std::max(w - margin, 0.5 * w));
  m.cy = rng.uniform(std::min(margin, 0.5 * h), std::max(h - margin, 0.5 * h));
  m.heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return m;
}

/// Background with two low-frequency waves and per-pixel noise, as a float raster.
std::vector<double> make_background(const SynthConfig& c, const std::array<double, 3>& base, double lightness,
                                    Rng& rng) {
  const std::size_t w = c.frame_width, h = c.frame_height;
  std::vector<double> out(3 * w * h);
  const double f1 = rng.uniform(0.05, 0.15), f2 = rng.uniform(0.05, 0.15);
  const double p1 = rng.uniform(0.0, 6.28), p2 = rng.uniform(0.0, 6.28);
  const double tilt = rng.uniform(-1.0, 1.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double xd = static_cast<double>(x), yd = static_cast<double>(y);
      const double wave = 1.0 + 0.12 * std::sin(f1 * xd + tilt * f1 * yd + p1) + 0.08 * std::sin(f2 * yd - 0.5 * f2 * xd + p2);
      const double noise = rng.normal(0.0, 6.0);
      for (std::size_t ch = 0; ch < 3; ++ch) out[3 * (y * w + x) + ch] = base[ch] * lightness * wave + noise;
    }
  return out;
}

/// Draws a checker-textured shape with 3x3 supersampled coverage.
void draw(std::vector<double>& canvas, std::size_t width, std::size_t height, const BoundingBox& b, Shape shape,
          const std::array<double, 3>& color, double lightness) {
  const long x0 = std::max(0L, static_cast<long>(std::floor(b.x)));
  const long y0 = std::max(0L, static_cast<long>(std::floor(b.y)));
  const long x1 = std::min(static_cast<long>(width), static_cast<long>(std::ceil(b.right())));
  const long y1 = std::min(static_cast<long>(height), static_cast<long>(std::ceil(b.bottom())));
  for (long y = y0; y < y1; ++y)
    for (long x = x0; x < x1; ++x) {
      int covered = 0;
      double shade = 0.0;
      for (int sy = 0; sy < 3; ++sy)
        for (int sx = 0; sx < 3; ++sx) {
          const double px = static_cast<double>(x) + (sx + 0.5) / 3.0;
          const double py = static_cast<double>(y) + (sy + 0.5) / 3.0;
          const double u = 2.0 * (px - b.x) / b.w - 1.0;
          const double v = 2.0 * (py - b.y) / b.h - 1.0;
          if (u < -1.0 || u > 1.0 || v < -1.0 || v > 1.0 || !inside(shape, u, v)) continue;
          ++covered;
          const int cell = static_cast<int>(std::floor((u + 1.0) * 2.0)) + static_cast<int>(std::floor((v + 1.0) * 2.0));
          shade += cell % 2 ? 0.7 : 1.0;
        }
      if (!covered) continue;
      const double alpha = covered / 9.0;
      const double s = shade / covered;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double& dst = canvas[3 * (static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)) + ch];
        dst = (1.0 - alpha) * dst + alpha * color[ch] * s * lightness;
      }
    }
}

RgbImage quantize(const std::vector<double>& canvas, std::size_t w, std::size_t h) {
  RgbImage img(w, h);
  for (std::size_t i = 0; i < canvas.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(canvas[i]), 0L, 255L));
  return img;
}

std::string substitute(std::string text, const std::string& key, const std::string& value) {
  const std::string token = "{" + key + "}";
  for (std::size_t pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + value.size()))
    text.replace(pos, token.size(), value);
  return text;
}

Rng sequence_rng(std::uint64_t seed, std::size_t index) {
  Rng master(seed);
  Rng child = master.split();
  for (std::size_t i = 0; i < index; ++i) child = master.split();
  return child;
}

}  // namespace

std::string to_string(SpeedRegime r) { return r == SpeedRegime::HighSpeed ? "high-speed" : "generic"; }

SpeedRegime parse_regime(const std::string& s) {
  if (s == "generic") return SpeedRegime::Generic;
  if (s == "high-speed") return SpeedRegime::HighSpeed;
  throw std::invalid_argument("unknown speed regime '" + s + "' (expected generic or high-speed)");
}

void SynthConfig::validate() const {
  if (frame_width < 16 || frame_height < 16) throw std::invalid_argument("synth: frame size must be at least 16x16");
  if (!(target_size >= 2.0) || 3.0 * target_size > static_cast<double>(std::min(frame_width, frame_height)))
    throw std::invalid_argument("synth: target_size must be >= 2 and fit three times in the frame");
  if (!(generic_speed >= 0.0) || !(high_speed_factor > 0.0))
    throw std::invalid_argument("synth: generic_speed must be nonnegative and high_speed_factor positive");
  if (!(size_variation >= 0.0) || size_variation >= 1.0) throw std::invalid_argument("synth: size_variation must lie in [0, 1)");
  if (occlusion_rate < 0.0 || occlusion_rate > 1.0 || illumination_rate < 0.0 || illumination_rate > 1.0)
    throw std::invalid_argument("synth: rates must lie in [0, 1]");
  if (sequence_length < 2) throw std::invalid_argument("synth: sequence_length must be at least 2");
  if (sequences == 0) throw std::invalid_argument("synth: sequences must be positive");
}

SyntheticSequence render_sequence(const SynthConfig& c, std::size_t index) {
  c.validate();
  Rng rng = sequence_rng(c.seed, index);
  const std::size_t n = c.sequence_length;
  const double W = static_cast<double>(c.frame_width), H = static_cast<double>(c.frame_height);

  const std::size_t color = rng.below(kColors.size());
  const std::size_t background = rng.below(kBackgrounds.size());
  const double lightness = rng.uniform(0.55, 1.25);
  Mover target = make_mover(c, rng, 1.0);
  std::vector<Mover> distractors;
  for (std::size_t d = 0; d < c.distractors; ++d) {
    Mover m = make_mover(c, rng, 1.0);
    m.shape = target.shape;
    m.color = kColors[(color + 1 + rng.below(kColors.size() - 1)) % kColors.size()].rgb;
    distractors.push_back(m);
  }
  target.color = kColors[color].rgb;

  std::size_t occl_start = n, occl_len = 0;
  if (n >= 8 && rng.bernoulli(c.occlusion_rate)) {
    occl_len = 3 + rng.below(4);
    occl_start = n / 4 + rng.below(std::max<std::size_t>(1, n / 2 - occl_len));
  }
  double light_end = 1.0;
  const bool ramp = rng.bernoulli(c.illumination_rate);
  if (ramp) light_end = rng.bernoulli(0.5) ? 0.6 : 1.4;

  const std::vector<double> bg = make_background(c, kBackgrounds[background].rgb, lightness, rng);

  SyntheticSequence out;
  SequenceAnnotation& ann = out.annotation;
  char name[32];
  std::snprintf(name, sizeof name, "seq_%03zu", index);
  ann.id = name;
  double brightness = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double illum = 1.0 + (light_end - 1.0) * static_cast<double>(t) / static_cast<double>(n - 1);
    std::vector<double> canvas = bg;
    for (double& v : canvas) v *= illum;
    for (auto& d : distractors) draw(canvas, c.frame_width, c.frame_height, d.box_at(t), d.shape, d.color, lightness * illum);
    const bool hidden = t >= occl_start && t < occl_start + occl_len;
    if (!hidden) draw(canvas, c.frame_width, c.frame_height, target.box_at(t), target.shape, target.color, lightness * illum);
    out.frames.push_back(quantize(canvas, c.frame_width, c.frame_height));
    brightness += out.frames.back().mean_brightness();

    std::snprintf(name, sizeof name, "%06zu.png", t + 1);
    ann.frames.emplace_back(name);
    ann.boxes.push_back(hidden ? BoundingBox{} : target.box_at(t));
    ann.absent.push_back(hidden ? 1 : 0);
    ann.timestamps.push_back(static_cast<double>(t));
    if (t + 1 < n) {
      target.step(t, W, H, rng);
      for (auto& d : distractors) d.step(t, W, H, rng);
    }
  }

  std::string text = c.description_template;
  text = substitute(text, "color", kColors[color].name);
  text = substitute(text, "shape", kShapeNames[static_cast<std::size_t>(target.shape)]);
  text = substitute(text, "regime", c.regime == SpeedRegime::HighSpeed ? "rapidly" : "steadily");
  text = substitute(text, "background", kBackgrounds[background].name);
  ann.description = text;

  AttributeSet& a = ann.attributes;
  a.set(Attribute::FO, occl_len > 0);
  a.set(Attribute::SD, !distractors.empty());
  a.set(Attribute::IV, ramp);
  a.set(Attribute::NAO, 1);
  a.set(Attribute::BRI, brightness_level(brightness / static_cast<double>(n)));
  a.set(Attribute::LEN, length_level(n));
  const BoundingBox& first = ann.boxes.front();
  const double s0 = std::sqrt(first.area()), r0 = first.w / first.h;
  for (std::size_t t = 0; t < n; ++t) {
    if (ann.absent[t]) continue;
    const BoundingBox& b = ann.boxes[t];
    const double sr = std::sqrt(b.area()) / s0, ar = (b.w / b.h) / r0;
    if (sr < 0.5 || sr > 2.0) a.set(Attribute::SV, 1);
    if (ar < 0.5 || ar > 2.0) a.set(Attribute::ARV, 1);
    if (t > 0 && !ann.absent[t - 1]) {
      const BoundingBox& p = ann.boxes[t - 1];
      if (std::hypot(b.cx() - p.cx(), b.cy() - p.cy()) > std::sqrt(b.area())) a.set(Attribute::FM, 1);
    }
  }
  return out;
}

std::vector<SequenceAnnotation> generate_synthetic(const SynthConfig& c, const fs::path& out) {
  c.validate();
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw DatasetError(out.string() + ": cannot create output directory");
  std::vector<SequenceAnnotation> result;
  for (std::size_t i = 0; i < c.sequences; ++i) {
    SyntheticSequence seq = render_sequence(c, i);
    const fs::path dir = out / seq.annotation.id;
    fs::create_directories(dir / "frames", ec);
    if (ec) throw DatasetError((dir / "frames").string() + ": cannot create directory");
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
      const fs::path p = dir / "frames" / seq.annotation.frames[t];
      write_png(p, seq.frames[t]);
      seq.annotation.frames[t] = p;
    }
    write_annotation(dir, seq.annotation);
    result.push_back(std::move(seq.annotation));
  }
  return result;
}

}  // namespace cost
