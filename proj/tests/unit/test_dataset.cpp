#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cost/dataset.hpp"
#include "cost/synth.hpp"
#include "fixtures.hpp"

using namespace cost;
namespace fs = std::filesystem;

namespace {

SequenceAnnotation two_frames(BoundingBox a, BoundingBox b, double dt = 1.0) {
  SequenceAnnotation s;
  s.id = "pair";
  s.frames = {"0.png", "1.png"};
  s.boxes = {a, b};
  s.absent = {0, 0};
  s.timestamps = {0.0, dt};
  return s;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Two 4x3 frames with hand-written annotation files.
fs::path write_fixture(const fs::path& root) {
  const fs::path dir = root / "seq_a";
  fs::create_directories(dir / "frames");
  RgbImage img(4, 3);
  write_png(dir / "frames" / "000000.png", img);
  write_png(dir / "frames" / "000001.png", img);
  write_file(dir / "groundtruth.txt", "1,1,2,1\n0.5,0.25,1.5,2\n");
  write_file(dir / "absent.txt", "0\n1\n");
  write_file(dir / "timestamps.txt", "0.0\n0.04\n");
  write_file(dir / "language.txt", "the small red box\n");
  write_file(dir / "attributes.txt", "1,0,0,0,0,0,0,1,0,0,0,0,high,0,0,0,short\n");
  return dir;
}

}  // namespace

TEST_SUITE("benchmark-suite") {
  TEST_CASE("relative speed examples") {
    CHECK(relative_speed(two_frames({0, 0, 10, 10}, {0, 0, 10, 10}), 1) == 0.0);
    CHECK(relative_speed(two_frames({0, 0, 10, 10}, {20, 0, 10, 10}), 1) == doctest::Approx(2.0).epsilon(1e-12));
    // sizes 4 and 9: geometric mean 6, displacement 12, dt 2
    const auto s = two_frames(BoundingBox::from_center(0, 0, 4, 4), BoundingBox::from_center(12, 0, 9, 9), 2.0);
    CHECK(relative_speed(s, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(average_relative_speed(s).value() == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("relative speed is invariant under uniform scaling") {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
      const BoundingBox a{rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(1, 40), rng.uniform(1, 40)};
      const BoundingBox b{rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(1, 40), rng.uniform(1, 40)};
      const double c = rng.uniform(0.1, 10.0);
      const double base = relative_speed(two_frames(a, b), 1);
      const double scaled = relative_speed(two_frames({a.x * c, a.y * c, a.w * c, a.h * c}, {b.x * c, b.y * c, b.w * c, b.h * c}), 1);
      CHECK(scaled == doctest::Approx(base).epsilon(1e-12));
    }
  }

  TEST_CASE("relative speed errors") {
    auto s = two_frames({0, 0, 10, 10}, {5, 0, 10, 10});
    CHECK_THROWS_AS(relative_speed(s, 0), std::invalid_argument);
    s.absent[1] = 1;
    CHECK_THROWS_AS(relative_speed(s, 1), std::invalid_argument);
    CHECK_FALSE(average_relative_speed(s).has_value());
    CHECK_THROWS_AS(relative_speed(two_frames({0, 0, 0, 10}, {5, 0, 10, 10}), 1), std::invalid_argument);
  }

  TEST_CASE("small-object examples") {
    const double side = 13.8;
    const auto vl = is_small_object({BoundingBox{100, 100, side, side}}, {0}, {{1280, 720}});
    CHECK(vl.small);
    CHECK(vl.mean_size == doctest::Approx(13.8));
    CHECK(vl.mean_relative_size == doctest::Approx(13.8 * 13.8 / (1280.0 * 720.0)));
    CHECK_FALSE(is_small_object({BoundingBox{0, 0, 67.6, 67.6}}, {0}, {{640, 480}}).small);
    CHECK_FALSE(is_small_object({BoundingBox{0, 0, 67.6, 67.6}}, {0}, {{1280, 720}}).small);
    // 21 px but 2% of a tiny frame: both conditions are required
    const auto tiny = is_small_object({BoundingBox{0, 0, 21, 21}}, {0}, {{150, 147}});
    CHECK(tiny.mean_relative_size == doctest::Approx(0.02));
    CHECK_FALSE(tiny.small);
    CHECK(classify_small(21.9, 0.0099));
    CHECK_FALSE(classify_small(22.0, 0.001));
    CHECK_FALSE(classify_small(5.0, 0.01));
    // absent frames are left out of the averages
    const auto mixed = is_small_object({BoundingBox{0, 0, 10, 10}, BoundingBox{0, 0, 90, 90}}, {0, 1}, {{1000, 1000}});
    CHECK(mixed.mean_size == doctest::Approx(10.0));
    CHECK_THROWS_AS(is_small_object({BoundingBox{0, 0, 1, 1}}, {1}, {{10, 10}}), std::invalid_argument);
  }

  TEST_CASE("attribute lines") {
    const AttributeSet a = AttributeSet::parse("1,0,0,0,0,0,0,1,0,0,0,0,low,0,0,0,long");
    CHECK(a.get(Attribute::CM) == 1);
    CHECK(a.get(Attribute::SD) == 1);
    CHECK(a.get(Attribute::BRI) == 0);
    CHECK(a.get(Attribute::LEN) == 2);
    CHECK(a.label(Attribute::LEN) == "LEN=long");
    CHECK(a.label(Attribute::FM).empty());
    CHECK(AttributeSet::parse(a.to_line()) == a);
    CHECK_THROWS_AS(AttributeSet::parse("1,0,0"), DatasetError);
    CHECK_THROWS_AS(AttributeSet::parse("2,0,0,0,0,0,0,1,0,0,0,0,0,0,0,0,0"), DatasetError);
    CHECK_THROWS_AS(AttributeSet::parse("0,0,0,0,0,0,0,1,0,0,0,0,dim,0,0,0,0"), DatasetError);
    CHECK(brightness_level(83) == 0);
    CHECK(brightness_level(100) == 1);
    CHECK(brightness_level(120) == 2);
    CHECK(length_level(600) == 0);
    CHECK(length_level(601) == 1);
    CHECK(length_level(1801) == 2);
  }

  TEST_CASE("hand-built two-frame fixture parses exactly") {
    fixtures::TempDir tmp("fixture");
    const fs::path dir = write_fixture(tmp.path());
    const SequenceAnnotation s = load_sequence(dir);
    CHECK(s.id == "seq_a");
    REQUIRE(s.size() == 2);
    CHECK(s.boxes[0] == BoundingBox{1, 1, 2, 1});
    CHECK(s.boxes[1] == BoundingBox{0.5, 0.25, 1.5, 2});
    CHECK(s.absent == std::vector<int>{0, 1});
    CHECK(s.timestamps == std::vector<double>{0.0, 0.04});
    CHECK(s.description == "the small red box");
    CHECK(s.attributes.get(Attribute::CM) == 1);
    CHECK(s.attributes.get(Attribute::BRI) == 2);
    CHECK(s.frames[1].filename() == "000001.png");
    CHECK(s.load_frame(0).width == 4);

    write_file(dir / "groundtruth.txt", "1,1,2,1\n");
    try {
      load_sequence(dir);
      FAIL("truncated groundtruth accepted");
    } catch (const DatasetError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("groundtruth.txt") != std::string::npos);
      CHECK(msg.find("expected 2") != std::string::npos);
    }
    write_file(dir / "groundtruth.txt", "1,1,2,1\n1,x,2,1\n");
    CHECK_THROWS_WITH_AS(load_sequence(dir), doctest::Contains("groundtruth.txt:2"), DatasetError);
    write_file(dir / "groundtruth.txt", "1,1,2,1\n1,1,2,1\n");
    write_file(dir / "timestamps.txt", "1\n0.5\n");
    CHECK_THROWS_WITH_AS(load_sequence(dir), doctest::Contains("timestamps.txt:2"), DatasetError);

    const ValidationReport report = validate_dataset(tmp.path());
    CHECK_FALSE(report.ok());
    CHECK(report.errors.size() == 1);
  }

  TEST_CASE("synthetic generation") {
    fixtures::TempDir tmp("synth");
    SynthConfig c;
    c.sequences = 3;
    c.sequence_length = 8;
    c.distractors = 1;
    c.occlusion_rate = 1.0;
    c.seed = 5;
    const auto written = generate_synthetic(c, tmp.path() / "a");
    generate_synthetic(c, tmp.path() / "b");
    REQUIRE(written.size() == 3);
    for (const auto& entry : fs::recursive_directory_iterator(tmp.path() / "a")) {
      if (!entry.is_regular_file()) continue;
      const fs::path other = tmp.path() / "b" / fs::relative(entry.path(), tmp.path() / "a");
      REQUIRE(fs::exists(other));
      CHECK(slurp(entry.path()) == slurp(other));
    }
    const ValidationReport report = validate_dataset(tmp.path() / "a");
    CHECK(report.ok());
    CHECK(report.sequences.size() == 3);
    const auto loaded = load_dataset(tmp.path() / "a");
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(loaded[i].boxes == written[i].boxes);
      CHECK(loaded[i].description == written[i].description);
      CHECK(loaded[i].attributes.get(Attribute::SD) == 1);
      CHECK(loaded[i].description.find("moving") != std::string::npos);
    }
    c.seed = 6;
    CHECK(render_sequence(c, 0).annotation.boxes != written[0].boxes);
  }

  TEST_CASE("generic regime speed is calibrated") {
    SynthConfig c;
    c.sequences = 20;
    c.sequence_length = 30;
    c.seed = 9;
    double total = 0.0;
    for (std::size_t i = 0; i < c.sequences; ++i) total += average_relative_speed(render_sequence(c, i).annotation).value();
    const double mean = total / static_cast<double>(c.sequences);
    CHECK(mean >= 0.4);
    CHECK(mean <= 1.2);
    c.regime = SpeedRegime::HighSpeed;
    double fast = 0.0;
    for (std::size_t i = 0; i < c.sequences; ++i) fast += average_relative_speed(render_sequence(c, i).annotation).value();
    CHECK(fast / static_cast<double>(c.sequences) >= 3.0 * mean);
  }

  TEST_CASE("a stationary target keeps its box") {
    SynthConfig c;
    c.generic_speed = 0.0;
    c.size_variation = 0.0;
    c.sequence_length = 12;
    c.seed = 4;
    const auto seq = render_sequence(c, 0).annotation;
    for (const auto& b : seq.boxes) CHECK(b == seq.boxes[0]);
    CHECK(average_relative_speed(seq).value() == 0.0);
  }

  TEST_CASE("synth config validation") {
    SynthConfig c;
    CHECK_NOTHROW(c.validate());
    c.frame_width = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = SynthConfig{};
    c.generic_speed = -0.1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = SynthConfig{};
    c.size_variation = 1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    CHECK(parse_regime("high-speed") == SpeedRegime::HighSpeed);
    CHECK_THROWS_AS(parse_regime("fast"), std::invalid_argument);
  }
}
