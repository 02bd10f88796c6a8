#include <doctest.h>

#include <fstream>

#include "cost/config.hpp"
#include "fixtures.hpp"

using namespace cost;

TEST_SUITE("benchmark-suite") {
  TEST_CASE("defaults validate and round trip through text") {
    const CostConfig c;
    CHECK_NOTHROW(c.validate());
    const std::string text = to_text(c);
    CHECK(to_text(parse_config(text)) == text);
    std::size_t lines = 0;
    for (char ch : text) lines += ch == '\n';
    CHECK(lines == config_keys().size());
  }

  TEST_CASE("parsing values, comments and derived runtime sizes") {
    const CostConfig c = parse_config(
        "# toy run\n"
        "visual.search_size = 64   # smaller crops\n"
        "visual.template_size = 32\n"
        "visual.post_crop = 0\n"
        "linguistic.max_words = 14\n"
        "train.learning_rate = 2e-3\n"
        "train.use_coa = false\n"
        "synth.regime = high-speed\n"
        "runtime.window_weight = 0\n");
    CHECK(c.model.visual.search_size == 64);
    CHECK(c.train.learning_rate == 2e-3);
    CHECK_FALSE(c.train.use_coa);
    CHECK(c.synth.regime == SpeedRegime::HighSpeed);
    CHECK(c.runtime.window_weight == 0.0);
    CHECK(c.runtime.search_resize == 64);
    CHECK(c.runtime.window_side * c.runtime.window_side == c.model.fused_length());
    const CostConfig again = parse_config(to_text(c));
    CHECK(to_text(again) == to_text(c));
  }

  TEST_CASE("errors carry the source and line") {
    CHECK_THROWS_WITH_AS(parse_config("train.seed = 1\nvisual.colour = 3\n", "a.cfg"),
                         doctest::Contains("a.cfg:2: unknown key 'visual.colour'"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("train.seed = 1\n\ntrain.seed = 2\n", "b.cfg"),
                         doctest::Contains("b.cfg:3: duplicate key"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("train.batch_size = many\n"), doctest::Contains("<config>:1"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("just words\n"), doctest::Contains(":1: expected key = value"), ConfigError);
    CHECK_THROWS_AS(parse_config("model.preset = huge\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("visual.search_size = 36\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/cost.cfg"), ConfigError);
  }

  TEST_CASE("paper preset") {
    const CostConfig c = parse_config("model.preset = paper\n");
    CHECK(c.model.visual.search_tokens() == 1024);
    CHECK(c.model.fused_length() == 441);
    CHECK(c.runtime.window_side == 21);
    CHECK(c.runtime.search_resize == 256);
  }

  TEST_CASE("load from file") {
    fixtures::TempDir tmp("config");
    const auto path = tmp.path() / "run.cfg";
    std::ofstream(path) << "train.epochs = 3\n";
    CHECK(load_config(path).train.epochs == 3);
  }
}
