#include <doctest.h>

#include <numeric>

#include "cost/linguistic.hpp"
#include "fixtures.hpp"
#include "gradient_suite.hpp"
#include "oracle.hpp"

using namespace cost;

namespace {

LinguisticConfig small_language(std::size_t layers = 2) {
  LinguisticConfig c;
  c.vocab_size = 97;
  c.max_words = 6;
  c.width = 8;
  c.layers = layers;
  c.num_heads = 2;
  c.ffn_hidden = 16;
  c.dropout = 0.0;
  return c;
}

}  // namespace

TEST_SUITE("linguistic-branch") {
  TEST_CASE("tokenize examples at paper length") {
    const LinguisticConfig paper = LinguisticConfig::paper();
    CHECK(paper.sequence_length() == 40);

    const LanguageTokens rc = tokenize("red car", paper);
    REQUIRE(rc.ids.size() == 40);
    CHECK(rc.ids[0] == kClsId);
    CHECK(rc.ids[1] == word_id("red", paper.vocab_size));
    CHECK(rc.ids[2] == word_id("car", paper.vocab_size));
    CHECK(rc.ids[3] == kSepId);
    for (std::size_t i = 4; i < 40; ++i) CHECK(rc.ids[i] == kPadId);
    CHECK(rc.real_length() == 4);

    const LanguageTokens empty = tokenize("", paper);
    CHECK(empty.ids[0] == kClsId);
    CHECK(empty.ids[1] == kSepId);
    CHECK(std::accumulate(empty.mask.begin(), empty.mask.end(), 0) == 2);

    std::string fifty;
    for (int i = 0; i < 50; ++i) fifty += "word" + std::to_string(i) + " ";
    const LanguageTokens t = tokenize(fifty, paper);
    CHECK(t.real_length() == 40);
    std::size_t words = 0;
    for (std::size_t i = 0; i < 40; ++i) words += t.ids[i] >= kFirstWordId;
    CHECK(words == 38);
    CHECK(t.ids[39] == kSepId);
  }

  TEST_CASE("word splitting and hashing") {
    CHECK(split_words("The RED-car, moving!") == std::vector<std::string>{"the", "red", "car", "moving"});
    CHECK(split_words("  ").empty());
    const LinguisticConfig c = small_language();
    CHECK(word_id("red", c.vocab_size) == word_id("red", c.vocab_size));
    for (const char* w : {"a", "red", "car", "zebra", "x1"}) {
      const auto id = word_id(w, c.vocab_size);
      CHECK(id >= kFirstWordId);
      CHECK(id < c.vocab_size);
    }
    CHECK(tokenize("Red Car", c).ids == tokenize("red car", c).ids);
  }

  TEST_CASE("one layer: the layer average is that layer's output") {
    Rng rng(1);
    LinguisticBranch b(small_language(1), rng);
    const LanguageTokens t = tokenize("blue square", b.config);
    const Tensor out = b.forward(t, {});
    const Tensor direct = b.blocks[0].forward(b.embed(t.ids), {.key_mask = key_padding_mask(t.mask)}, {});
    for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == direct.data()[i]);
  }

  TEST_CASE("output shape and determinism") {
    Rng rng(2);
    LinguisticBranch b(small_language(), rng);
    for (const char* text : {"", "x", "one two three four five six seven eight nine"}) {
      const Tensor out = b.forward(tokenize(text, b.config), {});
      CHECK(out.shape() == Shape{8, 8});
    }
    const Tensor a = b.forward(tokenize("the green ring", b.config), {});
    const Tensor c = b.forward(tokenize("the green ring", b.config), {});
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == c.data()[i]);
    CHECK_THROWS_AS(b.encode({1, 500, 2}, {1, 1, 1}, {}), std::out_of_range);
  }

  TEST_CASE("masked run equals the truncated unmasked run at real positions") {
    Rng rng(3);
    LinguisticBranch b(small_language(), rng);
    const LanguageTokens t = tokenize("a tiny yellow kite", b.config);
    const std::size_t real = t.real_length();
    const Tensor full = b.forward(t, {});
    const std::vector<std::size_t> ids(t.ids.begin(), t.ids.begin() + static_cast<long>(real));
    const Tensor truncated = b.encode(ids, std::vector<int>(real, 1), {});
    for (std::size_t r = 0; r < real; ++r)
      for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(full.at(r, c) - truncated.at(r, c)) < 1e-12);

    // Brute-force: explicit layer loop with padded keys removed.
    oracle::Mat x = oracle::from_tensor(b.embed(t.ids));
    oracle::Mat acc = oracle::zeros(x.size(), 8);
    for (const auto& block : b.blocks) {
      x = oracle::encoder(x, block, nullptr, nullptr, nullptr, t.mask);
      acc = oracle::add(acc, x);
    }
    for (auto& row : acc)
      for (double& v : row) v /= static_cast<double>(b.blocks.size());
    CHECK(oracle::max_abs_diff(acc, full) < 1e-9);
  }

  TEST_CASE("perturbing padded embeddings leaves real positions unchanged") {
    Rng rng(4);
    LinguisticBranch b(small_language(), rng);
    const LanguageTokens t = tokenize("red car", b.config);
    const Tensor before = b.forward(t, {});
    Tensor pad_row = b.token_embedding;
    for (std::size_t c = 0; c < 8; ++c) pad_row.mutable_data()[kPadId * 8 + c] += 10.0 * (c + 1);
    Tensor pos = b.position_embedding;
    for (std::size_t c = 0; c < 8; ++c) pos.mutable_data()[6 * 8 + c] -= 3.0;
    const Tensor after = b.forward(t, {});
    for (std::size_t r = 0; r < t.real_length(); ++r)
      for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(after.at(r, c) - before.at(r, c)) < 1e-12);
  }

  TEST_CASE("gradient check through the full branch") {
    for (const auto& c : gradsuite::cases()) {
      if (c.name != "linguistic branch") continue;
      const auto r = c.run();
      CAPTURE(r.worst);
      CHECK(r.max_rel_error < gradsuite::kTolerance);
    }
  }
}
