#include "cost/linguistic.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <stdexcept>

namespace cost {

LinguisticConfig LinguisticConfig::paper() {
  LinguisticConfig c;
  c.vocab_size = 30522;
  c.max_words = 38;
  c.width = 768;
  c.layers = 12;
  c.num_heads = 12;
  c.ffn_hidden = 3072;
  return c;
}

void LinguisticConfig::validate() const {
  if (vocab_size <= kFirstWordId) throw std::invalid_argument("linguistic config: vocab_size too small");
  if (max_words == 0) throw std::invalid_argument("linguistic config: max_words must be positive");
  if (layers == 0) throw std::invalid_argument("linguistic config: at least one layer is required");
  AttentionConfig{width, num_heads, ffn_hidden, dropout}.validate();
}

std::size_t LanguageTokens::real_length() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::size_t word_id(std::string_view word, std::size_t vocab_size) {
  // FNV-1a, 64-bit
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : word) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return kFirstWordId + static_cast<std::size_t>(h % (vocab_size - kFirstWordId));
}

LanguageTokens tokenize(std::string_view description, const LinguisticConfig& config) {
  const std::size_t n = config.sequence_length();
  LanguageTokens t;
  t.ids.assign(n, kPadId);
  t.mask.assign(n, 0);
  const auto words = split_words(description);
  const std::size_t kept = std::min(words.size(), config.max_words);
  t.ids[0] = kClsId;
  t.mask[0] = 1;
  for (std::size_t i = 0; i < kept; ++i) {
    t.ids[i + 1] = word_id(words[i], config.vocab_size);
    t.mask[i + 1] = 1;
  }
  t.ids[kept + 1] = kSepId;
  t.mask[kept + 1] = 1;
  return t;
}

LinguisticBranch::LinguisticBranch(const LinguisticConfig& config_, Rng& rng) : config(config_) {
  config.validate();
  token_embedding = normal_init({config.vocab_size, config.width}, 0.02, rng);
  segment_embedding = normal_init({2, config.width}, 0.02, rng);
  position_embedding = normal_init({config.sequence_length(), config.width}, 0.02, rng);
  const AttentionConfig ac{config.width, config.num_heads, config.ffn_hidden, config.dropout};
  for (std::size_t i = 0; i < config.layers; ++i) blocks.emplace_back(ac, rng);
}

Tensor LinguisticBranch::embed(const std::vector<std::size_t>& ids) const {
  if (ids.empty() || ids.size() > config.sequence_length())
    throw ShapeError("linguistic branch: sequence length " + std::to_string(ids.size()) + " outside [1, " +
                     std::to_string(config.sequence_length()) + "]");
  for (auto id : ids)
    if (id >= config.vocab_size)
      throw std::out_of_range("linguistic branch: token id " + std::to_string(id) + " outside vocabulary of " +
                              std::to_string(config.vocab_size));
  const std::size_t zero = 0;
  Tensor tok = index_rows(token_embedding, ids);
  Tensor seg = index_rows(segment_embedding, std::span<const std::size_t>(&zero, 1));
  Tensor pos = slice(position_embedding, 0, 0, ids.size());
  return add(add(tok, seg), pos);
}

Tensor LinguisticBranch::encode(const std::vector<std::size_t>& ids, const std::vector<int>& mask,
                                const ForwardContext& ctx) const {
  if (mask.size() != ids.size()) throw ShapeError("linguistic branch: mask length differs from id length");
  Tensor x = dropout(embed(ids), config.dropout, ctx);
  const Tensor key_mask = key_padding_mask(mask);
  std::vector<Tensor> layer_outputs;
  layer_outputs.reserve(blocks.size());
  for (const auto& block : blocks) {
    x = block.forward(x, {.key_mask = key_mask}, ctx);
    layer_outputs.push_back(x);
  }
  if (layer_outputs.size() == 1) return layer_outputs.front();
  Tensor acc = layer_outputs.front();
  for (std::size_t i = 1; i < layer_outputs.size(); ++i) acc = add(acc, layer_outputs[i]);
  return mul_scalar(acc, 1.0 / static_cast<double>(layer_outputs.size()));
}

Tensor LinguisticBranch::forward(const LanguageTokens& tokens, const ForwardContext& ctx) const {
  if (tokens.ids.size() != config.sequence_length())
    throw ShapeError("linguistic branch: expected " + std::to_string(config.sequence_length()) + " tokens, got " +
                     std::to_string(tokens.ids.size()));
  return encode(tokens.ids, tokens.mask, ctx);
}

void LinguisticBranch::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".token_embedding", token_embedding});
  out.push_back({prefix + ".segment_embedding", segment_embedding});
  out.push_back({prefix + ".position_embedding", position_embedding});
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(prefix + ".layer" + std::to_string(i), out);
}

}  // namespace cost
