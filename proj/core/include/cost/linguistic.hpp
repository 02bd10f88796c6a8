#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cost/transformer.hpp"

namespace cost {

struct LinguisticConfig {
  std::size_t vocab_size = 4096;
  std::size_t max_words = 18;  ///< K; sequences hold K + 2 tokens
  std::size_t width = 64;      ///< C_l
  std::size_t layers = 2;
  std::size_t num_heads = 4;
  std::size_t ffn_hidden = 128;
  double dropout = 0.1;

  static LinguisticConfig paper();

  std::size_t sequence_length() const { return max_words + 2; }  ///< N_l
  void validate() const;
};

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kClsId = 1;
inline constexpr std::size_t kSepId = 2;
inline constexpr std::size_t kFirstWordId = 3;

struct LanguageTokens {
  std::vector<std::size_t> ids;  ///< length N_l
  std::vector<int> mask;         ///< 1 for [CLS], words and [SEP]; 0 for padding

  std::size_t real_length() const;
};

/// Lowercased ASCII word split; every non-alphanumeric byte separates words.
std::vector<std::string> split_words(std::string_view text);
/// Bucket id of a lowercased word in the hashed vocabulary.
std::size_t word_id(std::string_view word, std::size_t vocab_size);
/// [CLS] w_1 .. w_k [SEP] followed by zero padding to K + 2; words beyond K are dropped.
LanguageTokens tokenize(std::string_view description, const LinguisticConfig& config);

class LinguisticBranch {
 public:
  LinguisticBranch() = default;
  LinguisticBranch(const LinguisticConfig& config, Rng& rng);

  /// F^l_0 as [N_l x C_l]: mean of every encoder layer's output.
  Tensor forward(const LanguageTokens& tokens, const ForwardContext& ctx) const;
  /// Same computation for any id sequence no longer than N_l.
  Tensor encode(const std::vector<std::size_t>& ids, const std::vector<int>& mask, const ForwardContext& ctx) const;
  /// Token + segment + position embeddings.
  Tensor embed(const std::vector<std::size_t>& ids) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  LinguisticConfig config;
  Tensor token_embedding;     ///< [vocab x C_l]
  Tensor segment_embedding;   ///< [2 x C_l]; single-sentence inputs use row 0
  Tensor position_embedding;  ///< [N_l x C_l]
  std::vector<EncoderBlock> blocks;
};

}  // namespace cost
