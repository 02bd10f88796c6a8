#pragma once

#include <cstddef>

#include "cost/layers.hpp"

namespace cost {

struct AttentionConfig {
  std::size_t d_model = 64;
  std::size_t num_heads = 4;
  std::size_t ffn_hidden = 128;
  double dropout = 0.1;

  std::size_t d_k() const { return d_model / num_heads; }
  /// Throws std::invalid_argument unless extents are positive and d_model % num_heads == 0.
  void validate() const;
};

/// softmax(Q K^T / sqrt(d_k) + mask) V. `key_mask`, when defined, is an
/// additive row of length Lk holding 0 for visible keys and -inf for hidden ones.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& key_mask = {});

/// The attention weights alone, [Lq x Lk].
Tensor attention_weights(const Tensor& q, const Tensor& k, const Tensor& key_mask = {});

/// Builds the additive key mask from a 0/1 visibility vector.
Tensor key_padding_mask(const std::vector<int>& visible);

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(const AttentionConfig& config, Rng& rng);

  /// Heads use column blocks of the shared W^Q/W^K/W^V; outputs are
  /// concatenated and projected by W^O.
  Tensor forward(const Tensor& query, const Tensor& key, const Tensor& value, const Tensor& key_mask = {}) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  Linear wq, wk, wv, wo;
  std::size_t num_heads = 1;
};

class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(const AttentionConfig& config, Rng& rng);

  Tensor forward(const Tensor& x, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  Linear fc1, fc2;
  double dropout = 0.0;
};

/// Optional inputs of an encoder block. Undefined tensors mean "absent".
struct AttendOptions {
  Tensor cross{};      ///< key/value source; self-attention when undefined
  Tensor query_pos{};  ///< added to the query embedding
  Tensor key_pos{};    ///< added to the key embedding
  Tensor key_mask{};   ///< additive mask over keys
};

/// Post-norm block: X' = LN(X + MHA(X, X_kv)); out = LN(X' + FFN(X')).
class EncoderBlock {
 public:
  EncoderBlock() = default;
  EncoderBlock(const AttentionConfig& config, Rng& rng);

  Tensor forward(const Tensor& x, const AttendOptions& opts, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  AttentionConfig config;
  MultiHeadAttention attention;
  FeedForward ffn;
  LayerNorm norm1, norm2;
};

/// Fixed interleaved sin/cos table [length x d_model] with base 10000.
Tensor sine_positional_encoding(std::size_t length, std::size_t d_model);

}  // namespace cost
