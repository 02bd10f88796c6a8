#pragma once

#include <array>
#include <span>
#include <vector>

#include "cost/transformer.hpp"

namespace cost {

enum class DenominatorMode {
  Standard,   ///< sum over every j, including the matched pair
  AsWritten,  ///< sum over j != i only (the printed indicator)
};

struct CoAConfig {
  double temperature = 0.5;
  std::size_t batch_size = 14;
  DenominatorMode mode = DenominatorMode::Standard;

  void validate() const;
};

/// Projected, pooled embeddings of one sample (both width C_p).
struct EmbeddingPair {
  Tensor visual;
  Tensor language;
};

/// a.b / (|a| |b|). Throws std::invalid_argument for a zero-norm input or length mismatch.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Differentiable pairwise cosine similarity of the rows of a [N x C] and b [M x C].
Tensor cosine_similarity_matrix(const Tensor& a, const Tensor& b);

/// Vision-to-language InfoNCE summed over the batch; rows of `visual` and
/// `language` with equal index are positives.
Tensor infonce_v2l(const Tensor& visual, const Tensor& language, const CoAConfig& config);
/// Language-to-vision mirror of infonce_v2l.
Tensor infonce_l2v(const Tensor& visual, const Tensor& language, const CoAConfig& config);
/// 0.5 * mean over the batch of the per-sample v2l + l2v terms.
Tensor coa_loss(const Tensor& visual, const Tensor& language, const CoAConfig& config);

Tensor infonce_v2l(std::span<const EmbeddingPair> batch, const CoAConfig& config);
Tensor infonce_l2v(std::span<const EmbeddingPair> batch, const CoAConfig& config);
Tensor coa_loss(std::span<const EmbeddingPair> batch, const CoAConfig& config);

/// InfoNCE over an explicit similarity matrix (row i = anchor i); the building
/// block shared by both directions. `sims` is used as-is, before temperature.
Tensor infonce_from_similarities(const Tensor& sims, const CoAConfig& config);

/// Masked mean over token rows: [N x C] -> [C].
Tensor mean_pool(const Tensor& tokens, const std::vector<int>& mask = {});

/// The two CoA projections g_v, g_l. Used only in training.
class ContrastiveProjection {
 public:
  ContrastiveProjection() = default;
  ContrastiveProjection(std::size_t visual_width, std::size_t language_width, std::size_t projected_width, Rng& rng);

  /// Mean-pools both token sets, then projects. Throws std::domain_error if a
  /// projected vector has zero norm.
  EmbeddingPair project(const Tensor& visual_tokens, const Tensor& language_tokens,
                        const std::vector<int>& language_mask = {}) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  Linear g_v, g_l;
};

struct FusionConfig {
  std::size_t width = 64;  ///< C_p
  std::size_t layers = 2;  ///< L
  std::size_t num_heads = 4;
  std::size_t ffn_hidden = 128;
  double dropout = 0.1;

  static FusionConfig paper();
  void validate() const;
};

enum class TokenKind { Visual, Language, Object };

/// Which fused positions are visual (with their normalized centres), language, or [OBJ].
struct IndexMap {
  std::size_t visual_count = 0;
  std::size_t language_count = 0;
  std::vector<std::array<double, 2>> visual_centers;

  std::size_t total() const { return visual_count + language_count + 1; }
  std::size_t object_index() const { return visual_count + language_count; }
  TokenKind kind(std::size_t i) const;
};

struct FusedTokens {
  Tensor tokens;  ///< [N_v' + N_l + 1 x C_p]
  IndexMap index;
};

/// Two per-modality projections, the learnable [OBJ] token, learnable
/// position embeddings and L self-attention encoder blocks.
class FusionTransformer {
 public:
  FusionTransformer() = default;
  FusionTransformer(const FusionConfig& config, std::size_t visual_width, std::size_t language_width,
                    std::vector<std::array<double, 2>> visual_centers, std::size_t language_count, Rng& rng);

  /// visual [N_v' x C_v'] and language [N_l x C_l] -> fused tokens.
  FusedTokens fuse(const Tensor& visual, const Tensor& language, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  FusionConfig config;
  IndexMap index;
  Linear proj_v, proj_l;
  Tensor obj_token;  ///< [1 x C_p]
  Tensor position;   ///< [N_v' + N_l + 1 x C_p]
  std::vector<EncoderBlock> blocks;
};

}  // namespace cost
