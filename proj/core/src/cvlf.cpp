#include "cost/cvlf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cost {

void CoAConfig::validate() const {
  if (!(temperature > 0.0)) throw std::invalid_argument("CoA: temperature must be positive");
  if (batch_size < 2) throw std::invalid_argument("CoA: batch size must be at least 2");
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine_similarity: zero-norm input");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

namespace {

Tensor normalize_rows(const Tensor& x) {
  for (std::size_t r = 0; r < x.dim(0); ++r) {
    double n = 0.0;
    for (std::size_t c = 0; c < x.dim(1); ++c) n += x.at(r, c) * x.at(r, c);
    if (n == 0.0) throw std::invalid_argument("cosine similarity: row " + std::to_string(r) + " has zero norm");
  }
  return div(x, sqrt(sum(square(x), 1, true)));
}

void check_batch(const Tensor& visual, const Tensor& language) {
  if (visual.rank() != 2 || language.rank() != 2 || visual.shape() != language.shape())
    throw ShapeError("InfoNCE: visual " + shape_str(visual.shape()) + " and language " +
                     shape_str(language.shape()) + " must both be [N x C_p]");
  if (visual.dim(0) < 2)
    throw std::invalid_argument("InfoNCE: batch size must be at least 2, got " + std::to_string(visual.dim(0)));
}

Tensor stack(std::span<const EmbeddingPair> batch, bool visual) {
  std::vector<Tensor> rows;
  rows.reserve(batch.size());
  for (const auto& p : batch) {
    const Tensor& t = visual ? p.visual : p.language;
    rows.push_back(reshape(t, {1, t.numel()}));
  }
  return concat(rows, 0);
}

}  // namespace

Tensor cosine_similarity_matrix(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    throw ShapeError("cosine_similarity_matrix: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  return matmul(normalize_rows(a), transpose(normalize_rows(b)));
}

Tensor infonce_from_similarities(const Tensor& sims, const CoAConfig& config) {
  config.validate();
  const std::size_t n = sims.dim(0);
  if (sims.rank() != 2 || sims.dim(1) != n || n < 2)
    throw std::invalid_argument("InfoNCE: similarity matrix must be square with N >= 2, got " +
                                shape_str(sims.shape()));
  const Tensor logits = mul_scalar(sims, 1.0 / config.temperature);
  std::vector<double> eye(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
  const Tensor diag = Tensor::from({n, n}, eye);
  const Tensor positives = sum(mul(logits, diag), 1);
  Tensor denom_logits = logits;
  if (config.mode == DenominatorMode::AsWritten) {
    std::vector<double> mask(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) mask[i * n + i] = -std::numeric_limits<double>::infinity();
    denom_logits = add(logits, Tensor::from({n, n}, std::move(mask)));
  }
  return sum(sub(logsumexp(denom_logits, 1), positives));
}

Tensor infonce_v2l(const Tensor& visual, const Tensor& language, const CoAConfig& config) {
  check_batch(visual, language);
  return infonce_from_similarities(cosine_similarity_matrix(visual, language), config);
}

Tensor infonce_l2v(const Tensor& visual, const Tensor& language, const CoAConfig& config) {
  check_batch(visual, language);
  return infonce_from_similarities(cosine_similarity_matrix(language, visual), config);
}

Tensor coa_loss(const Tensor& visual, const Tensor& language, const CoAConfig& config) {
  check_batch(visual, language);
  const Tensor sims = cosine_similarity_matrix(visual, language);
  const Tensor v2l = infonce_from_similarities(sims, config);
  const Tensor l2v = infonce_from_similarities(transpose(sims), config);
  return mul_scalar(add(v2l, l2v), 0.5 / static_cast<double>(visual.dim(0)));
}

Tensor infonce_v2l(std::span<const EmbeddingPair> batch, const CoAConfig& config) {
  return infonce_v2l(stack(batch, true), stack(batch, false), config);
}

Tensor infonce_l2v(std::span<const EmbeddingPair> batch, const CoAConfig& config) {
  return infonce_l2v(stack(batch, true), stack(batch, false), config);
}

Tensor coa_loss(std::span<const EmbeddingPair> batch, const CoAConfig& config) {
  return coa_loss(stack(batch, true), stack(batch, false), config);
}

Tensor mean_pool(const Tensor& tokens, const std::vector<int>& mask) {
  if (tokens.rank() != 2) throw ShapeError("mean_pool: expected [N x C], got " + shape_str(tokens.shape()));
  if (mask.empty()) return mean(tokens, 0);
  if (mask.size() != tokens.dim(0)) throw ShapeError("mean_pool: mask length differs from token count");
  std::vector<double> w(mask.size());
  double count = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    w[i] = mask[i] ? 1.0 : 0.0;
    count += w[i];
  }
  if (count == 0.0) throw std::invalid_argument("mean_pool: mask selects no tokens");
  for (double& v : w) v /= count;
  const std::size_t n = w.size();
  return reshape(matmul(Tensor::from({1, n}, std::move(w)), tokens), {tokens.dim(1)});
}

ContrastiveProjection::ContrastiveProjection(std::size_t visual_width, std::size_t language_width,
                                             std::size_t projected_width, Rng& rng)
    : g_v(visual_width, projected_width, rng), g_l(language_width, projected_width, rng) {}

EmbeddingPair ContrastiveProjection::project(const Tensor& visual_tokens, const Tensor& language_tokens,
                                             const std::vector<int>& language_mask) const {
  const Tensor pv = mean_pool(visual_tokens);
  const Tensor pl = mean_pool(language_tokens, language_mask);
  EmbeddingPair pair{reshape(g_v.forward(reshape(pv, {1, pv.numel()})), {g_v.out_features()}),
                     reshape(g_l.forward(reshape(pl, {1, pl.numel()})), {g_l.out_features()})};
  auto is_zero = [](const Tensor& t) {
    for (double v : t.data())
      if (v != 0.0) return false;
    return true;
  };
  if (is_zero(pair.visual) || is_zero(pair.language))
    throw std::domain_error("CoA projection produced a zero vector");
  return pair;
}

void ContrastiveProjection::collect(const std::string& prefix, ParameterList& out) const {
  g_v.collect(prefix + ".g_v", out);
  g_l.collect(prefix + ".g_l", out);
}

FusionConfig FusionConfig::paper() {
  FusionConfig c;
  c.width = 256;
  c.layers = 6;
  c.num_heads = 8;
  c.ffn_hidden = 2048;
  return c;
}

void FusionConfig::validate() const { AttentionConfig{width, num_heads, ffn_hidden, dropout}.validate(); }

TokenKind IndexMap::kind(std::size_t i) const {
  if (i < visual_count) return TokenKind::Visual;
  if (i < visual_count + language_count) return TokenKind::Language;
  if (i == object_index()) return TokenKind::Object;
  throw std::out_of_range("index map: position " + std::to_string(i) + " beyond " + std::to_string(total()));
}

FusionTransformer::FusionTransformer(const FusionConfig& config_, std::size_t visual_width,
                                     std::size_t language_width, std::vector<std::array<double, 2>> visual_centers,
                                     std::size_t language_count, Rng& rng)
    : config(config_) {
  config.validate();
  index.visual_count = visual_centers.size();
  index.language_count = language_count;
  index.visual_centers = std::move(visual_centers);
  proj_v = Linear(visual_width, config.width, rng);
  proj_l = Linear(language_width, config.width, rng);
  obj_token = normal_init({1, config.width}, 0.02, rng);
  position = normal_init({index.total(), config.width}, 0.02, rng);
  const AttentionConfig ac{config.width, config.num_heads, config.ffn_hidden, config.dropout};
  for (std::size_t i = 0; i < config.layers; ++i) blocks.emplace_back(ac, rng);
}

FusedTokens FusionTransformer::fuse(const Tensor& visual, const Tensor& language, const ForwardContext& ctx) const {
  if (visual.rank() != 2 || visual.dim(0) != index.visual_count || language.rank() != 2 ||
      language.dim(0) != index.language_count)
    throw ShapeError("fusion: expected " + std::to_string(index.visual_count) + " visual and " +
                     std::to_string(index.language_count) + " language tokens, got " + shape_str(visual.shape()) +
                     " and " + shape_str(language.shape()));
  Tensor x = add(concat({proj_v.forward(visual), proj_l.forward(language), obj_token}, 0), position);
  for (const auto& block : blocks) x = block.forward(x, {.query_pos = position, .key_pos = position}, ctx);
  return {x, index};
}

void FusionTransformer::collect(const std::string& prefix, ParameterList& out) const {
  proj_v.collect(prefix + ".proj_v", out);
  proj_l.collect(prefix + ".proj_l", out);
  out.push_back({prefix + ".obj_token", obj_token});
  out.push_back({prefix + ".position", position});
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(prefix + ".layer" + std::to_string(i), out);
}

}  // namespace cost
