#include "cost/transformer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cost {

void AttentionConfig::validate() const {
  if (d_model == 0 || num_heads == 0 || ffn_hidden == 0)
    throw std::invalid_argument("attention config: extents must be positive");
  if (d_model % num_heads != 0)
    throw std::invalid_argument("attention config: d_model " + std::to_string(d_model) +
                                " not divisible by num_heads " + std::to_string(num_heads));
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("attention config: dropout must be in [0, 1)");
}

Tensor attention_weights(const Tensor& q, const Tensor& k, const Tensor& key_mask) {
  if (q.rank() != 2 || k.rank() != 2 || q.dim(1) != k.dim(1))
    throw ShapeError("attention: query " + shape_str(q.shape()) + " and key " + shape_str(k.shape()) +
                     " disagree on d_k");
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  Tensor logits = mul_scalar(matmul(q, transpose(k)), scale);
  if (key_mask.defined()) logits = add(logits, key_mask);
  return softmax(logits, 1);
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& key_mask) {
  if (v.rank() != 2 || v.dim(0) != k.dim(0))
    throw ShapeError("attention: key " + shape_str(k.shape()) + " and value " + shape_str(v.shape()) +
                     " lengths differ");
  return matmul(attention_weights(q, k, key_mask), v);
}

Tensor key_padding_mask(const std::vector<int>& visible) {
  std::vector<double> m(visible.size());
  for (std::size_t i = 0; i < visible.size(); ++i)
    m[i] = visible[i] ? 0.0 : -std::numeric_limits<double>::infinity();
  return Tensor::from({visible.size()}, std::move(m));
}

MultiHeadAttention::MultiHeadAttention(const AttentionConfig& config, Rng& rng)
    : wq(config.d_model, config.d_model, rng),
      wk(config.d_model, config.d_model, rng),
      wv(config.d_model, config.d_model, rng),
      wo(config.d_model, config.d_model, rng),
      num_heads(config.num_heads) {
  config.validate();
}

Tensor MultiHeadAttention::forward(const Tensor& query, const Tensor& key, const Tensor& value,
                                   const Tensor& key_mask) const {
  const std::size_t d = wq.in_features();
  if (query.rank() != 2 || key.rank() != 2 || value.rank() != 2 || query.dim(1) != d || key.dim(1) != d ||
      value.dim(1) != d)
    throw ShapeError("multi-head attention: inputs " + shape_str(query.shape()) + ", " + shape_str(key.shape()) +
                     ", " + shape_str(value.shape()) + " must all have width " + std::to_string(d));
  const Tensor q = wq.forward(query);
  const Tensor k = wk.forward(key);
  const Tensor v = wv.forward(value);
  if (num_heads == 1) return wo.forward(scaled_dot_attention(q, k, v, key_mask));
  const std::size_t dk = d / num_heads;
  std::vector<Tensor> heads;
  heads.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h)
    heads.push_back(scaled_dot_attention(slice(q, 1, h * dk, dk), slice(k, 1, h * dk, dk), slice(v, 1, h * dk, dk),
                                         key_mask));
  return wo.forward(concat(heads, 1));
}

void MultiHeadAttention::collect(const std::string& prefix, ParameterList& out) const {
  wq.collect(prefix + ".wq", out);
  wk.collect(prefix + ".wk", out);
  wv.collect(prefix + ".wv", out);
  wo.collect(prefix + ".wo", out);
}

FeedForward::FeedForward(const AttentionConfig& config, Rng& rng)
    : fc1(config.d_model, config.ffn_hidden, rng), fc2(config.ffn_hidden, config.d_model, rng), dropout(config.dropout) {}

Tensor FeedForward::forward(const Tensor& x, const ForwardContext& ctx) const {
  return fc2.forward(cost::dropout(relu(fc1.forward(x)), dropout, ctx));
}

void FeedForward::collect(const std::string& prefix, ParameterList& out) const {
  fc1.collect(prefix + ".fc1", out);
  fc2.collect(prefix + ".fc2", out);
}

EncoderBlock::EncoderBlock(const AttentionConfig& config_, Rng& rng)
    : config(config_), attention(config_, rng), ffn(config_, rng), norm1(config_.d_model), norm2(config_.d_model) {}

Tensor EncoderBlock::forward(const Tensor& x, const AttendOptions& opts, const ForwardContext& ctx) const {
  const Tensor& kv = opts.cross.defined() ? opts.cross : x;
  const Tensor q = opts.query_pos.defined() ? add(x, opts.query_pos) : x;
  const Tensor k = opts.key_pos.defined() ? add(kv, opts.key_pos) : kv;
  const Tensor attended = attention.forward(q, k, kv, opts.key_mask);
  const Tensor x1 = norm1.forward(add(x, dropout(attended, config.dropout, ctx)));
  return norm2.forward(add(x1, dropout(ffn.forward(x1, ctx), config.dropout, ctx)));
}

void EncoderBlock::collect(const std::string& prefix, ParameterList& out) const {
  attention.collect(prefix + ".attn", out);
  ffn.collect(prefix + ".ffn", out);
  norm1.collect(prefix + ".norm1", out);
  norm2.collect(prefix + ".norm2", out);
}

Tensor sine_positional_encoding(std::size_t length, std::size_t d_model) {
  if (d_model == 0 || d_model % 2 != 0)
    throw std::invalid_argument("sine positional encoding needs an even d_model, got " + std::to_string(d_model));
  if (length == 0) throw std::invalid_argument("sine positional encoding needs a positive length");
  std::vector<double> pe(length * d_model);
  for (std::size_t pos = 0; pos < length; ++pos)
    for (std::size_t i = 0; i < d_model; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d_model));
      pe[pos * d_model + i] = std::sin(static_cast<double>(pos) * freq);
      pe[pos * d_model + i + 1] = std::cos(static_cast<double>(pos) * freq);
    }
  return Tensor::from({length, d_model}, std::move(pe));
}

}  // namespace cost
