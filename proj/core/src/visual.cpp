#include "cost/visual.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cost {

VisualConfig VisualConfig::paper() {
  VisualConfig c;
  c.search_size = 256;
  c.template_size = 128;
  c.stem_channels = 256;
  c.encoder_repeats = 4;
  c.num_heads = 8;
  c.decoder_heads = 8;
  c.ffn_hidden = 2048;
  c.post_conv_count = 3;
  c.post_conv_kernel = 5;
  c.post_conv_same_padding = false;
  c.post_crop = 0;
  return c;
}

std::size_t VisualConfig::output_grid() const {
  long g = static_cast<long>(search_grid());
  const long k = static_cast<long>(post_conv_kernel);
  for (std::size_t i = 0; i < post_conv_count; ++i) g = post_conv_same_padding ? g : g - (k - 1);
  if (g <= 0) return 0;
  if (post_crop > 0) return post_crop <= static_cast<std::size_t>(g) ? post_crop : 0;
  return static_cast<std::size_t>(g);
}

double VisualConfig::output_offset() const {
  double offset = 0.0;
  std::size_t g = search_grid();
  if (!post_conv_same_padding) {
    offset += static_cast<double>(post_conv_count) * static_cast<double>(post_conv_kernel - 1) / 2.0;
    g -= post_conv_count * (post_conv_kernel - 1);
  }
  if (post_crop > 0) offset += static_cast<double>((g - post_crop) / 2);
  return offset;
}

void VisualConfig::validate() const {
  if (stem_stride < 2 || stem_stride % 2 != 0)
    throw std::invalid_argument("visual config: stem_stride must be even and >= 2");
  if (search_size == 0 || template_size == 0 || search_size % stem_stride != 0 || template_size % stem_stride != 0)
    throw std::invalid_argument("visual config: search/template sizes (" + std::to_string(search_size) + ", " +
                                std::to_string(template_size) + ") must be positive multiples of the stem stride " +
                                std::to_string(stem_stride));
  if (stem_channels == 0 || stem_channels % 2 != 0)
    throw std::invalid_argument("visual config: stem_channels must be positive and even");
  AttentionConfig{stem_channels, num_heads, ffn_hidden, dropout}.validate();
  AttentionConfig{stem_channels, decoder_heads, ffn_hidden, dropout}.validate();
  if (post_conv_count > 0 && post_conv_kernel % 2 == 0)
    throw std::invalid_argument("visual config: post_conv_kernel must be odd");
  if (output_grid() == 0)
    throw std::invalid_argument("visual config: post-conv chain exhausts the " + std::to_string(search_grid()) + "x" +
                                std::to_string(search_grid()) + " search map");
}

std::vector<std::array<double, 2>> visual_token_centers(const VisualConfig& config) {
  const std::size_t g = config.output_grid();
  const double offset = config.output_offset();
  const double n = static_cast<double>(config.search_grid());
  std::vector<std::array<double, 2>> centers;
  centers.reserve(g * g);
  for (std::size_t r = 0; r < g; ++r)
    for (std::size_t c = 0; c < g; ++c)
      centers.push_back({(offset + static_cast<double>(c) + 0.5) / n, (offset + static_cast<double>(r) + 0.5) / n});
  return centers;
}

PatchStem::PatchStem(const VisualConfig& config, Rng& rng)
    : conv1(3, config.stem_channels / 2, config.stem_stride / 2, config.stem_stride / 2, 0, rng),
      conv2(config.stem_channels / 2, config.stem_channels, 2, 2, 0, rng),
      stride(config.stem_stride) {}

Tensor PatchStem::forward(const ImageTensor& image) const {
  if (image.height() % stride != 0 || image.width() % stride != 0)
    throw ShapeError("stem: image " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                     " is not divisible by stride " + std::to_string(stride));
  return conv2.forward(relu(conv1.forward(image.tensor())));
}

void PatchStem::collect(const std::string& prefix, ParameterList& out) const {
  conv1.collect(prefix + ".conv1", out);
  conv2.collect(prefix + ".conv2", out);
}

Tensor map_to_tokens(const Tensor& map) {
  if (map.rank() != 3) throw ShapeError("map_to_tokens: expected [C x H x W], got " + shape_str(map.shape()));
  return transpose(reshape(map, {map.dim(0), map.dim(1) * map.dim(2)}));
}

Tensor tokens_to_map(const Tensor& tokens) {
  if (tokens.rank() != 2) throw ShapeError("tokens_to_map: expected [N x C], got " + shape_str(tokens.shape()));
  const std::size_t n = tokens.dim(0);
  const auto g = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (g * g != n)
    throw ShapeError("tokens_to_map: token count " + std::to_string(n) + " is not a perfect square");
  return reshape(transpose(tokens), {tokens.dim(1), g, g});
}

VisualBranch::VisualBranch(const VisualConfig& config_, Rng& rng) : config(config_) {
  config.validate();
  stem = PatchStem(config, rng);
  const AttentionConfig enc{config.stem_channels, config.num_heads, config.ffn_hidden, config.dropout};
  const AttentionConfig dec{config.stem_channels, config.decoder_heads, config.ffn_hidden, config.dropout};
  for (std::size_t s = 0; s < config.encoder_repeats; ++s) {
    search_self.emplace_back(enc, rng);
    template_self.emplace_back(enc, rng);
    search_cross.emplace_back(enc, rng);
    template_cross.emplace_back(enc, rng);
  }
  decoder = EncoderBlock(dec, rng);
  const std::size_t k = config.post_conv_kernel;
  const std::size_t pad = config.post_conv_same_padding ? (k - 1) / 2 : 0;
  for (std::size_t i = 0; i < config.post_conv_count; ++i)
    post_convs.emplace_back(config.stem_channels, config.stem_channels, k, 1, pad, rng);
  search_pos = sine_positional_encoding(config.search_tokens(), config.stem_channels);
  template_pos = sine_positional_encoding(config.template_tokens(), config.stem_channels);
}

Tensor VisualBranch::transformer(const Tensor& search_tokens, const Tensor& template_tokens,
                                 const ForwardContext& ctx) const {
  const std::size_t c = config.stem_channels;
  if (search_tokens.rank() != 2 || template_tokens.rank() != 2 || search_tokens.dim(1) != c ||
      template_tokens.dim(1) != c)
    throw ShapeError("visual transformer: token widths must equal " + std::to_string(c) + ", got " +
                     shape_str(search_tokens.shape()) + " and " + shape_str(template_tokens.shape()));
  const bool fixed_len =
      search_tokens.dim(0) == search_pos.dim(0) && template_tokens.dim(0) == template_pos.dim(0);
  const Tensor px = fixed_len ? search_pos : sine_positional_encoding(search_tokens.dim(0), c);
  const Tensor pz = fixed_len ? template_pos : sine_positional_encoding(template_tokens.dim(0), c);

  Tensor x = search_tokens;
  Tensor z = template_tokens;
  if (!config.pos_every_layer) {
    x = add(x, px);
    z = add(z, pz);
  }
  const Tensor qx = config.pos_every_layer ? px : Tensor{};
  const Tensor qz = config.pos_every_layer ? pz : Tensor{};
  for (std::size_t s = 0; s < config.encoder_repeats; ++s) {
    x = search_self[s].forward(x, {.query_pos = qx, .key_pos = qx}, ctx);
    z = template_self[s].forward(z, {.query_pos = qz, .key_pos = qz}, ctx);
    Tensor x_next = search_cross[s].forward(x, {.cross = z, .query_pos = qx, .key_pos = qz}, ctx);
    Tensor z_next = template_cross[s].forward(z, {.cross = x, .query_pos = qz, .key_pos = qx}, ctx);
    x = std::move(x_next);
    z = std::move(z_next);
  }
  return decoder.forward(x, {.cross = z, .query_pos = qx, .key_pos = qz}, ctx);
}

Tensor VisualBranch::project(const Tensor& fused_tokens) const {
  Tensor map = tokens_to_map(fused_tokens);
  for (std::size_t i = 0; i < post_convs.size(); ++i) {
    if (map.dim(1) < post_convs[i].weight.dim(2) && post_convs[i].padding == 0)
      throw ShapeError("visual projection: post-conv chain exhausts the spatial extent");
    map = post_convs[i].forward(map);
    if (i + 1 < post_convs.size()) map = relu(map);
  }
  if (config.post_crop > 0) map = center_crop(map, config.post_crop);
  return map_to_tokens(map);
}

Tensor VisualBranch::forward(const ImageTensor& search, const Tensor& template_tokens,
                             const ForwardContext& ctx) const {
  return project(transformer(stem_tokens(search), template_tokens, ctx));
}

void VisualBranch::collect(const std::string& prefix, ParameterList& out) const {
  stem.collect(prefix + ".stem", out);
  for (std::size_t s = 0; s < config.encoder_repeats; ++s) {
    const std::string p = prefix + ".enc" + std::to_string(s);
    search_self[s].collect(p + ".search_self", out);
    template_self[s].collect(p + ".template_self", out);
    search_cross[s].collect(p + ".search_cross", out);
    template_cross[s].collect(p + ".template_cross", out);
  }
  decoder.collect(prefix + ".decoder", out);
  for (std::size_t i = 0; i < post_convs.size(); ++i) post_convs[i].collect(prefix + ".post" + std::to_string(i), out);
}

}  // namespace cost
