#pragma once

#include <array>
#include <vector>

#include "cost/image.hpp"
#include "cost/transformer.hpp"

namespace cost {

struct VisualConfig {
  std::size_t search_size = 128;
  std::size_t template_size = 64;
  std::size_t stem_stride = 8;
  std::size_t stem_channels = 64;  ///< C_v'
  std::size_t encoder_repeats = 2;  ///< S
  std::size_t num_heads = 4;
  std::size_t decoder_heads = 8;
  std::size_t ffn_hidden = 128;
  double dropout = 0.1;
  std::size_t post_conv_count = 1;
  std::size_t post_conv_kernel = 3;
  bool post_conv_same_padding = true;
  std::size_t post_crop = 10;  ///< final centre crop side; 0 keeps the whole map
  bool pos_every_layer = true;

  /// Paper-scale shapes: 256/128 inputs, 256 channels, S = 4, three valid 5x5 convs.
  static VisualConfig paper();

  std::size_t search_grid() const { return search_size / stem_stride; }
  std::size_t template_grid() const { return template_size / stem_stride; }
  std::size_t search_tokens() const { return search_grid() * search_grid(); }      ///< N_v
  std::size_t template_tokens() const { return template_grid() * template_grid(); }
  /// Side of the map after the post-conv chain and crop.
  std::size_t output_grid() const;
  std::size_t output_tokens() const { return output_grid() * output_grid(); }  ///< N_v'
  /// Offset (in stem cells) of output cell 0 inside the search stem grid.
  double output_offset() const;
  /// Throws std::invalid_argument on any inconsistent extent.
  void validate() const;
};

/// Normalized (cx, cy) of every output visual token inside the search region.
std::vector<std::array<double, 2>> visual_token_centers(const VisualConfig& config);

/// Stride-8 convolutional stem: conv(k = s = stride/2) -> ReLU -> conv(k = s = 2).
class PatchStem {
 public:
  PatchStem() = default;
  PatchStem(const VisualConfig& config, Rng& rng);

  /// [3 x H x W] -> [C_v' x H/8 x W/8]. Throws ShapeError if H or W is not a multiple of the stride.
  Tensor forward(const ImageTensor& image) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  Conv2d conv1, conv2;
  std::size_t stride = 8;
};

/// [C x H x W] -> [H*W x C] token matrix (row-major cell order).
Tensor map_to_tokens(const Tensor& map);
/// [N x C] with N a perfect square -> [C x g x g]. Throws ShapeError otherwise.
Tensor tokens_to_map(const Tensor& tokens);

class VisualBranch {
 public:
  VisualBranch() = default;
  VisualBranch(const VisualConfig& config, Rng& rng);

  Tensor stem_tokens(const ImageTensor& image) const { return map_to_tokens(stem.forward(image)); }
  /// Encoders over (search, template) streams and the search-query decoder; [N_v x C].
  Tensor transformer(const Tensor& search_tokens, const Tensor& template_tokens, const ForwardContext& ctx) const;
  /// Reshape to a square map, post-conv chain, optional crop; [N_v' x C].
  Tensor project(const Tensor& fused_tokens) const;
  /// Full branch: F^v_0 as [N_v' x C_v'].
  Tensor forward(const ImageTensor& search, const Tensor& template_tokens, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  VisualConfig config;
  PatchStem stem;
  std::vector<EncoderBlock> search_self, template_self, search_cross, template_cross;
  EncoderBlock decoder;
  std::vector<Conv2d> post_convs;
  Tensor search_pos, template_pos;
};

}  // namespace cost
