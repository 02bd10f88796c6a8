#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "cost/model.hpp"
#include "cost/rng.hpp"
#include "cost/tensor.hpp"

namespace fixtures {

/// 32/16 inputs, width 8, S = 1, L = 1, no dropout: 16 + 8 + 1 = 25 = 5^2.
inline cost::ModelConfig tiny_model() {
  cost::ModelConfig c;
  auto& v = c.visual;
  v.search_size = 32;
  v.template_size = 16;
  v.stem_channels = 8;
  v.encoder_repeats = 1;
  v.num_heads = 2;
  v.decoder_heads = 2;
  v.ffn_hidden = 16;
  v.dropout = 0.0;
  v.post_crop = 0;
  auto& l = c.linguistic;
  l.vocab_size = 64;
  l.max_words = 6;
  l.width = 8;
  l.layers = 2;
  l.num_heads = 2;
  l.ffn_hidden = 16;
  l.dropout = 0.0;
  auto& f = c.fusion;
  f.width = 8;
  f.layers = 1;
  f.num_heads = 2;
  f.ffn_hidden = 16;
  f.dropout = 0.0;
  return c;
}

/// 64/32 inputs, widths 32, S = 1, L = 2: 64 + 16 + 1 = 81 = 9^2.
inline cost::ModelConfig toy_model() {
  cost::ModelConfig c = cost::ModelConfig::desk();
  auto& v = c.visual;
  v.search_size = 64;
  v.template_size = 32;
  v.stem_channels = 32;
  v.encoder_repeats = 1;
  v.num_heads = 4;
  v.decoder_heads = 4;
  v.ffn_hidden = 64;
  v.post_crop = 0;
  auto& l = c.linguistic;
  l.width = 32;
  l.max_words = 14;
  l.ffn_hidden = 64;
  auto& f = c.fusion;
  f.width = 32;
  f.layers = 2;
  f.ffn_hidden = 64;
  return c;
}

inline cost::Tensor random_tensor(cost::Shape shape, cost::Rng& rng, double lo = -1.0, double hi = 1.0,
                                  bool requires_grad = false) {
  std::vector<double> v(cost::shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return cost::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

/// Values with |x| in [margin, 1], kept clear of kinks at zero.
inline cost::Tensor away_from_zero(cost::Shape shape, cost::Rng& rng, double margin = 0.1,
                                   bool requires_grad = true) {
  std::vector<double> v(cost::shape_numel(shape));
  for (double& x : v) x = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(margin, 1.0);
  return cost::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("cost_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
