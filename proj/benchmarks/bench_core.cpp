#include <benchmark/benchmark.h>

#include "cost/autograd.hpp"
#include "cost/metrics.hpp"
#include "cost/model.hpp"
#include "cost/ops.hpp"
#include "cost/rng.hpp"
#include "cost/transformer.hpp"

using namespace cost;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng, bool grad = false) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.normal();
  return Tensor::from({rows, cols}, std::move(v), grad);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  Tensor a = random_matrix(n, n, rng, true), b = random_matrix(n, n, rng, true);
  for (auto _ : state) {
    a.zero_grad();
    b.zero_grad();
    backward(sum(matmul(a, b)));
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(64)->Arg(128);

void BM_Attention(benchmark::State& state) {
  const auto tokens = static_cast<std::size_t>(state.range(0));
  AttentionConfig config;
  config.d_model = 64;
  config.num_heads = 4;
  Rng rng(3);
  const MultiHeadAttention mha(config, rng);
  const Tensor x = random_matrix(tokens, 64, rng);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(mha.forward(x, x, x));
}
BENCHMARK(BM_Attention)->Arg(121)->Arg(441);

void BM_DeskForward(benchmark::State& state) {
  const ModelConfig config = ModelConfig::desk();
  const CostModel model(config);
  Rng rng(4);
  const std::size_t s = config.visual.search_size, t = config.visual.template_size;
  std::vector<double> search(3 * s * s), templ(3 * t * t);
  for (double& v : search) v = rng.normal();
  for (double& v : templ) v = rng.normal();
  NoGradGuard no_grad;
  const auto ctx = ForwardContext::eval();
  const ImageTensor search_image(Tensor::from({3, s, s}, search));
  const Tensor template_tokens = model.visual.stem_tokens(ImageTensor(Tensor::from({3, t, t}, templ)));
  const LanguageTokens words = tokenize("the red circle moving steadily across the grass", config.linguistic);
  const Tensor language = model.language_features(words, true, ctx);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(search_image, template_tokens, language, ctx));
}
BENCHMARK(BM_DeskForward)->Unit(benchmark::kMillisecond);

void BM_Metrics(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  std::vector<BoundingBox> pred(frames), truth(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    truth[i] = {rng.uniform(0, 200), rng.uniform(0, 200), rng.uniform(5, 40), rng.uniform(5, 40)};
    pred[i] = {truth[i].x + rng.normal(0, 4), truth[i].y + rng.normal(0, 4), truth[i].w, truth[i].h};
  }
  const std::vector<int> absent(frames, 0);
  for (auto _ : state) benchmark::DoNotOptimize(compute_metrics(pred, truth, absent));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames));
}
BENCHMARK(BM_Metrics)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
