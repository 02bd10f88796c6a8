#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cost/cvlf.hpp"
#include "cost/model.hpp"
#include "fixtures.hpp"
#include "gradient_suite.hpp"

using namespace cost;

namespace {

CoAConfig coa(double tau, DenominatorMode mode = DenominatorMode::Standard) {
  CoAConfig c;
  c.temperature = tau;
  c.mode = mode;
  return c;
}

/// Per-row InfoNCE over an explicit similarity matrix, written out directly.
double infonce_oracle(const std::vector<std::vector<double>>& s, double tau, bool standard) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double denom = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j)
      if (standard || j != i) denom += std::exp(s[i][j] / tau);
    total += -std::log(std::exp(s[i][i] / tau) / denom);
  }
  return total;
}

std::vector<std::vector<double>> cos_matrix(const Tensor& a, const Tensor& b) {
  std::vector<std::vector<double>> s(a.dim(0), std::vector<double>(b.dim(0)));
  const std::size_t c = a.dim(1);
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(0); ++j)
      s[i][j] = cosine_similarity(a.data().subspan(i * c, c), b.data().subspan(j * c, c));
  return s;
}

std::vector<std::vector<double>> transposed(const std::vector<std::vector<double>>& s) {
  auto t = s;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) t[i][j] = s[j][i];
  return t;
}

Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& perm) { return index_rows(x, perm); }

void identity(Linear& l) {
  Tensor w = l.weight, b = l.bias;
  for (std::size_t i = 0; i < w.dim(0); ++i)
    for (std::size_t j = 0; j < w.dim(1); ++j) w.mutable_data()[i * w.dim(1) + j] = i == j ? 1.0 : 0.0;
  for (double& v : b.mutable_data()) v = 0.0;
}

}  // namespace

TEST_SUITE("cvlf") {
  TEST_CASE("cosine similarity examples") {
    const std::vector<double> x{1, 0}, y{0, 1}, d{1, 1};
    CHECK(cosine_similarity(x, x) == 1.0);
    CHECK(cosine_similarity(x, y) == 0.0);
    CHECK(cosine_similarity(d, x) == doctest::Approx(std::sqrt(2.0) / 2).epsilon(1e-12));
    CHECK(cosine_similarity(d, x) == doctest::Approx(0.70711).epsilon(1e-5));
    const std::vector<double> zero{0, 0};
    CHECK_THROWS_AS(cosine_similarity(zero, x), std::invalid_argument);
    CHECK_THROWS_AS(cosine_similarity(x, std::vector<double>{1, 2, 3}), std::invalid_argument);
    const std::vector<double> a{0.3, -1.2, 2.0}, b{1.0, 0.5, -0.7};
    const std::vector<double> a7{2.1, -8.4, 14.0};
    CHECK(cosine_similarity(a7, b) == doctest::Approx(cosine_similarity(a, b)).epsilon(1e-14));
  }

  TEST_CASE("projection examples") {
    Rng rng(1);
    SUBCASE("identity projections of equal pooled inputs agree") {
      ContrastiveProjection p(3, 3, 3, rng);
      identity(p.g_v);
      identity(p.g_l);
      const Tensor v = Tensor::matrix({{1, 2, 3}, {3, 2, 1}});
      const Tensor l = Tensor::matrix({{2, 2, 2}, {9, 9, 9}, {2, 2, 2}});
      const EmbeddingPair e = p.project(v, l, {1, 0, 1});
      for (std::size_t i = 0; i < 3; ++i) CHECK(e.visual.at(i) == doctest::Approx(e.language.at(i)));
    }
    SUBCASE("output width is C_p for any input widths") {
      ContrastiveProjection p(5, 7, 4, rng);
      const EmbeddingPair e = p.project(fixtures::random_tensor({9, 5}, rng), fixtures::random_tensor({3, 7}, rng));
      CHECK(e.visual.shape() == Shape{4});
      CHECK(e.language.shape() == Shape{4});
    }
    SUBCASE("fixed 2x3 projection on [1, 2, 3]") {
      ContrastiveProjection p(3, 3, 2, rng);
      Tensor w = p.g_v.weight, b = p.g_v.bias;
      // Stored [in x out]: columns are the output rows [1, 0, -1] and [2, 1, 0].
      const double vals[] = {1, 2, 0, 1, -1, 0};
      std::copy(std::begin(vals), std::end(vals), w.mutable_data().begin());
      for (double& v : b.mutable_data()) v = 0.0;
      const EmbeddingPair e = p.project(Tensor::matrix({{1, 2, 3}}), Tensor::matrix({{1, 1, 1}}));
      CHECK(e.visual.at(0) == doctest::Approx(-2.0));
      CHECK(e.visual.at(1) == doctest::Approx(4.0));
    }
    SUBCASE("zero projected vector is rejected") {
      ContrastiveProjection p(2, 2, 2, rng);
      Tensor w = p.g_v.weight, b = p.g_v.bias;
      for (double& v : w.mutable_data()) v = 0.0;
      for (double& v : b.mutable_data()) v = 0.0;
      CHECK_THROWS_AS(p.project(Tensor::matrix({{1, 2}}), Tensor::matrix({{1, 2}})), std::domain_error);
    }
  }

  TEST_CASE("InfoNCE worked N = 2 case") {
    const Tensor v = Tensor::matrix({{1, 0}, {0, 1}}), l = Tensor::matrix({{1, 0}, {0, 1}});
    CHECK(infonce_v2l(v, l, coa(1.0, DenominatorMode::AsWritten)).item() == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(std::abs(infonce_v2l(v, l, coa(1.0, DenominatorMode::AsWritten)).item() + 2.0) < 1e-9);
    const double standard = 2.0 * std::log1p(std::exp(-1.0));
    CHECK(std::abs(infonce_v2l(v, l, coa(1.0)).item() - standard) < 1e-9);
    CHECK(std::abs(infonce_v2l(v, l, coa(1.0)).item() - 0.62652) < 1e-5);
    CHECK(std::abs(infonce_l2v(v, l, coa(1.0)).item() - standard) < 1e-9);
    CHECK(std::abs(infonce_l2v(v, l, coa(1.0, DenominatorMode::AsWritten)).item() + 2.0) < 1e-9);
    CHECK(std::abs(coa_loss(v, l, coa(1.0)).item() - standard / 2.0) < 1e-9);
    CHECK(std::abs(coa_loss(v, l, coa(1.0)).item() - 0.31326) < 1e-5);

    const std::vector<EmbeddingPair> batch = {{Tensor::vector({1, 0}), Tensor::vector({1, 0})},
                                              {Tensor::vector({0, 1}), Tensor::vector({0, 1})}};
    CHECK(std::abs(infonce_v2l(batch, coa(1.0)).item() - standard) < 1e-9);
    CHECK(std::abs(coa_loss(batch, coa(1.0)).item() - standard / 2.0) < 1e-9);
  }

  TEST_CASE("asymmetric similarities: l2v differs from v2l") {
    const Tensor v = Tensor::matrix({{1, 0}, {0, 1}}), l = Tensor::matrix({{1, 1}, {1, 0}});
    // cos(v_i, l_j) = [[1/sqrt2, 1], [1/sqrt2, 0]]
    const double r = 1.0 / std::sqrt(2.0);
    const double v2l = (std::log(std::exp(r) + std::exp(1.0)) - r) + (std::log(std::exp(r) + 1.0) - 0.0);
    const double l2v = (std::log(2.0 * std::exp(r)) - r) + (std::log(std::exp(1.0) + 1.0) - 0.0);
    CHECK(std::abs(infonce_v2l(v, l, coa(1.0)).item() - v2l) < 1e-12);
    CHECK(std::abs(infonce_l2v(v, l, coa(1.0)).item() - l2v) < 1e-12);
    CHECK(std::abs(v2l - l2v) > 0.01);
  }

  TEST_CASE("losses match the direct formula on random batches") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 2 + rng.below(6);
      const Tensor v = fixtures::random_tensor({n, 5}, rng), l = fixtures::random_tensor({n, 5}, rng);
      const double tau = rng.uniform(0.1, 2.0);
      const auto s = cos_matrix(v, l);
      for (bool standard : {true, false}) {
        const auto mode = standard ? DenominatorMode::Standard : DenominatorMode::AsWritten;
        CHECK(std::abs(infonce_v2l(v, l, coa(tau, mode)).item() - infonce_oracle(s, tau, standard)) < 1e-9);
        CHECK(std::abs(infonce_l2v(v, l, coa(tau, mode)).item() - infonce_oracle(transposed(s), tau, standard)) < 1e-9);
        const double expected =
            0.5 * (infonce_oracle(s, tau, standard) + infonce_oracle(transposed(s), tau, standard)) / static_cast<double>(n);
        CHECK(std::abs(coa_loss(v, l, coa(tau, mode)).item() - expected) < 1e-9);
      }
    }
  }

  TEST_CASE("duplicating the batch adds the predictable term") {
    Rng rng(3);
    const Tensor v = fixtures::random_tensor({3, 4}, rng), l = fixtures::random_tensor({3, 4}, rng);
    const Tensor vv = concat({v, v}, 0), ll = concat({l, l}, 0);
    const double base = infonce_v2l(v, l, coa(0.5)).item();
    // Each anchor sees every negative and its own positive twice: +log 2 per anchor, twice as many anchors.
    CHECK(std::abs(infonce_v2l(vv, ll, coa(0.5)).item() - 2.0 * (base + 3.0 * std::log(2.0))) < 1e-9);
  }

  TEST_CASE("permutation, symmetry and scaling invariances") {
    Rng rng(4);
    for (int trial = 0; trial < 25; ++trial) {
      const std::size_t n = 2 + rng.below(5);
      const Tensor v = fixtures::random_tensor({n, 6}, rng), l = fixtures::random_tensor({n, 6}, rng);
      std::vector<std::size_t> perm(n);
      for (std::size_t i = 0; i < n; ++i) perm[i] = i;
      for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
      std::vector<double> scale(n);
      for (double& s : scale) s = rng.uniform(0.1, 10.0);
      const Tensor vs = mul(v, Tensor::from({n, 1}, scale));
      for (auto mode : {DenominatorMode::Standard, DenominatorMode::AsWritten}) {
        const CoAConfig c = coa(0.5, mode);
        using Loss = Tensor (*)(const Tensor&, const Tensor&, const CoAConfig&);
        for (Loss f : {static_cast<Loss>(&infonce_v2l), static_cast<Loss>(&infonce_l2v), static_cast<Loss>(&coa_loss)}) {
          const double base = f(v, l, c).item();
          CHECK(std::abs(f(permute_rows(v, perm), permute_rows(l, perm), c).item() - base) < 1e-9);
          CHECK(std::abs(f(vs, l, c).item() - base) < 1e-9);
        }
      }
      // Identical visual and language rows give a symmetric similarity matrix.
      CHECK(std::abs(infonce_v2l(v, v, coa(0.5)).item() - infonce_l2v(v, v, coa(0.5)).item()) < 1e-9);
      CHECK(std::abs(coa_loss(v, v, coa(0.5)).item() - infonce_v2l(v, v, coa(0.5)).item() / n) < 1e-9);
    }
  }

  TEST_CASE("large temperature flattens the loss to log N") {
    Rng rng(5);
    for (std::size_t n : {2, 5, 14}) {
      const Tensor v = fixtures::random_tensor({n, 4}, rng), l = fixtures::random_tensor({n, 4}, rng);
      CHECK(coa_loss(v, l, coa(1e9)).item() == doctest::Approx(std::log(static_cast<double>(n))).epsilon(1e-7));
    }
  }

  TEST_CASE("batch and temperature contracts") {
    const Tensor one = Tensor::matrix({{1, 0}});
    CHECK_THROWS_AS(infonce_v2l(one, one, coa(1.0)), std::invalid_argument);
    CHECK_THROWS_AS(coa_loss(Tensor::matrix({{1, 0}, {0, 1}}), Tensor::matrix({{1, 0}, {0, 1}}), coa(0.0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(infonce_v2l(Tensor::matrix({{1, 0}, {0, 0}}), Tensor::matrix({{1, 0}, {0, 1}}), coa(1.0)),
                    std::invalid_argument);
  }

  TEST_CASE("fused length at paper and desk scale") {
    ModelConfig paper = ModelConfig::paper();
    CHECK(paper.fused_length() == 441);
    CHECK(paper.fusion.width == 256);
    ModelConfig desk = ModelConfig::desk();
    CHECK(desk.fused_length() == 121);
    CHECK_NOTHROW(desk.validate());

    Rng rng(6);
    FusionConfig f = FusionConfig::paper();
    f.layers = 1;
    FusionTransformer fusion(f, 16, 12, visual_token_centers(paper.visual), 40, rng);
    const FusedTokens out = fusion.fuse(fixtures::random_tensor({400, 16}, rng), fixtures::random_tensor({40, 12}, rng), {});
    CHECK(out.tokens.shape() == Shape{441, 256});
    CHECK(out.index.total() == 441);
    CHECK(out.index.object_index() == 440);
    CHECK(out.index.kind(0) == TokenKind::Visual);
    CHECK(out.index.kind(400) == TokenKind::Language);
    CHECK(out.index.kind(440) == TokenKind::Object);
    CHECK_THROWS_AS(fusion.fuse(fixtures::random_tensor({399, 16}, rng), fixtures::random_tensor({40, 12}, rng), {}),
                    ShapeError);
  }

  TEST_CASE("L = 0 returns the projected concatenation plus positions") {
    Rng rng(7);
    FusionConfig f;
    f.width = 8;
    f.layers = 0;
    f.num_heads = 2;
    const std::vector<std::array<double, 2>> centers(4, {0.5, 0.5});
    FusionTransformer fusion(f, 6, 5, centers, 3, rng);
    const Tensor v = fixtures::random_tensor({4, 6}, rng), l = fixtures::random_tensor({3, 5}, rng);
    const Tensor out = fusion.fuse(v, l, {}).tokens;
    const Tensor pv = fusion.proj_v.forward(v), pl = fusion.proj_l.forward(l);
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t c = 0; c < 8; ++c) {
        const double base = r < 4 ? pv.at(r, c) : r < 7 ? pl.at(r - 4, c) : fusion.obj_token.at(0, c);
        CHECK(out.at(r, c) == doctest::Approx(base + fusion.position.at(r, c)).epsilon(1e-14));
      }
  }

  TEST_CASE("masked mean pooling") {
    const Tensor t = Tensor::matrix({{1, 2}, {3, 4}, {100, 100}});
    const Tensor p = mean_pool(t, {1, 1, 0});
    CHECK(p.at(0) == 2.0);
    CHECK(p.at(1) == 3.0);
    CHECK(mean_pool(t).at(0) == doctest::Approx(104.0 / 3));
    CHECK_THROWS_AS(mean_pool(t, {0, 0, 0}), std::invalid_argument);
  }

  TEST_CASE("CoA gradients") {
    for (const auto& c : gradsuite::cases()) {
      if (c.name.rfind("coa_loss", 0) != 0) continue;
      CAPTURE(c.name);
      const auto r = c.run();
      CHECK(r.max_rel_error < gradsuite::kTolerance);
    }
  }
}
