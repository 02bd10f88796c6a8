#include <doctest.h>

#include <cmath>

#include "cost/head.hpp"
#include "cost/model.hpp"
#include "fixtures.hpp"
#include "gradient_suite.hpp"

using namespace cost;

namespace {

IndexMap grid_map(std::size_t g, std::size_t language = 0) {
  IndexMap m;
  m.visual_count = g * g;
  m.language_count = language;
  for (std::size_t r = 0; r < g; ++r)
    for (std::size_t c = 0; c < g; ++c)
      m.visual_centers.push_back({(static_cast<double>(c) + 0.5) / g, (static_cast<double>(r) + 0.5) / g});
  return m;
}

/// Cell centres recomputed from the geometry of the search grid, conv chain and crop.
std::vector<std::array<double, 2>> oracle_centers(const VisualConfig& c) {
  const double n = static_cast<double>(c.search_size / c.stem_stride);
  double first = 0.0;
  std::size_t side = c.search_size / c.stem_stride;
  if (!c.post_conv_same_padding)
    for (std::size_t i = 0; i < c.post_conv_count; ++i) {
      first += static_cast<double>(c.post_conv_kernel / 2);
      side -= c.post_conv_kernel - 1;
    }
  if (c.post_crop > 0) {
    first += static_cast<double>((side - c.post_crop) / 2);
    side = c.post_crop;
  }
  std::vector<std::array<double, 2>> out;
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t col = 0; col < side; ++col)
      out.push_back({(first + static_cast<double>(col) + 0.5) / n, (first + static_cast<double>(r) + 0.5) / n});
  return out;
}

double l1_giou_oracle(const BoundingBox& p, const BoundingBox& g, double l1w, double gw) {
  const double l1 = std::abs(p.cx() - g.cx()) + std::abs(p.cy() - g.cy()) + std::abs(p.w - g.w) + std::abs(p.h - g.h);
  const double ix = std::max(0.0, std::min(p.right(), g.right()) - std::max(p.x, g.x));
  const double iy = std::max(0.0, std::min(p.bottom(), g.bottom()) - std::max(p.y, g.y));
  const double inter = ix * iy;
  const double uni = p.w * p.h + g.w * g.h - inter;
  const double cw = std::max(p.right(), g.right()) - std::min(p.x, g.x);
  const double ch = std::max(p.bottom(), g.bottom()) - std::min(p.y, g.y);
  const double gi = inter / uni - (cw * ch - uni) / (cw * ch);
  return l1w * l1 + gw * (1.0 - gi);
}

Tensor rows_of(const std::vector<BoundingBox>& boxes) {
  std::vector<double> v;
  for (const auto& b : boxes) v.insert(v.end(), {b.cx(), b.cy(), b.w, b.h});
  return Tensor::from({boxes.size(), 4}, v);
}

BoundingBox random_box(Rng& rng) {
  return {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.05, 3), rng.uniform(0.05, 3)};
}

}  // namespace

TEST_SUITE("tracking-head") {
  TEST_CASE("zero weights give 0.5 everywhere") {
    Rng rng(1);
    TrackingHead head(8, rng);
    ParameterList params;
    head.collect("h", params);
    for (auto& p : params) {
      Tensor t = p.tensor;
      for (double& v : t.mutable_data()) v = 0.0;
    }
    const HeadOutput out = head.forward(fixtures::random_tensor({25, 8}, rng));
    for (double v : out.confidence.data()) CHECK(v == 0.5);
    for (double v : out.boxes.data()) CHECK(v == 0.5);
  }

  TEST_CASE("candidate counts at paper and desk scale") {
    Rng rng(2);
    TrackingHead paper(256, rng);
    CHECK(paper.forward(Tensor::zeros({441, 256})).candidates() == 441);
    CostModel desk(ModelConfig::desk());
    CHECK(desk.head.forward(Tensor::zeros({121, 64})).candidates() == 121);
    const HeadOutput out = desk.head.forward(fixtures::random_tensor({121, 64}, rng, -5, 5));
    for (double v : out.confidence.data()) CHECK((v >= 0.0 && v <= 1.0));
  }

  TEST_CASE("assign_labels examples") {
    const IndexMap m = grid_map(20, 40);
    auto count = [](const std::vector<int>& l) { return std::count(l.begin(), l.end(), 1); };
    const auto whole = assign_labels(m, {0, 0, 1, 1});
    CHECK(count(whole) == 400);
    for (std::size_t i = 400; i < 441; ++i) CHECK(whole[i] == 0);
    CHECK(count(assign_labels(m, {0.3, 0.3, 0, 0})) == 0);
    const auto centre = assign_labels(m, {0.4, 0.4, 0.2, 0.2});
    CHECK(count(centre) == 16);
    for (std::size_t r = 0; r < 20; ++r)
      for (std::size_t c = 0; c < 20; ++c)
        CHECK(centre[r * 20 + c] == ((r >= 8 && r < 12 && c >= 8 && c < 12) ? 1 : 0));
    CHECK(count(assign_labels(m, {1.5, 0.2, 0.3, 0.3})) == 0);
    CHECK(count(assign_labels(m, {-0.8, -0.8, 0.5, 0.5})) == 0);
  }

  TEST_CASE("assign_labels matches the brute-force oracle on 1000 random configurations") {
    Rng rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
      VisualConfig c;
      c.search_size = 8 * (4 + rng.below(29));
      c.post_conv_same_padding = rng.bernoulli(0.5);
      c.post_conv_kernel = 1 + 2 * rng.below(3);
      const std::size_t grid = c.search_size / 8;
      c.post_conv_count = rng.below(3);
      while (!c.post_conv_same_padding && c.post_conv_count * (c.post_conv_kernel - 1) >= grid) --c.post_conv_count;
      const std::size_t after = c.post_conv_same_padding ? grid : grid - c.post_conv_count * (c.post_conv_kernel - 1);
      c.post_crop = rng.bernoulli(0.5) ? 1 + rng.below(after) : 0;
      REQUIRE(c.output_grid() > 0);
      IndexMap m;
      m.visual_centers = visual_token_centers(c);
      m.visual_count = m.visual_centers.size();
      m.language_count = rng.below(10);
      const auto expected_centers = oracle_centers(c);
      REQUIRE(expected_centers.size() == m.visual_count);
      // Snap some boxes to cell boundaries to exercise the half-open edges.
      BoundingBox gt{rng.uniform(-0.2, 1.0), rng.uniform(-0.2, 1.0), rng.uniform(0, 0.8), rng.uniform(0, 0.8)};
      if (trial % 3 == 0) {
        const double n = static_cast<double>(grid);
        gt.x = std::floor(gt.x * 2 * n) / (2 * n);
        gt.w = std::floor(gt.w * 2 * n) / (2 * n);
      }
      const auto labels = assign_labels(m, gt);
      REQUIRE(labels.size() == m.total());
      for (std::size_t i = 0; i < m.total(); ++i) {
        int want = 0;
        if (i < m.visual_count) {
          const auto [x, y] = expected_centers[i];
          want = (x >= gt.x && x < gt.x + gt.w && y >= gt.y && y < gt.y + gt.h) ? 1 : 0;
        }
        if (labels[i] != want) {
          CAPTURE(trial);
          CAPTURE(i);
          CHECK(labels[i] == want);
        }
      }
    }
  }

  TEST_CASE("bce examples") {
    CHECK(bce_loss(Tensor::vector({1.0}), {1}).item() < 1e-6);
    CHECK(bce_loss(Tensor::vector({0.5}), {1}).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(bce_loss(Tensor::vector({0.5}), {1}).item() == doctest::Approx(0.69315).epsilon(1e-5));
    const double clamped = bce_loss(Tensor::vector({1.0}), {0}).item();
    CHECK(std::isfinite(clamped));
    CHECK(clamped == doctest::Approx(-std::log(1e-7)).epsilon(1e-6));
    CHECK(clamped == doctest::Approx(16.12).epsilon(1e-3));
    const Tensor p = Tensor::vector({0.9, 0.2, 0.6});
    const double sum_loss = bce_loss(p, {1, 0, 1}).item();
    CHECK(sum_loss == doctest::Approx(-(std::log(0.9) + std::log(0.8) + std::log(0.6))).epsilon(1e-12));
    CHECK(bce_loss(p, {1, 0, 1}, Reduction::Mean).item() == doctest::Approx(sum_loss / 3).epsilon(1e-12));
    CHECK_THROWS_AS(bce_loss(p, {1, 0}), ShapeError);
  }

  TEST_CASE("GIoU worked examples") {
    const BoundingBox a{0, 0, 1, 1};
    CHECK(giou(a, a) == 1.0);
    CHECK(std::abs(giou(a, {1, 0, 1, 1}) - 0.0) < 1e-12);
    CHECK(std::abs(giou(a, {9, 0, 1, 1}) - (-0.8)) < 1e-12);
    CHECK(giou({3, 3, 0, 0}, {5, 5, 0, 0}) == 0.0);
    const Tensor rows = giou_rows(rows_of({a, {1, 0, 1, 1}, {9, 0, 1, 1}}), rows_of({a}));
    CHECK(std::abs(rows.at(0) - 1.0) < 1e-12);
    CHECK(std::abs(rows.at(1) - 0.0) < 1e-12);
    CHECK(std::abs(rows.at(2) + 0.8) < 1e-12);
  }

  TEST_CASE("GIoU and IoU properties on random boxes") {
    Rng rng(4);
    for (int trial = 0; trial < 2000; ++trial) {
      const BoundingBox a = random_box(rng), b = random_box(rng);
      const double g = giou(a, b), i = iou(a, b);
      CHECK(g == doctest::Approx(giou(b, a)).epsilon(1e-14));
      CHECK(giou(a, a) == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(g <= i + 1e-15);
      CHECK(g > -1.0);
      CHECK(g <= 1.0);
      CHECK(i >= 0.0);
      CHECK(i <= 1.0);
      const Tensor row = giou_rows(rows_of({a}), rows_of({b}));
      CHECK(std::abs(row.at(0) - g) < 1e-12);
      // A box nested in another: the union is the enclosing box.
      const BoundingBox inner{a.x + 0.25 * a.w, a.y + 0.1 * a.h, 0.5 * a.w, 0.3 * a.h};
      CHECK(giou(a, inner) == doctest::Approx(iou(a, inner)).epsilon(1e-14));
    }
  }

  TEST_CASE("gradient of 1 - GIoU matches finite differences away from degeneracies") {
    Rng rng(5);
    int checked = 0;
    while (checked < 200) {
      const BoundingBox gtb = random_box(rng);
      Tensor pred = rows_of({random_box(rng)});
      pred.set_requires_grad(true);
      const double px0 = pred.at(0, 0) - pred.at(0, 2) / 2, px1 = pred.at(0, 0) + pred.at(0, 2) / 2;
      const double py0 = pred.at(0, 1) - pred.at(0, 3) / 2, py1 = pred.at(0, 1) + pred.at(0, 3) / 2;
      const double edges[] = {px0 - gtb.x, px1 - gtb.right(), px0 - gtb.right(), px1 - gtb.x,
                              py0 - gtb.y, py1 - gtb.bottom(), py0 - gtb.bottom(), py1 - gtb.y};
      bool near_kink = false;
      for (double e : edges) near_kink = near_kink || std::abs(e) < 1e-3;
      if (near_kink) continue;
      const Tensor g = rows_of({gtb});
      const auto r = oracle::gradient_check([&] { return sum(1.0 - giou_rows(pred, reshape(g, {4}))); }, {pred});
      CHECK(r.max_rel_error < 1e-4);
      ++checked;
    }
  }

  TEST_CASE("regression loss examples") {
    const LossWeights w;
    const BoundingBox gt = BoundingBox::from_center(0.5, 0.5, 1.0, 1.0);
    SUBCASE("perfect predictions give zero") {
      const Tensor p = rows_of({gt, gt, gt});
      CHECK(regression_loss(p, gt, {1, 0, 1}, w).item() == doctest::Approx(0.0).epsilon(1e-15));
    }
    SUBCASE("no positives give zero") {
      const Tensor p = rows_of({{0.1, 0.1, 0.2, 0.2}});
      CHECK(regression_loss(p, gt, {0}, w).item() == 0.0);
    }
    SUBCASE("one positive offset by 0.1 in x") {
      const BoundingBox pred = BoundingBox::from_center(0.6, 0.5, 1.0, 1.0);
      const double expected = l1_giou_oracle(pred, gt, 5.0, 2.0);
      CHECK(expected == doctest::Approx(0.5 + 2.0 * (1.0 - 0.9 / 1.1)).epsilon(1e-12));
      const Tensor p = rows_of({{0.2, 0.2, 0.1, 0.1}, pred});
      CHECK(std::abs(regression_loss(p, gt, {0, 1}, w).item() - expected) < 1e-12);
    }
    SUBCASE("normalized by the positive count, matching the oracle") {
      Rng rng(6);
      for (int trial = 0; trial < 50; ++trial) {
        std::vector<BoundingBox> preds;
        std::vector<int> labels;
        const BoundingBox g{rng.uniform(0, 0.5), rng.uniform(0, 0.5), rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5)};
        double total = 0.0;
        int positives = 0;
        for (int i = 0; i < 6; ++i) {
          preds.push_back({rng.uniform(0, 0.5), rng.uniform(0, 0.5), rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5)});
          labels.push_back(rng.bernoulli(0.5));
          if (labels.back()) {
            total += l1_giou_oracle(preds.back(), g, 5.0, 2.0);
            ++positives;
          }
        }
        const double got = regression_loss(rows_of(preds), g, labels, w).item();
        CHECK(std::abs(got - (positives ? total / positives : 0.0)) < 1e-12);
        if (positives) CHECK(got > 0.0);
      }
    }
  }

  TEST_CASE("total loss") {
    const LossWeights w{5, 2, 1};
    CHECK(total_loss(Tensor::scalar(0.5), Tensor::scalar(1.0), Tensor::scalar(0.7), w).item() == doctest::Approx(2.2));
    CHECK(total_loss(Tensor::scalar(0), Tensor::scalar(0), Tensor::scalar(0), w).item() == 0.0);
    const LossWeights no_ce{5, 2, 0};
    CHECK(total_loss(Tensor::scalar(0.5), Tensor::scalar(1.0), Tensor::scalar(9.0), no_ce).item() == doctest::Approx(1.5));
    CHECK_THROWS_AS(total_loss(Tensor::scalar(std::nan("")), Tensor::scalar(1), Tensor::scalar(1), w), NumericError);
    CHECK_THROWS_AS(total_loss(Tensor::scalar(0), Tensor::scalar(INFINITY), Tensor::scalar(1), w), NumericError);
  }

  TEST_CASE("loss gradients") {
    for (const auto& c : gradsuite::cases()) {
      if (c.name != "bce_loss" && c.name.rfind("regression_loss", 0) != 0 && c.name.rfind("fusion", 0) != 0) continue;
      CAPTURE(c.name);
      const auto r = c.run();
      CHECK(r.max_rel_error < gradsuite::kTolerance);
    }
  }
}
