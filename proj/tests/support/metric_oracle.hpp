#pragma once

// Brute-force metric definitions: thresholds outer, frames inner.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "cost/metrics.hpp"
#include "cost/rng.hpp"

namespace metric_oracle {

using cost::BoundingBox;
using cost::Curve;
using cost::MetricReport;
using cost::Rng;

struct Run {
  std::vector<BoundingBox> pred, truth;
  std::vector<int> absent;
};

inline double overlap(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

inline double complete_overlap(const BoundingBox& p, const BoundingBox& g) {
  const double o = overlap(p, g);
  const double ex = std::max(p.x + p.w, g.x + g.w) - std::min(p.x, g.x);
  const double ey = std::max(p.y + p.h, g.y + g.h) - std::min(p.y, g.y);
  const double dx = (p.x + 0.5 * p.w) - (g.x + 0.5 * g.w), dy = (p.y + 0.5 * p.h) - (g.y + 0.5 * g.h);
  const double d = ex * ex + ey * ey > 0.0 ? (dx * dx + dy * dy) / (ex * ex + ey * ey) : 0.0;
  const double dv = std::atan2(g.w, g.h) - std::atan2(p.w, p.h);
  const double v = 4.0 / (std::numbers::pi * std::numbers::pi) * dv * dv;
  const double a = v > 0.0 ? v / ((1.0 - o) + v) : 0.0;
  return std::clamp(o - d - a * v, -1.0, 1.0);
}

/// Threshold-major double loop over frames.
inline MetricReport naive_metrics(const Run& r) {
  MetricReport out;
  const std::size_t n = r.truth.size();
  std::size_t visible = 0;
  for (std::size_t t = 0; t < n; ++t) visible += r.absent[t] == 0;
  auto score = [&](std::size_t count, auto&& hit, double step, double& mean, Curve* curve) {
    double total = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
      const double th = static_cast<double>(k) * step;
      std::size_t hits = 0;
      for (std::size_t t = 0; t < n; ++t)
        if (r.absent[t] == 0 && hit(t, th)) ++hits;
      const double f = visible ? static_cast<double>(hits) / static_cast<double>(visible) : 0.0;
      if (curve) curve->values.push_back(f);
      total += f;
    }
    mean = total / static_cast<double>(count);
  };
  score(101, [&](std::size_t t, double th) { return overlap(r.pred[t], r.truth[t]) > th; }, 0.01, out.auc, &out.success);
  score(101, [&](std::size_t t, double th) { return complete_overlap(r.pred[t], r.truth[t]) > th; }, 0.01, out.cauc,
        nullptr);
  auto centre_error = [&](std::size_t t) {
    const auto &p = r.pred[t], &g = r.truth[t];
    return std::hypot((p.x + 0.5 * p.w) - (g.x + 0.5 * g.w), (p.y + 0.5 * p.h) - (g.y + 0.5 * g.h));
  };
  double unused = 0.0;
  score(51, [&](std::size_t t, double th) { return centre_error(t) <= th; }, 1.0, unused, &out.precision_curve);
  out.precision = out.precision_curve.values[20];
  score(
      51,
      [&](std::size_t t, double th) {
        const auto &p = r.pred[t], &g = r.truth[t];
        return std::hypot(((p.x + 0.5 * p.w) - (g.x + 0.5 * g.w)) / g.w, ((p.y + 0.5 * p.h) - (g.y + 0.5 * g.h)) / g.h) <= th;
      },
      0.01, out.norm_precision, nullptr);
  double acc = 0.0;
  for (std::size_t t = 0; t < n; ++t)
    acc += r.absent[t] ? (r.pred[t].w > 0.0 && r.pred[t].h > 0.0 ? 0.0 : 1.0) : overlap(r.pred[t], r.truth[t]);
  out.macc = n ? acc / static_cast<double>(n) : 0.0;
  return out;
}

inline Run random_run(Rng& rng) {
  Run r;
  const std::size_t n = 1 + rng.below(60);
  for (std::size_t t = 0; t < n; ++t) {
    const BoundingBox g{rng.uniform(0, 300), rng.uniform(0, 200), rng.uniform(4, 80), rng.uniform(4, 80)};
    const int absent = rng.bernoulli(0.1) ? 1 : 0;
    BoundingBox p;
    const double mode = rng.uniform(0, 1);
    if (mode < 0.1) {
      p = {};
    } else if (mode < 0.2) {
      p = g;
    } else {
      const double s = rng.uniform(0, 30);
      p = {g.x + rng.uniform(-s, s), g.y + rng.uniform(-s, s), std::max(1.0, g.w + rng.uniform(-s, s)),
           std::max(1.0, g.h + rng.uniform(-s, s))};
    }
    r.truth.push_back(g);
    r.pred.push_back(p);
    r.absent.push_back(absent);
  }
  return r;
}

}  // namespace metric_oracle
