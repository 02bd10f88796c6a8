#include "cost/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace cost {

namespace {

std::vector<double> grid(std::size_t count, double step) {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<double>(i) * step;
  return out;
}

Curve fraction_above(const std::vector<double>& values, std::vector<double> thresholds) {
  Curve c{std::move(thresholds), {}};
  c.values.reserve(c.thresholds.size());
  for (double t : c.thresholds) {
    std::size_t hits = 0;
    for (double v : values) hits += v > t;
    c.values.push_back(values.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(values.size()));
  }
  return c;
}

Curve fraction_within(const std::vector<double>& values, std::vector<double> thresholds) {
  Curve c{std::move(thresholds), {}};
  c.values.reserve(c.thresholds.size());
  for (double t : c.thresholds) {
    std::size_t hits = 0;
    for (double v : values) hits += v <= t;
    c.values.push_back(values.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(values.size()));
  }
  return c;
}

double curve_mean(const Curve& c) {
  double s = 0.0;
  for (double v : c.values) s += v;
  return c.values.empty() ? 0.0 : s / static_cast<double>(c.values.size());
}

void accumulate(Curve& into, const Curve& c) {
  if (into.thresholds.empty()) {
    into = c;
    return;
  }
  for (std::size_t i = 0; i < c.values.size(); ++i) into.values[i] += c.values[i];
}

void scale(Curve& c, double f) {
  for (double& v : c.values) v *= f;
}

}  // namespace

std::vector<double> overlap_thresholds() { return grid(101, 0.01); }
std::vector<double> precision_thresholds() { return grid(51, 1.0); }
std::vector<double> normalized_precision_thresholds() { return grid(51, 0.01); }

double center_error(const BoundingBox& p, const BoundingBox& g) { return std::hypot(p.cx() - g.cx(), p.cy() - g.cy()); }

double normalized_center_error(const BoundingBox& p, const BoundingBox& g) {
  const double dx = g.w > 0.0 ? (p.cx() - g.cx()) / g.w : (p.cx() == g.cx() ? 0.0 : INFINITY);
  const double dy = g.h > 0.0 ? (p.cy() - g.cy()) / g.h : (p.cy() == g.cy() ? 0.0 : INFINITY);
  return std::hypot(dx, dy);
}

double complete_iou(const BoundingBox& p, const BoundingBox& g) {
  const double overlap = iou(p, g);
  const double ex = std::max(p.right(), g.right()) - std::min(p.x, g.x);
  const double ey = std::max(p.bottom(), g.bottom()) - std::min(p.y, g.y);
  const double diag2 = ex * ex + ey * ey;
  const double dist2 = std::pow(p.cx() - g.cx(), 2) + std::pow(p.cy() - g.cy(), 2);
  const double distance_term = diag2 > 0.0 ? dist2 / diag2 : 0.0;
  const double dv = std::atan2(g.w, g.h) - std::atan2(p.w, p.h);
  const double v = 4.0 / (std::numbers::pi * std::numbers::pi) * dv * dv;
  const double alpha = v > 0.0 ? v / ((1.0 - overlap) + v) : 0.0;
  return std::clamp(overlap - distance_term - alpha * v, -1.0, 1.0);
}

MetricReport compute_metrics(const std::vector<BoundingBox>& pred, const std::vector<BoundingBox>& truth,
                             const std::vector<int>& absent) {
  if (pred.size() != truth.size() || (!absent.empty() && absent.size() != truth.size()))
    throw std::invalid_argument("compute_metrics: " + std::to_string(pred.size()) + " predictions for " +
                                std::to_string(truth.size()) + " frames");
  std::vector<double> overlaps, complete, errors, norm_errors;
  double acc = 0.0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    const bool visible = absent.empty() || absent[t] == 0;
    if (!visible) {
      acc += pred[t].empty() ? 1.0 : 0.0;
      continue;
    }
    const double o = iou(pred[t], truth[t]);
    overlaps.push_back(o);
    complete.push_back(complete_iou(pred[t], truth[t]));
    errors.push_back(center_error(pred[t], truth[t]));
    norm_errors.push_back(normalized_center_error(pred[t], truth[t]));
    acc += o;
  }
  MetricReport r;
  r.frames = truth.size();
  r.evaluated_frames = overlaps.size();
  r.success = fraction_above(overlaps, overlap_thresholds());
  r.complete_success = fraction_above(complete, overlap_thresholds());
  r.precision_curve = fraction_within(errors, precision_thresholds());
  r.norm_precision_curve = fraction_within(norm_errors, normalized_precision_thresholds());
  r.auc = curve_mean(r.success);
  r.cauc = curve_mean(r.complete_success);
  r.norm_precision = curve_mean(r.norm_precision_curve);
  r.precision = r.precision_curve.values[static_cast<std::size_t>(kPrecisionPixels)];
  r.macc = truth.empty() ? 0.0 : acc / static_cast<double>(truth.size());
  return r;
}

MetricReport compute_metrics(const std::vector<BoundingBox>& predictions, const SequenceAnnotation& seq) {
  return compute_metrics(predictions, seq.boxes, seq.absent);
}

MetricReport average_reports(const std::vector<MetricReport>& reports) {
  MetricReport out;
  if (reports.empty()) return out;
  for (const auto& r : reports) {
    out.auc += r.auc;
    out.precision += r.precision;
    out.norm_precision += r.norm_precision;
    out.cauc += r.cauc;
    out.macc += r.macc;
    out.frames += r.frames;
    out.evaluated_frames += r.evaluated_frames;
    accumulate(out.success, r.success);
    accumulate(out.precision_curve, r.precision_curve);
    accumulate(out.norm_precision_curve, r.norm_precision_curve);
    accumulate(out.complete_success, r.complete_success);
  }
  const double f = 1.0 / static_cast<double>(reports.size());
  out.auc *= f;
  out.precision *= f;
  out.norm_precision *= f;
  out.cauc *= f;
  out.macc *= f;
  scale(out.success, f);
  scale(out.precision_curve, f);
  scale(out.norm_precision_curve, f);
  scale(out.complete_success, f);
  return out;
}

std::vector<AttributeSlice> attribute_report(const std::map<std::string, MetricReport>& reports,
                                             const std::vector<SequenceAnnotation>& annotations) {
  std::map<std::string, const SequenceAnnotation*> by_id;
  for (const auto& a : annotations) by_id[a.id] = &a;
  std::vector<AttributeSlice> slices;
  for (std::size_t i = 0; i < kAttributeCount; ++i) {
    const auto attr = static_cast<Attribute>(i);
    const int levels = is_leveled(attr) ? 3 : 1;
    for (int level = 0; level < levels; ++level) {
      AttributeSlice slice;
      std::vector<MetricReport> members;
      for (const auto& [id, report] : reports) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw std::invalid_argument("attribute_report: no annotation for sequence " + id);
        const int v = it->second->attributes.get(attr);
        if (is_leveled(attr) ? v != level : v == 0) continue;
        slice.label = it->second->attributes.label(attr);
        slice.sequences.push_back(id);
        members.push_back(report);
      }
      if (members.empty()) {
        AttributeSet probe;
        probe.set(attr, is_leveled(attr) ? level : 1);
        spdlog::debug("attribute slice {} is empty; omitted", probe.label(attr));
        continue;
      }
      slice.report = average_reports(members);
      slices.push_back(std::move(slice));
    }
  }
  return slices;
}

}  // namespace cost
