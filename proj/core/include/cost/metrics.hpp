#pragma once

#include <map>
#include <string>
#include <vector>

#include "cost/box.hpp"
#include "cost/dataset.hpp"

namespace cost {

struct Curve {
  std::vector<double> thresholds;
  std::vector<double> values;
};

/// Threshold grids. Success curves count IoU > t; precision curves count error <= t.
std::vector<double> overlap_thresholds();             ///< 0.00, 0.01, ..., 1.00
std::vector<double> precision_thresholds();           ///< 0, 1, ..., 50 px
std::vector<double> normalized_precision_thresholds();  ///< 0.00, 0.01, ..., 0.50

inline constexpr double kPrecisionPixels = 20.0;

struct MetricReport {
  double auc = 0.0;
  double precision = 0.0;  ///< P at 20 px
  double norm_precision = 0.0;
  double cauc = 0.0;
  double macc = 0.0;
  Curve success;
  Curve precision_curve;
  Curve norm_precision_curve;
  Curve complete_success;
  std::size_t frames = 0;
  std::size_t evaluated_frames = 0;  ///< visible frames
};

/// IoU minus the normalized centre distance (over the enclosing diagonal) and
/// the aspect-consistency term, clamped to [-1, 1].
double complete_iou(const BoundingBox& pred, const BoundingBox& gt);
/// Euclidean centre distance in pixels.
double center_error(const BoundingBox& pred, const BoundingBox& gt);
/// Centre offset divided per axis by the ground-truth width and height.
double normalized_center_error(const BoundingBox& pred, const BoundingBox& gt);

/// Absent frames are left out of the overlap and precision metrics; mACC
/// averages IoU on visible frames and absence credit (empty prediction) on
/// absent ones. Throws std::invalid_argument on a length mismatch.
MetricReport compute_metrics(const std::vector<BoundingBox>& predictions, const std::vector<BoundingBox>& truth,
                             const std::vector<int>& absent);
MetricReport compute_metrics(const std::vector<BoundingBox>& predictions, const SequenceAnnotation& seq);

/// Element-wise mean of scalars and curves over sequences.
MetricReport average_reports(const std::vector<MetricReport>& reports);

struct AttributeSlice {
  std::string label;  ///< "SD", "BRI=low", ...
  std::vector<std::string> sequences;
  MetricReport report;
};

/// One slice per attribute value present in at least one sequence, averaged
/// over the sequences carrying it. Empty slices are omitted. Throws
/// std::invalid_argument if a report has no matching annotation.
std::vector<AttributeSlice> attribute_report(const std::map<std::string, MetricReport>& reports,
                                             const std::vector<SequenceAnnotation>& annotations);

}  // namespace cost
