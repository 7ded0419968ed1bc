#pragma once

// Scoring: top-1 recall at IoU thresholds, mean IoU, detection-style average
// precision over ranked window lists, IoP statistics, and grounded-QA
// accuracies. All dataset-level numbers are percentages in [0, 100].

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "tgeval/core.hpp"

namespace tgeval {

struct MetricsConfig {
  std::vector<double> recall_thresholds = {0.5, 0.7};
  std::vector<double> map_thresholds = {0.50, 0.55, 0.60, 0.65, 0.70,
                                        0.75, 0.80, 0.85, 0.90, 0.95};
  // Subset of map_thresholds called out individually in text reports.
  std::vector<double> report_map_at = {0.5, 0.75};
  double iop_threshold = 0.5;
};

struct MetricsReport {
  std::map<double, double> r1_at;
  double miou = 0.0;
  std::map<double, double> map_at;
  double map_avg = 0.0;
  double miop = 0.0;
  std::map<double, double> iop_at;
  std::optional<double> a_gqa;
  std::optional<double> a_qa;
  int n_samples = 0;
  int n_failed_parses = 0;
};

// True iff the top-1 window (list position 0) reaches IoU >= tau against the
// best-matching ground-truth window. Empty prediction is a miss.
bool recall1_hit(const Prediction& pred, const std::vector<TimeInterval>& gts,
                 double tau);

// IoU of the top-1 window against its best-matching ground truth; 0 without
// windows. Throws std::invalid_argument on empty gts.
double sample_miou(const Prediction& pred,
                   const std::vector<TimeInterval>& gts);

// IoP of the top-1 window against its best-matching ground truth; 0 without
// windows. Throws std::invalid_argument on empty gts.
double sample_iop(const Prediction& pred,
                  const std::vector<TimeInterval>& gts);

// Detection AP at one IoU threshold. Predictions are ranked by list position;
// each matches the highest-IoU not-yet-matched ground truth (ties to the
// earlier gt start). AP is the mean of precision-at-true-positive-ranks,
// normalized by |gts|. Throws std::invalid_argument on empty gts.
double average_precision(const std::vector<TimeInterval>& preds,
                         const std::vector<TimeInterval>& gts, double tau);

struct GqaScores {
  double miop = 0.0;
  std::map<double, double> iop_at;
  double a_gqa = 0.0;
  double a_qa = 0.0;
};

// Grounded-QA accuracies over (sample, prediction) pairs: A@QA is answer
// accuracy, A@GQA additionally requires IoP >= cfg.iop_threshold on the same
// sample. Throws std::invalid_argument when a sample is not GroundedQA or
// lacks a gold answer.
GqaScores gqa_metrics(
    const std::vector<std::pair<AnnotationSample, Prediction>>& rows,
    const MetricsConfig& cfg);

// Full single-run report over (sample, prediction) pairs. a_qa/a_gqa are
// filled only when every sample is a GroundedQA sample with a gold answer.
// Throws std::invalid_argument on empty input or out-of-range thresholds.
MetricsReport compute_report(
    const std::vector<std::pair<AnnotationSample, Prediction>>& rows,
    const MetricsConfig& cfg);

// Field-wise mean over per-run reports (thresholds and n_samples must agree);
// n_failed_parses is summed, not averaged, so it counts failures across all
// runs. Throws std::invalid_argument on empty or inconsistent input.
MetricsReport average_reports(const std::vector<MetricsReport>& runs);

}  // namespace tgeval
