#include "tgeval/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace tgeval {

namespace {

void check_threshold(double tau, const char* what) {
  if (!(tau > 0.0) || tau > 1.0) {
    throw std::invalid_argument(std::string(what) + " must lie in (0, 1], got " +
                                std::to_string(tau));
  }
}

double best_iou(const TimeInterval& w, const std::vector<TimeInterval>& gts) {
  double best = 0.0;
  for (const auto& gt : gts) best = std::max(best, interval_iou(w, gt));
  return best;
}

double best_iop(const TimeInterval& w, const std::vector<TimeInterval>& gts) {
  double best = 0.0;
  for (const auto& gt : gts) best = std::max(best, interval_iop(w, gt));
  return best;
}

}  // namespace

bool recall1_hit(const Prediction& pred, const std::vector<TimeInterval>& gts,
                 double tau) {
  check_threshold(tau, "recall threshold");
  if (pred.windows.empty() || gts.empty()) return false;
  return best_iou(pred.windows.front(), gts) >= tau;
}

double sample_miou(const Prediction& pred,
                   const std::vector<TimeInterval>& gts) {
  if (gts.empty()) {
    throw std::invalid_argument("sample_miou: ground truth must be non-empty");
  }
  if (pred.windows.empty()) return 0.0;
  return best_iou(pred.windows.front(), gts);
}

double sample_iop(const Prediction& pred,
                  const std::vector<TimeInterval>& gts) {
  if (gts.empty()) {
    throw std::invalid_argument("sample_iop: ground truth must be non-empty");
  }
  if (pred.windows.empty()) return 0.0;
  return best_iop(pred.windows.front(), gts);
}

double average_precision(const std::vector<TimeInterval>& preds,
                         const std::vector<TimeInterval>& gts, double tau) {
  check_threshold(tau, "AP threshold");
  if (gts.empty()) {
    throw std::invalid_argument(
        "average_precision: ground truth must be non-empty");
  }
  if (preds.empty()) return 0.0;

  std::vector<bool> matched(gts.size(), false);
  double ap = 0.0;
  int tp = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    int best = -1;
    double best_score = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (matched[g]) continue;
      const double iou = interval_iou(preds[k], gts[g]);
      if (iou < tau) continue;
      if (best < 0 || iou > best_score ||
          (iou == best_score &&
           gts[g].start_s < gts[static_cast<std::size_t>(best)].start_s)) {
        best = static_cast<int>(g);
        best_score = iou;
      }
    }
    if (best >= 0) {
      matched[static_cast<std::size_t>(best)] = true;
      ++tp;
      ap += static_cast<double>(tp) / static_cast<double>(k + 1);
    }
  }
  return ap / static_cast<double>(gts.size());
}

GqaScores gqa_metrics(
    const std::vector<std::pair<AnnotationSample, Prediction>>& rows,
    const MetricsConfig& cfg) {
  if (rows.empty()) {
    throw std::invalid_argument("gqa_metrics: no samples");
  }
  check_threshold(cfg.iop_threshold, "IoP threshold");
  for (const double tau : cfg.recall_thresholds) {
    check_threshold(tau, "recall threshold");
  }

  GqaScores out;
  for (const double tau : cfg.recall_thresholds) out.iop_at[tau] = 0.0;

  int correct = 0;
  int grounded_correct = 0;
  for (const auto& [sample, pred] : rows) {
    if (sample.task != Task::GroundedQA || !sample.qa_answer_index) {
      throw std::invalid_argument(
          "gqa_metrics: sample " + sample.video_id +
          " is not a grounded-QA sample with a gold answer");
    }
    const double iop = sample_iop(pred, sample.gt_windows);
    out.miop += iop;
    for (const double tau : cfg.recall_thresholds) {
      if (iop >= tau) out.iop_at[tau] += 1.0;
    }
    const bool answer_ok =
        pred.answer_index && *pred.answer_index == *sample.qa_answer_index;
    if (answer_ok) {
      ++correct;
      if (iop >= cfg.iop_threshold) ++grounded_correct;
    }
  }

  const double n = static_cast<double>(rows.size());
  out.miop = out.miop / n * 100.0;
  for (auto& [tau, count] : out.iop_at) count = count / n * 100.0;
  out.a_qa = static_cast<double>(correct) / n * 100.0;
  out.a_gqa = static_cast<double>(grounded_correct) / n * 100.0;
  return out;
}

MetricsReport compute_report(
    const std::vector<std::pair<AnnotationSample, Prediction>>& rows,
    const MetricsConfig& cfg) {
  if (rows.empty()) {
    throw std::invalid_argument("compute_report: no samples");
  }
  for (const double tau : cfg.recall_thresholds) {
    check_threshold(tau, "recall threshold");
  }
  for (const double tau : cfg.map_thresholds) {
    check_threshold(tau, "AP threshold");
  }
  check_threshold(cfg.iop_threshold, "IoP threshold");

  MetricsReport report;
  report.n_samples = static_cast<int>(rows.size());
  const double n = static_cast<double>(rows.size());

  for (const double tau : cfg.recall_thresholds) {
    report.r1_at[tau] = 0.0;
    report.iop_at[tau] = 0.0;
  }
  for (const double tau : cfg.map_thresholds) report.map_at[tau] = 0.0;
  for (const double tau : cfg.report_map_at) {
    check_threshold(tau, "AP threshold");
    report.map_at[tau] = 0.0;
  }

  for (const auto& [sample, pred] : rows) {
    if (pred.parse_status == ParseStatus::Failed) ++report.n_failed_parses;
    for (const double tau : cfg.recall_thresholds) {
      if (recall1_hit(pred, sample.gt_windows, tau)) report.r1_at[tau] += 1.0;
    }
    report.miou += sample_miou(pred, sample.gt_windows);
    const double iop = sample_iop(pred, sample.gt_windows);
    report.miop += iop;
    for (const double tau : cfg.recall_thresholds) {
      if (iop >= tau) report.iop_at[tau] += 1.0;
    }
    for (auto& [tau, sum] : report.map_at) {
      sum += average_precision(pred.windows, sample.gt_windows, tau);
    }
  }

  for (auto& [tau, sum] : report.r1_at) sum = sum / n * 100.0;
  for (auto& [tau, sum] : report.iop_at) sum = sum / n * 100.0;
  report.miou = report.miou / n * 100.0;
  report.miop = report.miop / n * 100.0;
  for (auto& [tau, sum] : report.map_at) sum = sum / n * 100.0;
  double avg = 0.0;
  for (const double tau : cfg.map_thresholds) avg += report.map_at.at(tau);
  report.map_avg = avg / static_cast<double>(cfg.map_thresholds.size());

  const bool all_gqa = std::all_of(
      rows.begin(), rows.end(), [](const auto& row) {
        return row.first.task == Task::GroundedQA &&
               row.first.qa_answer_index.has_value();
      });
  if (all_gqa) {
    const GqaScores gqa = gqa_metrics(rows, cfg);
    report.a_qa = gqa.a_qa;
    report.a_gqa = gqa.a_gqa;
  }
  return report;
}

MetricsReport average_reports(const std::vector<MetricsReport>& runs) {
  if (runs.empty()) {
    throw std::invalid_argument("average_reports: no runs");
  }
  MetricsReport avg = runs.front();
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const MetricsReport& r = runs[i];
    if (r.n_samples != avg.n_samples || r.r1_at.size() != avg.r1_at.size() ||
        r.map_at.size() != avg.map_at.size() ||
        r.iop_at.size() != avg.iop_at.size() ||
        r.a_qa.has_value() != avg.a_qa.has_value()) {
      throw std::invalid_argument(
          "average_reports: runs disagree on shape; cannot average");
    }
    for (auto& [tau, v] : avg.r1_at) v += r.r1_at.at(tau);
    for (auto& [tau, v] : avg.map_at) v += r.map_at.at(tau);
    for (auto& [tau, v] : avg.iop_at) v += r.iop_at.at(tau);
    avg.miou += r.miou;
    avg.miop += r.miop;
    avg.map_avg += r.map_avg;
    if (avg.a_qa) *avg.a_qa += *r.a_qa;
    if (avg.a_gqa) *avg.a_gqa += *r.a_gqa;
    avg.n_failed_parses += r.n_failed_parses;
  }
  const double n = static_cast<double>(runs.size());
  for (auto& [tau, v] : avg.r1_at) v /= n;
  for (auto& [tau, v] : avg.map_at) v /= n;
  for (auto& [tau, v] : avg.iop_at) v /= n;
  avg.miou /= n;
  avg.miop /= n;
  avg.map_avg /= n;
  if (avg.a_qa) *avg.a_qa /= n;
  if (avg.a_gqa) *avg.a_gqa /= n;
  return avg;
}

}  // namespace tgeval
