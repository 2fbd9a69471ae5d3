#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace patchtriage {

/// C x C counts; rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  int num_classes() const noexcept { return classes_; }
  std::int64_t at(int truth, int predicted) const;
  void add(int truth, int predicted, std::int64_t count = 1);
  std::int64_t total() const noexcept;
  std::int64_t row_sum(int truth) const;
  std::int64_t col_sum(int predicted) const;

 private:
  int classes_;
  std::vector<std::int64_t> counts_;
};

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> truths, int num_classes);

struct OneVsRest {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// numerator / denominator, or 0 flagged degenerate when the denominator is 0.
struct MetricValue {
  std::int64_t numerator = 0;
  std::int64_t denominator = 0;
  double value = 0.0;
  bool degenerate = false;
};

struct ClassMetrics {
  OneVsRest counts;
  MetricValue accuracy, precision, recall, f1, specificity;
};

struct MacroMetrics {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0, specificity = 0;
};

struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  MacroMetrics macro;
  /// trace / total, the plain multi-class accuracy.
  double plain_accuracy = 0.0;
};

OneVsRest one_vs_rest(const ConfusionMatrix& cm, int cls);

/// Per-class one-vs-rest metrics and their unweighted (macro) means.
MetricsReport metrics_from_confusion(const ConfusionMatrix& cm);

nlohmann::json to_json(const ConfusionMatrix& cm);
nlohmann::json to_json(const MetricsReport& report);

/// Aligned text table: one row per class plus a macro row.
std::string metrics_table(const MetricsReport& report, std::span<const std::string> class_names);

}  // namespace patchtriage
