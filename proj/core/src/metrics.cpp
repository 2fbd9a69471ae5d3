#include "patchtriage/metrics.hpp"

#include <iomanip>
#include <sstream>
#include <string>

#include "patchtriage/errors.hpp"

namespace patchtriage {

ConfusionMatrix::ConfusionMatrix(int num_classes) : classes_(num_classes) {
  if (num_classes < 1) throw InvalidArgument("confusion matrix needs at least one class");
  counts_.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
}

std::int64_t ConfusionMatrix::at(int truth, int predicted) const {
  if (truth < 0 || truth >= classes_ || predicted < 0 || predicted >= classes_) {
    throw InvalidArgument("confusion matrix index out of range");
  }
  return counts_[static_cast<std::size_t>(truth) * classes_ + predicted];
}

void ConfusionMatrix::add(int truth, int predicted, std::int64_t count) {
  if (truth < 0 || truth >= classes_ || predicted < 0 || predicted >= classes_) {
    throw InvalidArgument("class id out of range");
  }
  if (count < 0) throw InvalidArgument("confusion counts must be non-negative");
  counts_[static_cast<std::size_t>(truth) * classes_ + predicted] += count;
}

std::int64_t ConfusionMatrix::total() const noexcept {
  std::int64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::int64_t ConfusionMatrix::row_sum(int truth) const {
  std::int64_t s = 0;
  for (int p = 0; p < classes_; ++p) s += at(truth, p);
  return s;
}

std::int64_t ConfusionMatrix::col_sum(int predicted) const {
  std::int64_t s = 0;
  for (int t = 0; t < classes_; ++t) s += at(t, predicted);
  return s;
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> truths, int num_classes) {
  if (predictions.size() != truths.size()) throw InvalidArgument("confusion: predictions and truths differ in length");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < truths.size(); ++i) cm.add(truths[i], predictions[i]);
  return cm;
}

OneVsRest one_vs_rest(const ConfusionMatrix& cm, int cls) {
  OneVsRest o;
  o.tp = cm.at(cls, cls);
  o.fn = cm.row_sum(cls) - o.tp;
  o.fp = cm.col_sum(cls) - o.tp;
  o.tn = cm.total() - o.tp - o.fn - o.fp;
  return o;
}

namespace {

MetricValue ratio(std::int64_t num, std::int64_t den) {
  MetricValue m{num, den, 0.0, den == 0};
  if (den != 0) m.value = static_cast<double>(num) / static_cast<double>(den);
  return m;
}

}  // namespace

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total <= 0) throw InvalidArgument("metrics_from_confusion: empty confusion matrix");
  MetricsReport rep;
  const int C = cm.num_classes();
  std::int64_t trace = 0;
  for (int c = 0; c < C; ++c) {
    ClassMetrics m;
    m.counts = one_vs_rest(cm, c);
    const auto& o = m.counts;
    trace += o.tp;
    m.accuracy = ratio(o.tp + o.tn, o.tp + o.tn + o.fn + o.fp);
    m.precision = ratio(o.tp, o.tp + o.fp);
    m.recall = ratio(o.tp, o.tp + o.fn);
    m.specificity = ratio(o.tn, o.tn + o.fp);
    // 2PR/(P+R) reduces to 2TP/(2TP+FP+FN) whenever it is defined; it is
    // undefined when P or R is, or when P + R == 0 (TP == 0).
    m.f1 = ratio(2 * o.tp, 2 * o.tp + o.fp + o.fn);
    if (m.precision.degenerate || m.recall.degenerate || o.tp == 0) {
      m.f1.value = 0.0;
      m.f1.degenerate = true;
    }
    rep.macro.accuracy += m.accuracy.value;
    rep.macro.precision += m.precision.value;
    rep.macro.recall += m.recall.value;
    rep.macro.f1 += m.f1.value;
    rep.macro.specificity += m.specificity.value;
    rep.per_class.push_back(m);
  }
  const double n = static_cast<double>(C);
  rep.macro.accuracy /= n;
  rep.macro.precision /= n;
  rep.macro.recall /= n;
  rep.macro.f1 /= n;
  rep.macro.specificity /= n;
  rep.plain_accuracy = static_cast<double>(trace) / static_cast<double>(total);
  return rep;
}

nlohmann::json to_json(const ConfusionMatrix& cm) {
  nlohmann::json rows = nlohmann::json::array();
  for (int t = 0; t < cm.num_classes(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < cm.num_classes(); ++p) row.push_back(cm.at(t, p));
    rows.push_back(row);
  }
  return rows;
}

namespace {

nlohmann::json metric_json(const MetricValue& m) {
  nlohmann::json j{{"value", m.value}, {"numerator", m.numerator}, {"denominator", m.denominator}};
  if (m.degenerate) j["degenerate"] = true;
  return j;
}

}  // namespace

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& m : report.per_class) {
    per.push_back({{"tp", m.counts.tp},
                   {"fp", m.counts.fp},
                   {"fn", m.counts.fn},
                   {"tn", m.counts.tn},
                   {"accuracy", metric_json(m.accuracy)},
                   {"precision", metric_json(m.precision)},
                   {"recall", metric_json(m.recall)},
                   {"f1", metric_json(m.f1)},
                   {"specificity", metric_json(m.specificity)}});
  }
  return {{"per_class", per},
          {"macro",
           {{"accuracy", report.macro.accuracy},
            {"precision", report.macro.precision},
            {"recall", report.macro.recall},
            {"f1", report.macro.f1},
            {"specificity", report.macro.specificity}}},
          {"plain_accuracy", report.plain_accuracy}};
}

std::string metrics_table(const MetricsReport& report, std::span<const std::string> class_names) {
  std::ostringstream out;
  out << std::left << std::setw(14) << "Class" << std::right;
  for (const char* h : {"Accuracy", "Precision", "Recall", "F1 score", "Specificity"}) out << std::setw(13) << h;
  out << '\n' << std::fixed << std::setprecision(1);
  auto row = [&](const std::string& name, double a, double p, double r, double f, double s) {
    out << std::left << std::setw(14) << name << std::right;
    for (double v : {a, p, r, f, s}) out << std::setw(13) << 100.0 * v;
    out << '\n';
  };
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto& m = report.per_class[c];
    const std::string name = c < class_names.size() ? class_names[c] : "class " + std::to_string(c);
    row(name, m.accuracy.value, m.precision.value, m.recall.value, m.f1.value, m.specificity.value);
  }
  const auto& M = report.macro;
  row("Macro", M.accuracy, M.precision, M.recall, M.f1, M.specificity);
  out << "Plain accuracy: " << 100.0 * report.plain_accuracy << '\n';
  return out.str();
}

}  // namespace patchtriage
