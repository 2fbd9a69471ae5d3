#include <doctest.h>

#include "oracles.hpp"
#include "patchtriage/metrics.hpp"
#include "patchtriage/random.hpp"

using namespace patchtriage;

namespace {

ConfusionMatrix from_rows(const std::vector<std::vector<int>>& rows) {
  ConfusionMatrix cm(static_cast<int>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t p = 0; p < rows.size(); ++p) cm.add(static_cast<int>(t), static_cast<int>(p), rows[t][p]);
  return cm;
}

}  // namespace

TEST_CASE("confusion counts") {
  std::vector<int> labels{0, 1, 2, 3, 2, 1};
  ConfusionMatrix perfect = confusion(labels, labels, 4);
  for (int t = 0; t < 4; ++t)
    for (int p = 0; p < 4; ++p) CHECK(perfect.at(t, p) == (t == p ? (t == 1 || t == 2 ? 2 : 1) : 0));

  ConfusionMatrix single = confusion(std::vector<int>{2}, std::vector<int>{1}, 3);
  CHECK(single.at(1, 2) == 1);
  CHECK(single.total() == 1);
  CHECK_THROWS_AS(confusion(std::vector<int>{4}, std::vector<int>{0}, 4), InvalidArgument);
  CHECK_THROWS_AS(confusion(std::vector<int>{0, 1}, std::vector<int>{0}, 2), InvalidArgument);
}

TEST_CASE("two-class hand example") {
  MetricsReport r = metrics_from_confusion(from_rows({{8, 2}, {3, 7}}));
  const ClassMetrics& c0 = r.per_class[0];
  CHECK(c0.counts.tp == 8);
  CHECK(c0.counts.fn == 2);
  CHECK(c0.counts.fp == 3);
  CHECK(c0.counts.tn == 7);
  CHECK(c0.precision.numerator == 8);
  CHECK(c0.precision.denominator == 11);
  CHECK(c0.precision.value == doctest::Approx(8.0 / 11.0));
  CHECK(c0.recall.value == doctest::Approx(0.8));
  CHECK(c0.specificity.value == doctest::Approx(0.7));
  CHECK(c0.accuracy.value == doctest::Approx(0.75));
  const double f1 = 2 * (8.0 / 11 * 0.8) / (8.0 / 11 + 0.8);
  CHECK(c0.f1.value == doctest::Approx(f1));
  CHECK(r.plain_accuracy == doctest::Approx(0.75));
  const ClassMetrics& c1 = r.per_class[1];
  CHECK(c1.precision.value == doctest::Approx(7.0 / 9.0));
  CHECK(r.macro.precision == doctest::Approx((8.0 / 11 + 7.0 / 9) / 2));
}

TEST_CASE("perfect and degenerate matrices") {
  MetricsReport perfect = metrics_from_confusion(from_rows({{5, 0, 0, 0}, {0, 2, 0, 0}, {0, 0, 7, 0}, {0, 0, 0, 1}}));
  CHECK(perfect.macro.accuracy == 1.0);
  CHECK(perfect.macro.precision == 1.0);
  CHECK(perfect.macro.recall == 1.0);
  CHECK(perfect.macro.f1 == 1.0);
  CHECK(perfect.macro.specificity == 1.0);

  MetricsReport absent = metrics_from_confusion(from_rows({{4, 1, 0}, {2, 3, 0}, {0, 0, 0}}));
  const ClassMetrics& c2 = absent.per_class[2];
  CHECK(c2.precision.degenerate);
  CHECK(c2.precision.value == 0.0);
  CHECK(c2.recall.degenerate);
  CHECK(c2.recall.value == 0.0);
  CHECK(c2.specificity.value == 1.0);
  CHECK(c2.f1.value == 0.0);
  CHECK_THROWS_AS(metrics_from_confusion(ConfusionMatrix(3)), InvalidArgument);
}

TEST_CASE("metrics match direct counts on random labels") {
  Rng rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const int C = rng.uniform_int(2, 6), n = rng.uniform_int(1, 60);
    std::vector<int> pred, truth;
    for (int i = 0; i < n; ++i) {
      pred.push_back(rng.uniform_int(0, C - 1));
      truth.push_back(rng.uniform_int(0, C - 1));
    }
    MetricsReport r = metrics_from_confusion(confusion(pred, truth, C));
    auto want = oracle::direct_counts(pred, truth, C);
    double macro_recall = 0.0;
    for (int c = 0; c < C; ++c) {
      const auto& got = r.per_class[c];
      CHECK(got.counts.tp == want[c].tp);
      CHECK(got.counts.fp == want[c].fp);
      CHECK(got.counts.fn == want[c].fn);
      CHECK(got.counts.tn == want[c].tn);
      CHECK(got.recall.value == doctest::Approx(oracle::safe_ratio(want[c].tp, want[c].tp + want[c].fn)));
      macro_recall += oracle::safe_ratio(want[c].tp, want[c].tp + want[c].fn) / C;
    }
    CHECK(r.macro.recall == doctest::Approx(macro_recall));
    int matches = 0;
    for (int i = 0; i < n; ++i) matches += pred[i] == truth[i];
    CHECK(r.plain_accuracy == doctest::Approx(static_cast<double>(matches) / n));
  }
}

TEST_CASE("metrics serialization") {
  MetricsReport r = metrics_from_confusion(from_rows({{8, 2}, {3, 7}}));
  nlohmann::json j = to_json(r);
  CHECK(j.contains("macro"));
  CHECK(j["per_class"].size() == 2);
  std::vector<std::string> names{"neg", "pos"};
  std::string table = metrics_table(r, names);
  CHECK(table.find("neg") != std::string::npos);
  CHECK(table.find("Macro") != std::string::npos);
  CHECK(to_json(from_rows({{8, 2}, {3, 7}})).dump() == "[[8,2],[3,7]]");
}
