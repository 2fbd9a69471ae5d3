#include <doctest.h>

#include <algorithm>

#include "patchtriage/infer.hpp"
#include "patchtriage/phantom.hpp"
#include "patchtriage/random.hpp"

using namespace patchtriage;

namespace {

PatchProbs random_probs(int K, int C, std::uint64_t seed) {
  Rng rng(seed);
  PatchProbs p{C, {}};
  for (int k = 0; k < K; ++k) {
    std::vector<double> row(static_cast<std::size_t>(C));
    double sum = 0.0;
    // coarse values so ties in votes and in summed probability both occur
    for (auto& v : row) sum += (v = static_cast<double>(rng.uniform_int(1, 4)));
    for (auto& v : row) v /= sum;
    p.rows.push_back(row);
  }
  return p;
}

// Independent recount: argmax per row (lowest index on equal probability),
// then the tie-break chain.
int recount(const PatchProbs& p) {
  std::vector<int> votes(static_cast<std::size_t>(p.num_classes), 0);
  std::vector<double> mass(static_cast<std::size_t>(p.num_classes), 0.0);
  for (const auto& row : p.rows) {
    int best = 0;
    for (int c = 1; c < p.num_classes; ++c)
      if (row[c] > row[best]) best = c;
    ++votes[best];
    for (int c = 0; c < p.num_classes; ++c) mass[c] += row[c];
  }
  int winner = 0;
  for (int c = 1; c < p.num_classes; ++c) {
    if (votes[c] > votes[winner] || (votes[c] == votes[winner] && mass[c] > mass[winner])) winner = c;
  }
  return winner;
}

ClassifierModel small_model(std::uint64_t seed) {
  ClassifierSpec spec{.input_height = 32, .input_width = 32, .pool = 2};
  return {spec, init_classifier_params<float>(spec, seed)};
}

}  // namespace

TEST_CASE("majority vote basics") {
  PatchProbs all3{4, std::vector<std::vector<double>>(100, {0.1, 0.1, 0.1, 0.7})};
  Verdict v = majority_vote(all3);
  CHECK(v.predicted_class == 3);
  CHECK(v.votes == std::vector<int>{0, 0, 0, 100});

  PatchProbs split{3, {}};
  for (int i = 0; i < 50; ++i) split.rows.push_back({0.2, 0.1, 0.7});   // votes 2, strongly
  for (int i = 0; i < 50; ++i) split.rows.push_back({0.45, 0.1, 0.45}); // votes 0 (lowest index)
  for (int i = 0; i < 50; ++i) split.rows.push_back({0.6, 0.2, 0.2});   // votes 0
  for (int i = 0; i < 50; ++i) split.rows.push_back({0.3, 0.1, 0.6});   // votes 2
  Verdict s = majority_vote(split);
  CHECK(s.votes == std::vector<int>{100, 0, 100});
  CHECK(s.predicted_class == 2);  // summed 0.7+0.45+0.2+0.6 beats 0.2+0.45+0.6+0.3

  PatchProbs even{2, {{0.5, 0.5}, {0.5, 0.5}}};
  CHECK(majority_vote(even).predicted_class == 0);
  CHECK_THROWS_AS(majority_vote(PatchProbs{2, {}}), InvalidArgument);
}

TEST_CASE("majority vote agrees with a recount") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    PatchProbs p = random_probs(1 + static_cast<int>(seed % 9), 2 + static_cast<int>(seed % 4), seed);
    CHECK(majority_vote(p).predicted_class == recount(p));
  }
}

TEST_CASE("classify_patches preserves order") {
  ClassifierModel model = small_model(1);
  Rng rng(2);
  Patch a(32, 32), b(32, 32);
  for (float& v : a.pixels()) v = static_cast<float>(rng.uniform(0, 255));
  for (float& v : b.pixels()) v = static_cast<float>(rng.uniform(0, 255));
  std::vector<Patch> list{a, b, a, b};
  PatchProbs p = classify_patches(list, model);
  REQUIRE(p.size() == 4);
  CHECK(p.rows[0] == p.rows[2]);
  CHECK(p.rows[1] == p.rows[3]);
  CHECK(p.rows[0] != p.rows[1]);
}

TEST_CASE("classify_image") {
  ClassifierModel model = small_model(3);
  Phantom ph = gen_phantom(default_phantom_spec(PhantomClass::tb, 128, 4));
  RasterImage img(ph.image.height, ph.image.width);
  for (std::size_t i = 0; i < img.size(); ++i) img.pixels()[i] = ph.image.values[i];

  ImageClassification a = classify_image(img, ph.mask, model, 12, 32, 32, 5);
  ImageClassification b = classify_image(img, ph.mask, model, 12, 32, 32, 5);
  CHECK(a.verdict.predicted_class == b.verdict.predicted_class);
  CHECK(a.probs.rows == b.probs.rows);
  CHECK(a.placements == b.placements);
  int total = 0;
  for (int v : a.verdict.votes) total += v;
  CHECK(total == 12);

  ImageClassification one = classify_image(img, ph.mask, model, 1, 32, 32, 6);
  const auto& row = one.probs.rows[0];
  CHECK(one.verdict.predicted_class == std::max_element(row.begin(), row.end()) - row.begin());

  CHECK_THROWS_AS(classify_image(img, LabelMask(128, 128), model, 4, 32, 32, 1), NoLungError);
}

TEST_CASE("global baseline input") {
  ClassifierModel model = small_model(7);
  Phantom ph = gen_phantom(default_phantom_spec(PhantomClass::normal, 64, 8));
  RasterImage img(64, 64, 100.0f);
  RasterImage in = global_input(img, ph.mask, model.spec);
  CHECK(in.height() == 32);
  CHECK(in.width() == 32);
  auto probs = classify_global(img, ph.mask, model);
  CHECK(probs.size() == 4);
  double sum = 0.0;
  for (double p : probs) sum += p;
  CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("probability json round trip") {
  PatchProbs p = random_probs(3, 4, 9);
  nlohmann::json j = p;
  PatchProbs back = j.get<PatchProbs>();
  CHECK(back.num_classes == 4);
  CHECK(back.rows == p.rows);
}
