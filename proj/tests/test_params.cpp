#include <doctest.h>

#include <fstream>

#include "oracles.hpp"
#include "patchtriage/classifier.hpp"
#include "patchtriage/params.hpp"

using namespace patchtriage;

TEST_CASE("params bookkeeping") {
  ModelParams p;
  p.add("w", {2, 3}, true, 1.5f);
  p.add("b", {2}, false);
  CHECK(p.tensor_count() == 2);
  CHECK(p.value_count() == 8);
  CHECK(p.find("w").values.size() == 6);
  CHECK_THROWS_AS(p.find("nope"), InvalidArgument);

  ModelParams z = p.zeros_like();
  CHECK(z.same_layout(p));
  for (float v : z.find("w").values) CHECK(v == 0.0f);

  z.axpy(2.0f, p);
  CHECK(z.find("w").values[0] == 3.0f);
  ModelParams other;
  other.add("w", {6}, true);
  other.add("b", {2}, false);
  CHECK_FALSE(other.same_layout(p));
  CHECK_THROWS_AS(z.axpy(1.0f, other), InvalidArgument);

  CHECK(p.all_finite());
  p.find("b").values[1] = std::nanf("");
  CHECK_FALSE(p.all_finite());
}

TEST_CASE("checkpoint round trip") {
  oracle::TempDir dir("params");
  ClassifierSpec spec{.input_height = 16, .input_width = 16, .pool = 2};
  ModelParams p = init_classifier_params<float>(spec, 3);
  nlohmann::json meta = {{"kind", "classifier"}, {"seed", 3}};
  save_params(p, dir.path() / "ckpt", meta);
  LoadedParams back = load_params(dir.path() / "ckpt");
  CHECK(back.params == p);
  CHECK(back.metadata == meta);
  for (std::size_t i = 0; i < p.tensor_count(); ++i) CHECK(back.params[i].regularized == p[i].regularized);

  std::ifstream bin(dir.path() / "ckpt.bin", std::ios::binary | std::ios::ate);
  CHECK(static_cast<std::size_t>(bin.tellg()) == p.value_count() * 4);
}

TEST_CASE("checkpoint IO failures") {
  oracle::TempDir dir("params");
  CHECK_THROWS_AS(load_params(dir.path() / "absent"), IoError);
  ModelParams p;
  p.add("w", {4}, true, 1.0f);
  save_params(p, dir.path() / "ok");
  std::filesystem::resize_file(dir.path() / "ok.bin", 8);
  CHECK_THROWS_AS(load_params(dir.path() / "ok"), IoError);
  std::ofstream(dir.path() / "bad.json") << "{";
  std::ofstream(dir.path() / "bad.bin") << "";
  CHECK_THROWS_AS(load_params(dir.path() / "bad"), IoError);
  CHECK_THROWS_AS(save_params(p, dir.path() / "no" / "such"), IoError);
}
