#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "oracles.hpp"
#include "patchtriage/digest.hpp"
#include "patchtriage/image_io.hpp"
#include "patchtriage/infer.hpp"
#include "patchtriage/params.hpp"
#include "patchtriage/preprocess.hpp"
#include "patchtriage/saliency.hpp"

using namespace patchtriage;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kConfig = R"({"seed": 5, "preprocess": {"classification_size": 64, "segmentation_size": 64},
  "patches": {"K": 6, "p": 32, "q": 32}, "model": {"pool": 1, "conv1_channels": 4, "conv2_channels": 8},
  "train": {"max_epochs": 2, "learning_rate": 0.003, "validation_K": 4, "patches_per_image": 4},
  "segmenter": {"max_epochs": 2},
  "phantom": {"n_per_class": 10, "image_size": 64}})";

// One dataset and one classifier shared by every case.
struct Workspace {
  oracle::TempDir tmp{"cli"};
  fs::path config, ds, manifest, cls, image, mask;

  Workspace() {
    config = tmp / "config.json";
    std::ofstream(config) << kConfig;
    ds = tmp / "ds";
    manifest = ds / "manifest.json";
    cls = tmp / "cls";
    image = ds / "images" / "viral_covid_0000.png";
    mask = ds / "masks" / "viral_covid_0000.png";
    REQUIRE(run({"gen-phantoms", "--config", config.string(), "--out", ds.string()}).code == 0);
    REQUIRE(run({"train", "--task", "cls", "--config", config.string(), "--manifest", manifest.string(), "--out",
                 cls.string()})
                .code == 0);
  }
  std::string path(const std::string& name) const { return (tmp / name).string(); }
  std::string checkpoint() const { return (cls / "classifier").string(); }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("gen-phantoms writes a manifest and is repeatable") {
  auto& w = workspace();
  CHECK(fs::exists(w.manifest));
  const std::string again = w.path("ds2");
  Run r = run({"gen-phantoms", "--config", w.config.string(), "--out", again});
  CHECK(r.code == 0);
  CHECK(r.out.find("manifest.json") != std::string::npos);
  CHECK(slurp(w.manifest) == slurp(fs::path(again) / "manifest.json"));
  CHECK(read_json(w.manifest)["items"].size() == 40);
}

TEST_CASE("exit codes") {
  auto& w = workspace();
  CHECK(run({"gen-phantoms", "--config", w.config.string(), "--out", w.path("missing/parent/ds")}).code == 3);
  CHECK(run({"train", "--task", "cls", "--config", w.config.string(), "--manifest", w.path("nope/manifest.json"),
             "--out", w.path("x")})
            .code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"train", "--task", "bogus", "--manifest", w.manifest.string(), "--out", w.path("x")}).code == 2);

  std::ofstream(w.path("bad_config.json")) << R"({"patches": {"K": 4, "colour": 1}})";
  Run bad = run({"gen-phantoms", "--config", w.path("bad_config.json"), "--out", w.path("bad_ds")});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("colour") != std::string::npos);

  std::ofstream(w.path("p.json")) << "[0, 1, 2]";
  std::ofstream(w.path("t.json")) << "[0, 1]";
  CHECK(run({"evaluate", "--predictions", w.path("p.json"), "--truths", w.path("t.json")}).code == 2);

  write_mask(w.path("empty_mask.png"), LabelMask(64, 64));
  Run nolung = run({"infer", "--config", w.config.string(), "--image", w.image.string(), "--mask",
                    w.path("empty_mask.png"), "--checkpoint", w.checkpoint(), "--out", w.path("v.json")});
  CHECK(nolung.code == 4);
  CHECK(!nolung.err.empty());
}

TEST_CASE("train writes checkpoints, curves and reports") {
  auto& w = workspace();
  json curves = read_json(w.cls / "classifier_curves.json");
  CHECK(curves.dump().find("val_f1") != std::string::npos);
  json report = read_json(w.cls / "classifier_report.json");
  CHECK(report["seed"] == 5);
  CHECK(report.contains("config"));
  CHECK(fs::exists(w.cls / "classifier.bin"));

  const std::string seg = w.path("seg");
  REQUIRE(run({"train", "--task", "seg", "--config", w.config.string(), "--manifest", w.manifest.string(), "--out",
               seg})
              .code == 0);
  json seg_report = read_json(fs::path(seg) / "segmenter_report.json");
  CHECK(seg_report.contains("test_lung_jaccard"));

  // a rerun reproduces the checkpoint bytes
  const std::string again = w.path("cls_again");
  REQUIRE(run({"train", "--task", "cls", "--config", w.config.string(), "--manifest", w.manifest.string(), "--out",
               again})
              .code == 0);
  CHECK(slurp(w.cls / "classifier.bin") == slurp(fs::path(again) / "classifier.bin"));
  json first = read_json(w.cls / "classifier_report.json"), second = read_json(fs::path(again) / "classifier_report.json");
  CHECK(first["checkpoint"]["stem"] != second["checkpoint"]["stem"]);
  first.erase("checkpoint");
  second.erase("checkpoint");
  CHECK(first == second);
}

TEST_CASE("infer local and global") {
  auto& w = workspace();
  const std::string local = w.path("local.json"), global = w.path("global.json");
  REQUIRE(run({"infer", "--config", w.config.string(), "--image", w.image.string(), "--mask", w.mask.string(),
               "--checkpoint", w.checkpoint(), "--out", local})
              .code == 0);
  json v = read_json(local);
  int votes = 0;
  for (int n : v["votes"]) votes += n;
  CHECK(votes == 6);
  CHECK(v["replay"]["placements"].size() == 6);
  CHECK(v["inputs"]["image"]["sha256"] == sha256_file(w.image));

  REQUIRE(run({"infer", "--config", w.config.string(), "--mode", "global", "--image", w.image.string(), "--mask",
               w.mask.string(), "--checkpoint", w.checkpoint(), "--out", global})
              .code == 0);
  json g = read_json(global);
  CHECK(g["probs"].size() == 4);
  CHECK_FALSE(g.contains("votes"));
}

TEST_CASE("one-patch replay reproduces the weighted patch map") {
  auto& w = workspace();
  json cfg = json::parse(kConfig);
  cfg["patches"]["K"] = 1;
  write_json(w.path("k1.json"), cfg);
  const std::string verdict = w.path("k1_verdict.json");
  REQUIRE(run({"infer", "--config", w.path("k1.json"), "--image", w.image.string(), "--mask", w.mask.string(),
               "--checkpoint", w.checkpoint(), "--out", verdict})
              .code == 0);
  json v = read_json(verdict);
  const auto row = v["replay"]["probs"]["rows"][0].get<std::vector<double>>();
  CHECK(v["prediction"] == std::max_element(row.begin(), row.end()) - row.begin());

  const int c = 3;
  REQUIRE(run({"saliency", "--replay", verdict, "--checkpoint", w.checkpoint(), "--class", std::to_string(c), "--out",
               w.path("k1.png"), "--sidecar", w.path("k1.ptf")})
              .code == 0);

  // expected: r_c * grad_cam of the single patch, embedded at its placement
  auto loaded = load_params(w.checkpoint());
  ClassifierModel model{{.input_height = 32, .input_width = 32, .pool = 1, .conv1_channels = 4, .conv2_channels = 8},
                        loaded.params};
  RasterImage img = preprocess_pipeline(read_raster(w.image), PreprocessConfig{.target_size = 64});
  LabelMask mask = resize_mask(read_mask(w.mask), 64, 64);
  const auto pl = v["replay"]["placements"][0].get<PatchPlacement>();
  SaliencyMap patch_map = grad_cam(crop(apply_mask(img, mask, LabelSet::lungs()), pl.top, pl.left, pl.p, pl.q), model, c);
  Grid<float> sidecar = read_float_sidecar(w.path("k1.ptf"));
  IntegerRaster png = read_png(w.path("k1.png"));
  for (int r = 0; r < 64; ++r) {
    for (int col = 0; col < 64; ++col) {
      const bool inside = r >= pl.top && r < pl.top + pl.p && col >= pl.left && col < pl.left + pl.q;
      const double want = inside ? row[c] * patch_map(r - pl.top, col - pl.left) : 0.0;
      CHECK(sidecar(r, col) == doctest::Approx(want).epsilon(1e-6));
      CHECK(std::abs(png.values[r * 64 + col] - 255.0 * want) <= 0.5 + 1e-3);
    }
  }
}

TEST_CASE("all-zero probabilities give a black saliency image") {
  auto& w = workspace();
  const std::string verdict = w.path("zero_verdict.json");
  REQUIRE(run({"infer", "--config", w.config.string(), "--image", w.image.string(), "--mask", w.mask.string(),
               "--checkpoint", w.checkpoint(), "--out", verdict})
              .code == 0);
  json v = read_json(verdict);
  for (auto& r : v["replay"]["probs"]["rows"]) r[2] = 0.0;
  write_json(verdict, v);
  REQUIRE(run({"saliency", "--replay", verdict, "--checkpoint", w.checkpoint(), "--class", "2", "--out",
               w.path("zero.png"), "--sidecar", w.path("zero.ptf")})
              .code == 0);
  const IntegerRaster zero = read_png(w.path("zero.png"));
  for (auto px : zero.values) CHECK(px == 0);

  REQUIRE(run({"saliency", "--replay", verdict, "--checkpoint", w.checkpoint(), "--class", "1", "--out",
               w.path("one.png"), "--sidecar", w.path("one.ptf")})
              .code == 0);
  const Grid<float> one = read_float_sidecar(w.path("one.ptf"));
  for (float x : one.values()) {
    CHECK(x >= 0.0f);
    CHECK(x <= 1.0f);
  }
  CHECK(run({"saliency", "--replay", verdict, "--checkpoint", w.checkpoint(), "--class", "4", "--out",
             w.path("bad.png")})
            .code == 2);
}

TEST_CASE("biomarkers need two classes") {
  auto& w = workspace();
  const std::string out = w.path("bio");
  REQUIRE(run({"biomarkers", "--config", w.config.string(), "--manifest", w.manifest.string(), "--out", out}).code == 0);
  json table = read_json(fs::path(out) / "markers.json");
  CHECK(table.dump().find("lung_std") != std::string::npos);
  CHECK(table.dump().find("stars") != std::string::npos);
  const std::string again = w.path("bio2");
  REQUIRE(run({"biomarkers", "--config", w.config.string(), "--manifest", w.manifest.string(), "--out", again}).code == 0);
  CHECK(slurp(fs::path(out) / "markers.json") == slurp(fs::path(again) / "markers.json"));

  json m = read_json(w.manifest);
  json kept = json::array();
  for (const auto& item : m["items"])
    if (item["label"] == "normal") kept.push_back(item);
  m["items"] = kept;
  write_json(w.ds / "normal_only.json", m);
  CHECK(run({"biomarkers", "--config", w.config.string(), "--manifest", (w.ds / "normal_only.json").string(), "--out",
             w.path("bio_single")})
            .code == 2);
}

TEST_CASE("evaluate") {
  auto& w = workspace();
  std::ofstream(w.path("same.json")) << R"([0, 1, 2, 3, "viral_covid"])";
  REQUIRE(run({"evaluate", "--predictions", w.path("same.json"), "--truths", w.path("same.json"), "--out",
               w.path("perfect.json")})
              .code == 0);
  json perfect = read_json(w.path("perfect.json"));
  for (const char* key : {"accuracy", "precision", "recall", "f1", "specificity"})
    CHECK(perfect["metrics"]["macro"][key] == 1.0);

  std::ofstream(w.path("a.json")) << "[0, 1, 2, 3, 0, 1, 2, 3]";
  std::ofstream(w.path("b.json")) << "[0, 1, 3, 2, 0, 2, 2, 3]";
  REQUIRE(run({"evaluate", "--predictions", w.path("a.json"), "--truths", w.path("b.json"), "--out",
               w.path("mixed.json")})
              .code == 0);
  CHECK(read_json(w.path("mixed.json"))["metrics"]["plain_accuracy"] == 5.0 / 8.0);
}

TEST_CASE("evaluate-seg on mask files") {
  auto& w = workspace();
  LabelMask ref = read_mask(w.mask);
  REQUIRE(run({"evaluate-seg", "--pred", w.mask.string(), "--ref", w.mask.string(), "--out", w.path("seg.json")}).code ==
          0);
  json j = read_json(w.path("seg.json"));
  CHECK(j["jaccard_lung"] == 1.0);
  CHECK(j["jaccard_heart"] == 1.0);
  CHECK(j["under_segmented"] == false);
  CHECK(j.contains("ctr"));

  write_mask(w.path("blank.png"), LabelMask(ref.height(), ref.width()));
  REQUIRE(run({"evaluate-seg", "--pred", w.path("blank.png"), "--ref", w.mask.string(), "--out",
               w.path("seg_blank.json")})
              .code == 0);
  json b = read_json(w.path("seg_blank.json"));
  CHECK(b["under_segmented"] == true);
  CHECK(b["jaccard_lung"] == 0.0);
}

TEST_CASE("preprocess writes the image and a report") {
  auto& w = workspace();
  REQUIRE(run({"preprocess", "--config", w.config.string(), "--image", w.image.string(), "--out", w.path("pre.png"),
               "--target", "cls", "--sidecar", w.path("pre.ptf"), "--report", w.path("pre.json")})
              .code == 0);
  IntegerRaster png = read_png(w.path("pre.png"));
  CHECK(png.height == 64);
  Grid<float> f = read_float_sidecar(w.path("pre.ptf"));
  RasterImage want = preprocess_pipeline(read_raster(w.image), PreprocessConfig{.target_size = 64});
  CHECK(f == want.grid());
  CHECK(read_json(w.path("pre.json")).contains("config"));
}
