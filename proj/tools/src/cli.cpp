#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "config.hpp"
#include "patchtriage/biomarkers.hpp"
#include "patchtriage/digest.hpp"
#include "patchtriage/errors.hpp"
#include "patchtriage/image_io.hpp"
#include "patchtriage/infer.hpp"
#include "patchtriage/metrics.hpp"
#include "patchtriage/parallel.hpp"
#include "patchtriage/params.hpp"
#include "patchtriage/phantom.hpp"
#include "patchtriage/preprocess.hpp"
#include "patchtriage/saliency.hpp"
#include "patchtriage/segmask.hpp"
#include "patchtriage/segmenter.hpp"
#include "patchtriage/training.hpp"

namespace patchtriage::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? default_config() : load_config(path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
}

json file_entry(const fs::path& path) { return {{"path", path.string()}, {"sha256", sha256_file(path)}}; }

json checkpoint_entry(const fs::path& stem) {
  return {{"stem", stem.string()},
          {"sha256_bin", sha256_file(fs::path(stem.string() + ".bin"))},
          {"sha256_json", sha256_file(fs::path(stem.string() + ".json"))}};
}

json report_header(const std::string& command, const RunConfig& cfg) {
  return {{"command", command}, {"seed", cfg.seed}, {"config", to_json(cfg)}};
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

json spec_json(const ClassifierSpec& s) {
  return {{"input_height", s.input_height},     {"input_width", s.input_width},
          {"pool", s.pool},                     {"conv1_channels", s.conv1_channels},
          {"conv2_channels", s.conv2_channels}, {"num_classes", s.num_classes},
          {"input_scale", s.input_scale}};
}

ClassifierSpec spec_from_json(const json& j) {
  ClassifierSpec s;
  s.input_height = j.at("input_height").get<int>();
  s.input_width = j.at("input_width").get<int>();
  s.pool = j.at("pool").get<int>();
  s.conv1_channels = j.at("conv1_channels").get<int>();
  s.conv2_channels = j.at("conv2_channels").get<int>();
  s.num_classes = j.at("num_classes").get<int>();
  s.input_scale = j.at("input_scale").get<double>();
  s.validate();
  return s;
}

LoadedParams load_checkpoint(const fs::path& stem, const char* kind) {
  LoadedParams loaded = load_params(stem);
  if (loaded.metadata.value("kind", std::string()) != kind) {
    throw ConfigError(stem.string() + " is not a " + kind + " checkpoint");
  }
  return loaded;
}

ClassifierModel load_classifier(const fs::path& stem) {
  LoadedParams loaded = load_checkpoint(stem, "classifier");
  ClassifierModel model{spec_from_json(loaded.metadata.at("spec")), std::move(loaded.params)};
  check_classifier_params(model.params, model.spec);
  return model;
}

// Manifest plus the directory its relative paths hang off.
struct Dataset {
  fs::path dir;
  DatasetManifest manifest;
  std::string digest;  // over the manifest and every file it names
};

Dataset load_dataset(const std::string& manifest_path) {
  if (manifest_path.empty()) throw ConfigError("--manifest is required");
  const fs::path path(manifest_path);
  if (!fs::exists(path)) throw ConfigError("manifest not found: " + manifest_path);
  Dataset d;
  d.dir = path.parent_path();
  d.manifest = manifest_from_json(read_json_file(path));

  std::vector<std::string> digests(d.manifest.items.size());
  parallel_for(digests.size(), [&](std::size_t i) {
    const auto& item = d.manifest.items[i];
    digests[i] = item.image_path + " " + sha256_file(d.dir / item.image_path) + "\n" + item.mask_path + " " +
                 sha256_file(d.dir / item.mask_path) + "\n";
  });
  std::string all = "manifest " + sha256_file(path) + "\n";
  for (const auto& s : digests) all += s;
  d.digest = sha256_hex(all);
  return d;
}

json dataset_entry(const std::string& manifest_path, const Dataset& d) {
  return {{"path", manifest_path}, {"sha256", d.digest}, {"items", d.manifest.items.size()}};
}

std::vector<const DatasetItem*> select_items(const Dataset& d, std::optional<Split> split,
                                             const std::vector<PhantomClass>& classes) {
  std::vector<const DatasetItem*> out;
  for (const auto& item : d.manifest.items) {
    if (split && item.split != *split) continue;
    if (std::find(classes.begin(), classes.end(), item.label) == classes.end()) continue;
    out.push_back(&item);
  }
  return out;
}

std::vector<PhantomClass> all_classes() {
  std::vector<PhantomClass> c;
  for (int i = 0; i < kPhantomClassCount; ++i) c.push_back(static_cast<PhantomClass>(i));
  return c;
}

std::optional<Split> parse_split(const std::string& name) {
  if (name.empty() || name == "all") return std::nullopt;
  for (Split s : {Split::train, Split::validation, Split::test}) {
    if (split_name(s) == name) return s;
  }
  throw ConfigError("unknown split '" + name + "'");
}

struct LoadedImage {
  RasterImage image;
  LabelMask mask;
};

LoadedImage load_item(const Dataset& d, const DatasetItem& item, const PreprocessConfig& pre) {
  LoadedImage out;
  out.image = preprocess_pipeline(read_raster(d.dir / item.image_path), pre);
  out.mask = resize_mask(read_mask(d.dir / item.mask_path), pre.target_size, pre.target_size);
  return out;
}

std::vector<SegSample> load_seg_samples(const Dataset& d, const std::vector<const DatasetItem*>& items,
                                        const RunConfig& cfg) {
  const auto pre = cfg.preprocess.for_size(cfg.preprocess.segmentation_size);
  std::vector<SegSample> out(items.size());
  parallel_for(items.size(), [&](std::size_t i) {
    auto loaded = load_item(d, *items[i], pre);
    out[i] = {std::move(loaded.image), std::move(loaded.mask)};
  });
  return out;
}

// Lung mask used for classification: the truth mask, or the segmenter's
// prediction scaled up from segmentation resolution.
LabelMask classification_mask(const RunConfig& cfg, const IntegerRaster& raw, const LabelMask& truth,
                              const ModelParams* segmenter) {
  const int size = cfg.preprocess.classification_size;
  if (!segmenter) return resize_mask(truth, size, size);
  const auto seg_img = preprocess_pipeline(raw, cfg.preprocess.for_size(cfg.preprocess.segmentation_size));
  return resize_mask(segment(seg_img, *segmenter), size, size);
}

std::vector<LabeledImage> load_labeled(const Dataset& d, const std::vector<const DatasetItem*>& items,
                                       const RunConfig& cfg, const ModelParams* segmenter) {
  const auto pre = cfg.preprocess.for_size(cfg.preprocess.classification_size);
  std::vector<LabeledImage> out(items.size());
  parallel_for(items.size(), [&](std::size_t i) {
    const auto& item = *items[i];
    const auto raw = read_raster(d.dir / item.image_path);
    out[i].image = preprocess_pipeline(raw, pre);
    out[i].mask = classification_mask(cfg, raw, read_mask(d.dir / item.mask_path), segmenter);
    out[i].label = static_cast<int>(item.label);
  });
  return out;
}

int parse_label(const json& v, int num_classes) {
  int label = -1;
  if (v.is_number_integer()) {
    label = v.get<int>();
  } else if (v.is_string()) {
    const auto c = parse_class(v.get<std::string>());
    if (!c) throw ConfigError("unknown class name '" + v.get<std::string>() + "'");
    label = static_cast<int>(*c);
  } else {
    throw ConfigError("labels must be integers or class names");
  }
  if (label < 0 || label >= num_classes) throw ConfigError("label " + std::to_string(label) + " out of range");
  return label;
}

std::vector<int> read_labels(const fs::path& path, int num_classes) {
  const json j = read_json_file(path);
  if (!j.is_array()) throw ConfigError(path.string() + " must hold a JSON array of labels");
  std::vector<int> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(parse_label(v, num_classes));
  return out;
}

json optional_ctr(const LabelMask& mask) {
  try {
    return ctr(mask);
  } catch (const NotComputable&) {
    return nullptr;
  }
}

json seg_pair_report(const LabelMask& predicted, const LabelMask& reference) {
  const auto pl = predicted.select(LabelSet::lungs());
  const auto rl = reference.select(LabelSet::lungs());
  const auto ph = predicted.select({Anatomy::heart});
  const auto rh = reference.select({Anatomy::heart});
  return {{"jaccard_lung", jaccard(pl, rl)},
          {"jaccard_heart", jaccard(ph, rh)},
          {"ctr", optional_ctr(predicted)},
          {"ctr_reference", optional_ctr(reference)},
          {"lung_deficit", lung_deficit_fraction(pl, rl)},
          {"under_segmented", under_segmentation_flag(pl, rl)}};
}

// ---- subcommands ----------------------------------------------------------

struct GenArgs {
  std::string config, out;
};

int run_gen(const GenArgs& a, std::ostream& out) {
  const RunConfig cfg = config_or_default(a.config);
  const fs::path dir(a.out);
  gen_dataset(cfg.dataset_config(), dir);
  write_json(dir / "config.json", report_header("gen-phantoms", cfg));
  out << (dir / "manifest.json").string() << "\n";
  return kExitOk;
}

struct PreprocessArgs {
  std::string config, image, out, target = "cls", sidecar, report;
};

int run_preprocess(const PreprocessArgs& a, std::ostream& out) {
  const RunConfig cfg = config_or_default(a.config);
  const int size = a.target == "seg" ? cfg.preprocess.segmentation_size : cfg.preprocess.classification_size;
  const auto pre = cfg.preprocess.for_size(size);
  const RasterImage img = preprocess_pipeline(read_raster(a.image), pre);
  write_png(a.out, quantize_8bit(img.grid()));
  if (!a.sidecar.empty()) write_float_sidecar(a.sidecar, img.grid());
  if (!a.report.empty()) {
    json r = report_header("preprocess", cfg);
    r["target"] = a.target;
    r["preprocess"] = {{"gamma", pre.gamma}, {"gray_levels", pre.gray_levels}, {"target_size", pre.target_size}};
    r["inputs"] = {{"image", file_entry(a.image)}};
    r["outputs"] = {{"image", file_entry(a.out)}};
    write_json(a.report, r);
  }
  out << a.out << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string config, task, manifest, out, segmenter;
};

int run_train_seg(const TrainArgs& a, const RunConfig& cfg, const Dataset& d, std::ostream& out) {
  const auto& classes = cfg.segmenter.train_classes;
  const auto train = load_seg_samples(d, select_items(d, Split::train, classes), cfg);
  const auto val = load_seg_samples(d, select_items(d, Split::validation, classes), cfg);
  const auto test = load_seg_samples(d, select_items(d, Split::test, classes), cfg);
  if (train.empty() || val.empty()) throw ConfigError("manifest has no segmenter train/validation items");

  const auto result = train_segmenter(train, val, cfg.segmenter.options);
  const fs::path dir(a.out);
  ensure_dir(dir);
  const fs::path stem = dir / "segmenter";
  save_params(result.params, stem, {{"kind", "segmenter"}, {"lambda", result.weights.lambda}, {"seed", cfg.seed}});
  write_json(dir / "segmenter_curves.json", curves_json(result.curves));

  json r = report_header("train", cfg);
  r["task"] = "seg";
  r["inputs"] = {{"manifest", dataset_entry(a.manifest, d)}};
  r["train_images"] = train.size();
  r["validation_images"] = val.size();
  r["test_images"] = test.size();
  r["best_epoch"] = result.best_epoch;
  r["best_val_jaccard"] = result.best_val_jaccard;
  r["test_lung_jaccard"] = test.empty() ? json(nullptr) : json(mean_lung_jaccard(test, result.params));
  r["checkpoint"] = checkpoint_entry(stem);
  write_json(dir / "segmenter_report.json", r);
  out << stem.string() << "\n";
  return kExitOk;
}

int run_train_cls(const TrainArgs& a, const RunConfig& cfg, const Dataset& d, std::ostream& out) {
  std::optional<ModelParams> seg;
  json seg_entry = nullptr;
  if (!a.segmenter.empty()) {
    seg = load_checkpoint(a.segmenter, "segmenter").params;
    seg_entry = checkpoint_entry(a.segmenter);
  }
  const ModelParams* segp = seg ? &*seg : nullptr;
  const auto classes = all_classes();
  const auto train = load_labeled(d, select_items(d, Split::train, classes), cfg, segp);
  const auto val = load_labeled(d, select_items(d, Split::validation, classes), cfg, segp);
  const auto test = load_labeled(d, select_items(d, Split::test, classes), cfg, segp);
  if (train.empty() || val.empty()) throw ConfigError("manifest has no train/validation items");

  ClassifierTrainOptions opts;
  opts.spec = cfg.classifier_spec();
  opts.train = cfg.train.train;
  opts.patches = {cfg.patches.p, cfg.patches.q, cfg.train.patches_per_image, cfg.train.validation_K};
  opts.mode = cfg.train.mode;
  const auto result = train_classifier(train, val, opts);

  const fs::path dir(a.out);
  ensure_dir(dir);
  const fs::path stem = dir / "classifier";
  const char* mode = cfg.train.mode == ClassifierMode::local ? "local" : "global";
  save_params(result.model.params, stem,
              {{"kind", "classifier"}, {"spec", spec_json(result.model.spec)}, {"mode", mode}, {"seed", cfg.seed}});
  write_json(dir / "classifier_curves.json", curves_json(result.curves));

  json r = report_header("train", cfg);
  r["task"] = "cls";
  r["mode"] = mode;
  r["inputs"] = {{"manifest", dataset_entry(a.manifest, d)}, {"segmenter", seg_entry}};
  r["train_images"] = train.size();
  r["validation_images"] = val.size();
  r["test_images"] = test.size();
  r["best_epoch"] = result.best_epoch;
  r["best_val_f1"] = result.best_val_f1;
  if (!test.empty()) {
    auto test_patches = opts.patches;
    test_patches.validation_K = cfg.patches.K;
    const auto score = evaluate_classifier(test, result.model, cfg.train.mode, test_patches, cfg.seed);
    std::vector<int> truths;
    for (const auto& t : test) truths.push_back(t.label);
    const auto cm = confusion(score.predictions, truths, kPhantomClassCount);
    r["test"] = {{"predictions", score.predictions},
                 {"truths", truths},
                 {"confusion", to_json(cm)},
                 {"metrics", to_json(metrics_from_confusion(cm))}};
  }
  r["checkpoint"] = checkpoint_entry(stem);
  write_json(dir / "classifier_report.json", r);
  out << stem.string() << "\n";
  return kExitOk;
}

int run_train(const TrainArgs& a, std::ostream& out) {
  const RunConfig cfg = config_or_default(a.config);
  const Dataset d = load_dataset(a.manifest);
  return a.task == "seg" ? run_train_seg(a, cfg, d, out) : run_train_cls(a, cfg, d, out);
}

struct InferArgs {
  std::string config, image, mask, checkpoint, mode = "local", out;
};

int run_infer(const InferArgs& a, std::ostream& out) {
  const RunConfig cfg = config_or_default(a.config);
  const ClassifierModel model = load_classifier(a.checkpoint);
  const int size = cfg.preprocess.classification_size;
  const RasterImage img = preprocess_pipeline(read_raster(a.image), cfg.preprocess.for_size(size));
  const LabelMask mask = resize_mask(read_mask(a.mask), size, size);

  json r = report_header("infer", cfg);
  r["mode"] = a.mode;
  r["inputs"] = {{"image", file_entry(a.image)}, {"mask", file_entry(a.mask)}, {"checkpoint", checkpoint_entry(a.checkpoint)}};
  if (a.mode == "local") {
    const int p = model.spec.input_height, q = model.spec.input_width;
    const auto result = classify_image(img, mask, model, cfg.patches.K, p, q, cfg.seed);
    json v;
    to_json(v, result.verdict);
    r.update(v);
    r["prediction_name"] = class_name(static_cast<PhantomClass>(result.verdict.predicted_class));
    r["K"] = cfg.patches.K;
    r["p"] = p;
    r["q"] = q;
    json probs;
    to_json(probs, result.probs);
    r["replay"] = {{"image", a.image}, {"mask", a.mask}, {"placements", result.placements}, {"probs", probs}};
  } else {
    const auto probs = classify_global(img, mask, model);
    const int pred = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    r["prediction"] = pred;
    r["prediction_name"] = class_name(static_cast<PhantomClass>(pred));
    r["probs"] = probs;
  }
  write_json(a.out, r);
  out << a.out << "\n";
  return kExitOk;
}

struct SaliencyArgs {
  std::string replay, checkpoint, out, sidecar;
  int cls = 0;
};

int run_saliency(const SaliencyArgs& a, std::ostream& out) {
  const json verdict = read_json_file(a.replay);
  if (verdict.value("mode", std::string()) != "local" || !verdict.contains("replay")) {
    throw ConfigError(a.replay + " is not a local-mode verdict with replay data");
  }
  const RunConfig cfg = parse_config(verdict.at("config"));
  const ClassifierModel model = load_classifier(a.checkpoint);
  if (a.cls < 0 || a.cls >= model.spec.num_classes) {
    throw ConfigError("--class must lie in [0, " + std::to_string(model.spec.num_classes - 1) + "]");
  }
  const json& replay = verdict.at("replay");
  const fs::path image_path = replay.at("image").get<std::string>();
  const fs::path mask_path = replay.at("mask").get<std::string>();
  if (sha256_file(image_path) != verdict.at("inputs").at("image").at("sha256").get<std::string>()) {
    throw IoError(image_path.string() + " changed since the verdict was written");
  }
  const auto placements = replay.at("placements").get<std::vector<PatchPlacement>>();
  const auto probs = replay.at("probs").get<PatchProbs>();
  if (probs.size() != placements.size()) throw ConfigError("replay probs and placements differ in length");

  const int size = cfg.preprocess.classification_size;
  const RasterImage img = preprocess_pipeline(read_raster(image_path), cfg.preprocess.for_size(size));
  const LabelMask mask = resize_mask(read_mask(mask_path), size, size);
  const auto patches = crop_patches(apply_mask(img, mask, LabelSet::lungs()), placements);

  std::vector<SaliencyMap> maps(patches.size());
  parallel_for(patches.size(), [&](std::size_t k) { maps[k] = grad_cam(patches[k], model, a.cls); });
  const auto cov = coverage(placements, img.height(), img.width());
  const SaliencyMap map = prob_grad_cam(maps, probs, placements, cov, a.cls);

  write_png(a.out, quantize_8bit(map, 255.0f));
  if (!a.sidecar.empty()) write_float_sidecar(a.sidecar, map);
  out << a.out << "\n";
  return kExitOk;
}

struct BiomarkerArgs {
  std::string config, manifest, out, split;
};

int run_biomarkers(const BiomarkerArgs& a, std::ostream& out) {
  const RunConfig cfg = config_or_default(a.config);
  const Dataset d = load_dataset(a.manifest);
  const auto split = parse_split(a.split);

  std::vector<std::string> names;
  std::vector<std::vector<const DatasetItem*>> by_class;
  for (PhantomClass c : all_classes()) {
    auto items = select_items(d, split, {c});
    if (items.empty()) continue;
    names.emplace_back(class_name(c));
    by_class.push_back(std::move(items));
  }
  if (names.size() < 2) throw ConfigError("biomarkers need a manifest with at least two classes");

  MarkerConfig mc;
  mc.K = cfg.patches.K;
  mc.p = cfg.patches.p;
  mc.q = cfg.patches.q;
  mc.seed = cfg.seed;
  const auto pre = cfg.preprocess.for_size(cfg.preprocess.classification_size);

  std::vector<std::vector<ImageMarkers>> per_class(names.size());
  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto& items = by_class[c];
    per_class[c].resize(items.size());
    parallel_for(items.size(), [&](std::size_t i) {
      const auto loaded = load_item(d, *items[i], pre);
      per_class[c][i] = image_markers(loaded.image, loaded.mask, static_cast<int>(c), mc,
                                      marker_image_seed(mc.seed, loaded.image, loaded.mask));
    });
  }
  const MarkerTable table = assemble_marker_table(names, per_class);

  const fs::path dir(a.out);
  ensure_dir(dir);
  json r = report_header("biomarkers", cfg);
  r["split"] = a.split.empty() ? "all" : a.split;
  r["inputs"] = {{"manifest", dataset_entry(a.manifest, d)}};
  r["table"] = to_json(table);
  write_json(dir / "markers.json", r);
  write_text(dir / "markers.txt", marker_text_table(table));
  out << (dir / "markers.json").string() << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  std::string predictions, truths, out;
  int num_classes = kPhantomClassCount;
};

int run_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const auto preds = read_labels(a.predictions, a.num_classes);
  const auto truths = read_labels(a.truths, a.num_classes);
  if (preds.size() != truths.size()) {
    throw ConfigError("predictions and truths differ in length (" + std::to_string(preds.size()) + " vs " +
                      std::to_string(truths.size()) + ")");
  }
  const auto cm = confusion(preds, truths, a.num_classes);
  const auto report = metrics_from_confusion(cm);
  json r = {{"command", "evaluate"},
            {"num_classes", a.num_classes},
            {"inputs", {{"predictions", file_entry(a.predictions)}, {"truths", file_entry(a.truths)}}},
            {"confusion", to_json(cm)},
            {"metrics", to_json(report)}};
  if (a.out.empty()) {
    out << r.dump(2) << "\n";
  } else {
    write_json(a.out, r);
    std::vector<std::string> names;
    for (int c = 0; c < a.num_classes; ++c) {
      names.push_back(c < kPhantomClassCount ? std::string(class_name(static_cast<PhantomClass>(c)))
                                             : std::to_string(c));
    }
    out << metrics_table(report, names);
  }
  return kExitOk;
}

struct EvaluateSegArgs {
  std::string config, pred, ref, manifest, checkpoint, split = "test", out;
};

int run_evaluate_seg(const EvaluateSegArgs& a, std::ostream& out) {
  json r;
  if (!a.pred.empty() || !a.ref.empty()) {
    if (a.pred.empty() || a.ref.empty()) throw ConfigError("--pred and --ref go together");
    r = seg_pair_report(read_mask(a.pred), read_mask(a.ref));
    r["command"] = "evaluate-seg";
    r["inputs"] = {{"pred", file_entry(a.pred)}, {"ref", file_entry(a.ref)}};
  } else {
    if (a.checkpoint.empty()) throw ConfigError("evaluate-seg needs --pred/--ref or --manifest/--checkpoint");
    const RunConfig cfg = config_or_default(a.config);
    const Dataset d = load_dataset(a.manifest);
    const auto params = load_checkpoint(a.checkpoint, "segmenter").params;
    const auto items = select_items(d, parse_split(a.split), all_classes());
    const auto samples = load_seg_samples(d, items, cfg);

    std::vector<json> rows(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
      rows[i] = seg_pair_report(segment(samples[i].image, params), samples[i].truth);
      rows[i]["image"] = items[i]->image_path;
      rows[i]["label"] = class_name(items[i]->label);
    });
    double jsum = 0.0;
    int flagged = 0;
    for (const auto& row : rows) {
      jsum += row["jaccard_lung"].get<double>();
      flagged += row["under_segmented"].get<bool>() ? 1 : 0;
    }
    r = report_header("evaluate-seg", cfg);
    r["split"] = a.split;
    r["inputs"] = {{"manifest", dataset_entry(a.manifest, d)}, {"checkpoint", checkpoint_entry(a.checkpoint)}};
    r["mean_jaccard_lung"] = rows.empty() ? json(nullptr) : json(jsum / static_cast<double>(rows.size()));
    r["under_segmented_count"] = flagged;
    r["items"] = rows;
  }
  if (a.out.empty()) {
    out << r.dump(2) << "\n";
  } else {
    write_json(a.out, r);
    out << a.out << "\n";
  }
  return kExitOk;
}

class WorkerCountGuard {
 public:
  WorkerCountGuard() : saved_(worker_count()) {}
  ~WorkerCountGuard() { set_worker_count(saved_); }
  WorkerCountGuard(const WorkerCountGuard&) = delete;
  WorkerCountGuard& operator=(const WorkerCountGuard&) = delete;

 private:
  int saved_;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Patch-based chest radiograph triage toolkit"};
  app.name("patchtriage");
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (overrides PATCHTRIAGE_THREADS)")->check(CLI::PositiveNumber);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-phantoms", "Render a synthetic phantom dataset");
  gen_cmd->add_option("--config", gen.config, "Run config JSON");
  gen_cmd->add_option("--out", gen.out, "Dataset directory")->required();

  PreprocessArgs prep;
  auto* prep_cmd = app.add_subcommand("preprocess", "Equalize, gamma-correct and resize one image");
  prep_cmd->add_option("--config", prep.config);
  prep_cmd->add_option("--image", prep.image)->required();
  prep_cmd->add_option("--out", prep.out, "Output PNG")->required();
  prep_cmd->add_option("--target", prep.target)->check(CLI::IsMember({"seg", "cls"}));
  prep_cmd->add_option("--sidecar", prep.sidecar, "Raw float output");
  prep_cmd->add_option("--report", prep.report, "JSON report");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the segmenter or the patch classifier");
  train_cmd->add_option("--task", train.task)->required()->check(CLI::IsMember({"seg", "cls"}));
  train_cmd->add_option("--config", train.config);
  train_cmd->add_option("--manifest", train.manifest)->required();
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  train_cmd->add_option("--segmenter", train.segmenter, "Segmenter checkpoint for predicted lung masks");

  InferArgs infer;
  auto* infer_cmd = app.add_subcommand("infer", "Classify one image");
  infer_cmd->add_option("--config", infer.config);
  infer_cmd->add_option("--image", infer.image)->required();
  infer_cmd->add_option("--mask", infer.mask)->required();
  infer_cmd->add_option("--checkpoint", infer.checkpoint)->required();
  infer_cmd->add_option("--mode", infer.mode)->check(CLI::IsMember({"local", "global"}));
  infer_cmd->add_option("--out", infer.out, "Verdict JSON")->required();

  SaliencyArgs sal;
  auto* sal_cmd = app.add_subcommand("saliency", "Probabilistic Grad-CAM from a local verdict");
  sal_cmd->add_option("--replay", sal.replay, "Verdict JSON written by infer")->required();
  sal_cmd->add_option("--checkpoint", sal.checkpoint)->required();
  sal_cmd->add_option("--class", sal.cls)->required();
  sal_cmd->add_option("--out", sal.out, "Output PNG")->required();
  sal_cmd->add_option("--sidecar", sal.sidecar, "Raw float output");

  BiomarkerArgs bio;
  auto* bio_cmd = app.add_subcommand("biomarkers", "Intensity and CTR marker tables with class tests");
  bio_cmd->add_option("--config", bio.config);
  bio_cmd->add_option("--manifest", bio.manifest)->required();
  bio_cmd->add_option("--out", bio.out, "Output directory")->required();
  bio_cmd->add_option("--split", bio.split, "train, val, test or all");

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Confusion-matrix metrics");
  eval_cmd->add_option("--predictions", eval.predictions)->required();
  eval_cmd->add_option("--truths", eval.truths)->required();
  eval_cmd->add_option("--num-classes", eval.num_classes)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", eval.out, "Metrics JSON");

  EvaluateSegArgs es;
  auto* es_cmd = app.add_subcommand("evaluate-seg", "Mask agreement, CTR and under-segmentation");
  es_cmd->add_option("--config", es.config);
  es_cmd->add_option("--pred", es.pred);
  es_cmd->add_option("--ref", es.ref);
  es_cmd->add_option("--manifest", es.manifest);
  es_cmd->add_option("--checkpoint", es.checkpoint);
  es_cmd->add_option("--split", es.split);
  es_cmd->add_option("--out", es.out);

  WorkerCountGuard guard;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  if (threads > 0) set_worker_count(threads);

  try {
    if (*gen_cmd) return run_gen(gen, out);
    if (*prep_cmd) return run_preprocess(prep, out);
    if (*train_cmd) return run_train(train, out);
    if (*infer_cmd) return run_infer(infer, out);
    if (*sal_cmd) return run_saliency(sal, out);
    if (*bio_cmd) return run_biomarkers(bio, out);
    if (*eval_cmd) return run_evaluate(eval, out);
    if (*es_cmd) return run_evaluate_seg(es, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NoLungError& e) {
    err << "error: no lung pixels in the mask: " << e.what() << "\n";
    return kExitDomain;
  } catch (const NotComputable& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace patchtriage::cli
