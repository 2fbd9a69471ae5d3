#include "config.hpp"

#include <fstream>
#include <set>

namespace patchtriage::cli {

namespace {

// Reads keys out of one JSON object and rejects anything it was not asked for.
class Block {
 public:
  Block(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config: '" + path_ + "." + key + "' has the wrong type");
    }
  }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("config: unknown key '" + (path_.empty() ? key : path_ + "." + key) + "'");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

PhantomClass class_from(const std::string& name) {
  const auto c = parse_class(name);
  if (!c) throw ConfigError("config: unknown class '" + name + "'");
  return *c;
}

void read_train(Block& b, TrainConfig& t) {
  b.read("learning_rate", t.learning_rate);
  b.read("weight_decay", t.weight_decay);
  b.read("l1_coeff", t.l1_coeff);
  b.read("batch_size", t.batch_size);
  b.read("max_epochs", t.max_epochs);
  b.read("patience", t.patience);
}

nlohmann::json train_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"weight_decay", t.weight_decay}, {"l1_coeff", t.l1_coeff},
          {"batch_size", t.batch_size},       {"max_epochs", t.max_epochs},     {"patience", t.patience}};
}

}  // namespace

RunConfig default_config() {
  RunConfig cfg;
  for (int c = 0; c < kPhantomClassCount; ++c) {
    cfg.phantom.class_specs.push_back(default_phantom_spec(static_cast<PhantomClass>(c), cfg.phantom.image_size));
  }
  return cfg;
}

ClassifierSpec RunConfig::classifier_spec() const {
  ClassifierSpec s;
  s.input_height = patches.p;
  s.input_width = patches.q;
  s.pool = model.pool;
  s.conv1_channels = model.conv1_channels;
  s.conv2_channels = model.conv2_channels;
  s.num_classes = kPhantomClassCount;
  return s;
}

DatasetConfig RunConfig::dataset_config() const {
  DatasetConfig d;
  d.n_per_class = phantom.n_per_class;
  d.image_size = phantom.image_size;
  d.seed = seed;
  d.class_specs = phantom.class_specs;
  for (auto& s : d.class_specs) s.image_size = phantom.image_size;
  return d;
}

void RunConfig::validate() const {
  try {
    preprocess.for_size(preprocess.segmentation_size).validate();
    preprocess.for_size(preprocess.classification_size).validate();
    if (patches.K < 1) throw InvalidArgument("patches.K must be >= 1");
    if (patches.p < 1 || patches.q < 1) throw InvalidArgument("patch size must be positive");
    if (patches.p > preprocess.classification_size || patches.q > preprocess.classification_size) {
      throw InvalidArgument("patch size exceeds the classification image size");
    }
    classifier_spec().validate();
    train.train.validate();
    if (train.patches_per_image < 1 || train.validation_K < 1) {
      throw InvalidArgument("train.patches_per_image and train.validation_K must be >= 1");
    }
    segmenter.options.train.validate();
    if (segmenter.options.pixels_per_image < 1) throw InvalidArgument("segmenter.pixels_per_image must be >= 1");
    if (segmenter.train_classes.empty()) throw InvalidArgument("segmenter.train_classes is empty");
    for (auto s : phantom.class_specs) {
      s.image_size = phantom.image_size;
      s.validate();
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig parse_config(const nlohmann::json& j) {
  RunConfig cfg = default_config();
  Block root(j, "");
  root.read("seed", cfg.seed);

  if (const auto* pj = root.child("preprocess")) {
    Block b(*pj, "preprocess");
    b.read("gamma", cfg.preprocess.gamma);
    b.read("gray_levels", cfg.preprocess.gray_levels);
    b.read("segmentation_size", cfg.preprocess.segmentation_size);
    b.read("classification_size", cfg.preprocess.classification_size);
    b.finish();
  }
  if (const auto* pj = root.child("patches")) {
    Block b(*pj, "patches");
    b.read("K", cfg.patches.K);
    b.read("p", cfg.patches.p);
    b.read("q", cfg.patches.q);
    b.finish();
  }
  if (const auto* pj = root.child("model")) {
    Block b(*pj, "model");
    b.read("pool", cfg.model.pool);
    b.read("conv1_channels", cfg.model.conv1_channels);
    b.read("conv2_channels", cfg.model.conv2_channels);
    b.finish();
  }
  if (const auto* pj = root.child("train")) {
    Block b(*pj, "train");
    read_train(b, cfg.train.train);
    b.read("patches_per_image", cfg.train.patches_per_image);
    b.read("validation_K", cfg.train.validation_K);
    std::string mode = cfg.train.mode == ClassifierMode::local ? "local" : "global";
    b.read("mode", mode);
    if (mode != "local" && mode != "global") throw ConfigError("config: train.mode must be 'local' or 'global'");
    cfg.train.mode = mode == "local" ? ClassifierMode::local : ClassifierMode::global;
    b.finish();
  }
  if (const auto* pj = root.child("segmenter")) {
    Block b(*pj, "segmenter");
    read_train(b, cfg.segmenter.options.train);
    b.read("pixels_per_image", cfg.segmenter.options.pixels_per_image);
    std::string weighting = cfg.segmenter.options.inverse_frequency ? "inverse_frequency" : "uniform";
    b.read("class_weighting", weighting);
    if (weighting != "uniform" && weighting != "inverse_frequency") {
      throw ConfigError("config: segmenter.class_weighting must be 'uniform' or 'inverse_frequency'");
    }
    cfg.segmenter.options.inverse_frequency = weighting == "inverse_frequency";
    std::vector<std::string> classes;
    b.read("train_classes", classes);
    if (b.child("train_classes")) {
      cfg.segmenter.train_classes.clear();
      for (const auto& c : classes) cfg.segmenter.train_classes.push_back(class_from(c));
    }
    b.finish();
  }
  if (const auto* pj = root.child("phantom")) {
    Block b(*pj, "phantom");
    b.read("n_per_class", cfg.phantom.n_per_class);
    b.read("image_size", cfg.phantom.image_size);
    if (const auto* cj = b.child("classes")) {
      if (!cj->is_object()) throw ConfigError("config: 'phantom.classes' must be an object");
      for (const auto& [name, overrides] : cj->items()) {
        const PhantomClass c = class_from(name);
        try {
          auto& spec = cfg.phantom.class_specs[static_cast<std::size_t>(c)];
          spec = phantom_spec_from_json(overrides, spec);
          spec.label = c;
        } catch (const InvalidArgument& e) {
          throw ConfigError("config: phantom.classes." + name + ": " + e.what());
        }
      }
    }
    b.finish();
  }
  root.finish();
  for (auto& s : cfg.phantom.class_specs) s.image_size = cfg.phantom.image_size;
  cfg.train.train.seed = cfg.seed;
  cfg.segmenter.options.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["preprocess"] = {{"gamma", cfg.preprocess.gamma},
                     {"gray_levels", cfg.preprocess.gray_levels},
                     {"segmentation_size", cfg.preprocess.segmentation_size},
                     {"classification_size", cfg.preprocess.classification_size}};
  j["patches"] = {{"K", cfg.patches.K}, {"p", cfg.patches.p}, {"q", cfg.patches.q}};
  j["model"] = {{"pool", cfg.model.pool},
                {"conv1_channels", cfg.model.conv1_channels},
                {"conv2_channels", cfg.model.conv2_channels}};
  j["train"] = train_json(cfg.train.train);
  j["train"]["patches_per_image"] = cfg.train.patches_per_image;
  j["train"]["validation_K"] = cfg.train.validation_K;
  j["train"]["mode"] = cfg.train.mode == ClassifierMode::local ? "local" : "global";
  j["segmenter"] = train_json(cfg.segmenter.options.train);
  j["segmenter"]["pixels_per_image"] = cfg.segmenter.options.pixels_per_image;
  j["segmenter"]["class_weighting"] = cfg.segmenter.options.inverse_frequency ? "inverse_frequency" : "uniform";
  j["segmenter"]["train_classes"] = nlohmann::json::array();
  for (auto c : cfg.segmenter.train_classes) j["segmenter"]["train_classes"].push_back(class_name(c));
  j["phantom"] = {{"n_per_class", cfg.phantom.n_per_class}, {"image_size", cfg.phantom.image_size}};
  for (const auto& s : cfg.phantom.class_specs) {
    auto sj = patchtriage::to_json(s);
    sj.erase("seed");
    sj.erase("label");
    sj.erase("image_size");
    j["phantom"]["classes"][std::string(class_name(s.label))] = sj;
  }
  return j;
}

}  // namespace patchtriage::cli
