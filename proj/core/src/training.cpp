#include "patchtriage/training.hpp"

#include <cmath>
#include <numeric>
#include <utility>

#include "patchtriage/errors.hpp"
#include "patchtriage/metrics.hpp"
#include "patchtriage/optim.hpp"
#include "patchtriage/parallel.hpp"
#include "patchtriage/random.hpp"
#include "patchtriage/segmask.hpp"

namespace patchtriage {

namespace {

// Stream tags keep the independent random streams of a run apart.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kPatchStream = 3;
constexpr std::uint64_t kValidationStream = 4;
constexpr std::uint64_t kPixelStream = 5;

template <typename Item>
void shuffle(std::vector<Item>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(items[i - 1], items[j]);
  }
}

// crop() of the lung-masked image, without masking the whole image.
Patch masked_crop(const LabeledImage& src, const PatchPlacement& pl) {
  Patch out = crop(src.image, pl.top, pl.left, pl.p, pl.q);
  for (int r = 0; r < pl.p; ++r) {
    for (int c = 0; c < pl.q; ++c) {
      if (!is_lung_label(src.mask(pl.top + r, pl.left + c))) out(r, c) = 0.0f;
    }
  }
  return out;
}

struct Sample {
  std::size_t image = 0;
  PatchPlacement placement;
};

void check_labels(std::span<const LabeledImage> images, int num_classes) {
  for (const auto& im : images) {
    if (im.label < 0 || im.label >= num_classes) throw InvalidArgument("image label outside the class set");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("weight_decay must be >= 0");
  if (!(l1_coeff >= 0.0)) throw InvalidArgument("l1_coeff must be >= 0");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (max_epochs < 1) throw InvalidArgument("max_epochs must be >= 1");
  if (patience < 0) throw InvalidArgument("patience must be >= 0");
}

ClassifierScore evaluate_classifier(std::span<const LabeledImage> images, const ClassifierModel& model,
                                    ClassifierMode mode, const PatchTrainingConfig& patches, std::uint64_t seed) {
  if (images.empty()) throw InvalidArgument("evaluate_classifier: no images");
  check_labels(images, model.spec.num_classes);
  ClassifierScore score;
  score.predictions.resize(images.size());
  std::vector<int> truths(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    truths[i] = images[i].label;
    if (mode == ClassifierMode::local) {
      score.predictions[i] = classify_image(images[i].image, images[i].mask, model, patches.validation_K, patches.p,
                                            patches.q, derive_seed(seed, i))
                                 .verdict.predicted_class;
    } else {
      const auto probs = classify_global(images[i].image, images[i].mask, model);
      score.predictions[i] = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    }
  }
  const auto report = metrics_from_confusion(confusion(score.predictions, truths, model.spec.num_classes));
  score.accuracy = report.plain_accuracy;
  score.macro_f1 = report.macro.f1;
  return score;
}

ClassifierTrainingResult train_classifier(std::span<const LabeledImage> train, std::span<const LabeledImage> val,
                                          const ClassifierTrainOptions& options) {
  if (train.empty()) throw InvalidArgument("train_classifier: empty training split");
  if (val.empty()) throw InvalidArgument("train_classifier: empty validation split");
  options.train.validate();
  options.spec.validate();
  const auto& spec = options.spec;
  const auto& tc = options.train;
  const auto& pc = options.patches;
  const bool local = options.mode == ClassifierMode::local;
  if (local && (pc.p != spec.input_height || pc.q != spec.input_width)) {
    throw InvalidArgument("patch size must equal the classifier input size");
  }
  if (local && pc.patches_per_image < 1) throw InvalidArgument("patches_per_image must be >= 1");
  check_labels(train, spec.num_classes);
  check_labels(val, spec.num_classes);

  ClassifierTrainingResult result;
  result.model = {spec, init_classifier_params<float>(spec, derive_seed(tc.seed, kInitStream))};
  ModelParams& params = result.model.params;
  AdamState<float> adam = AdamState<float>::zeros_like(params);
  const Regularization reg{tc.l1_coeff, 0.0};

  std::vector<RasterImage> global_inputs;
  if (!local) {
    global_inputs.reserve(train.size());
    for (const auto& im : train) global_inputs.push_back(global_input(im.image, im.mask, spec));
  }
  std::vector<std::vector<PixelCoord>> lung_coords;
  if (local) {
    lung_coords.reserve(train.size());
    for (const auto& im : train) {
      lung_coords.push_back(lung_pixel_coords(im.mask));
      if (lung_coords.back().empty()) throw NoLungError("train_classifier: training image without lung pixels");
    }
  }

  Rng shuffle_rng(derive_seed(tc.seed, kShuffleStream));
  const std::uint64_t val_seed = derive_seed(tc.seed, kValidationStream);
  ModelParams best = params;
  double best_f1 = -1.0;
  int since_best = 0;

  for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
    std::vector<Sample> samples;
    if (local) {
      const std::uint64_t epoch_seed = derive_seed(derive_seed(tc.seed, kPatchStream), static_cast<std::uint64_t>(epoch));
      for (std::size_t i = 0; i < train.size(); ++i) {
        Rng rng(derive_seed(epoch_seed, i));
        const auto& coords = lung_coords[i];
        for (int k = 0; k < pc.patches_per_image; ++k) {
          const PixelCoord center = coords[rng.below(coords.size())];
          samples.push_back({i, place_patch(center, pc.p, pc.q, train[i].image.height(), train[i].image.width())});
        }
      }
    } else {
      for (std::size_t i = 0; i < train.size(); ++i) samples.push_back({i, {}});
    }
    shuffle(samples, shuffle_rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t n = std::min(samples.size() - start, static_cast<std::size_t>(tc.batch_size));
      std::vector<ClassifierGradients<float>> grads(n);
      parallel_for(n, [&](std::size_t b) {
        const Sample& s = samples[start + b];
        const auto f = local ? classifier_forward(masked_crop(train[s.image], s.placement), params, spec)
                             : classifier_forward(global_inputs[s.image], params, spec);
        grads[b] = classifier_backward(f, train[s.image].label, params, spec, reg);
      });
      ModelParams total = params.zeros_like();
      for (std::size_t b = 0; b < n; ++b) {
        total.axpy(1.0f / static_cast<float>(n), grads[b].params);
        loss_sum += grads[b].loss;
      }
      adam_step(params, total, adam, tc.learning_rate, tc.weight_decay);
    }
    if (!params.all_finite()) throw NotComputable("train_classifier: parameters diverged");

    const auto score = evaluate_classifier(val, result.model, options.mode, pc, val_seed);
    result.curves.push_back({epoch, loss_sum / static_cast<double>(samples.size()), score.accuracy, score.macro_f1});
    if (score.macro_f1 > best_f1) {
      best_f1 = score.macro_f1;
      best = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best > tc.patience) {
      break;
    }
  }
  params = std::move(best);
  result.best_val_f1 = best_f1;
  return result;
}

double mean_lung_jaccard(std::span<const SegSample> samples, const ModelParams& params) {
  if (samples.empty()) throw InvalidArgument("mean_lung_jaccard: no samples");
  std::vector<double> scores(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const LabelMask pred = segment(samples[i].image, params);
    scores[i] = jaccard(pred.select(LabelSet::lungs()), samples[i].truth.select(LabelSet::lungs()));
  });
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

SegmenterTrainingResult train_segmenter(std::span<const SegSample> train, std::span<const SegSample> val,
                                        const SegmenterTrainOptions& options) {
  if (train.empty()) throw InvalidArgument("train_segmenter: empty training set");
  if (val.empty()) throw InvalidArgument("train_segmenter: empty validation set");
  options.train.validate();
  if (options.pixels_per_image < 1) throw InvalidArgument("pixels_per_image must be >= 1");
  const auto& tc = options.train;

  std::vector<LabelMask> truths;
  std::vector<SegFeatures> features(train.size());
  for (const auto& s : train) {
    if (s.truth.height() != s.image.height() || s.truth.width() != s.image.width()) {
      throw InvalidArgument("train_segmenter: image and truth differ in size");
    }
    truths.push_back(s.truth);
  }
  parallel_for(train.size(), [&](std::size_t i) { features[i] = segmentation_features(train[i].image); });

  SegmenterTrainingResult result;
  result.weights = options.inverse_frequency ? inverse_frequency_weights(truths) : ClassWeights::uniform();
  ModelParams params = init_segmenter_params<float>(derive_seed(tc.seed, kInitStream));
  AdamState<float> adam = AdamState<float>::zeros_like(params);
  const Regularization reg{tc.l1_coeff, 0.0};
  Rng shuffle_rng(derive_seed(tc.seed, kShuffleStream));
  ModelParams best = params;
  double best_j = -1.0;
  int since_best = 0;

  std::vector<std::size_t> order(train.size());
  for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, shuffle_rng);
    const std::uint64_t epoch_seed = derive_seed(derive_seed(tc.seed, kPixelStream), static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    std::size_t pixel_count = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t n = std::min(order.size() - start, static_cast<std::size_t>(tc.batch_size));
      std::vector<SegGradients<float>> grads(n);
      parallel_for(n, [&](std::size_t b) {
        const std::size_t i = order[start + b];
        Rng rng(derive_seed(epoch_seed, i));
        std::vector<std::size_t> pixels(static_cast<std::size_t>(options.pixels_per_image));
        for (auto& px : pixels) px = rng.below(features[i].pixel_count());
        grads[b] = segmenter_backward(features[i], truths[i], result.weights, params, pixels, reg);
      });
      const float scale = 1.0f / static_cast<float>(n * static_cast<std::size_t>(options.pixels_per_image));
      ModelParams total = params.zeros_like();
      for (std::size_t b = 0; b < n; ++b) {
        total.axpy(scale, grads[b].params);
        loss_sum += grads[b].loss;
      }
      pixel_count += n * static_cast<std::size_t>(options.pixels_per_image);
      adam_step(params, total, adam, tc.learning_rate, tc.weight_decay);
    }
    if (!params.all_finite()) throw NotComputable("train_segmenter: parameters diverged");

    const double j = mean_lung_jaccard(val, params);
    result.curves.push_back({epoch, loss_sum / static_cast<double>(pixel_count), j});
    if (j > best_j) {
      best_j = j;
      best = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best > tc.patience) {
      break;
    }
  }
  result.params = std::move(best);
  result.best_val_jaccard = best_j;
  return result;
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate}, {"weight_decay", cfg.weight_decay}, {"l1_coeff", cfg.l1_coeff},
          {"batch_size", cfg.batch_size},       {"max_epochs", cfg.max_epochs},     {"patience", cfg.patience},
          {"seed", cfg.seed}};
}

nlohmann::json curves_json(std::span<const EpochRecord> curves) {
  nlohmann::json j{{"epoch", nlohmann::json::array()},
                   {"train_loss", nlohmann::json::array()},
                   {"val_accuracy", nlohmann::json::array()},
                   {"val_f1", nlohmann::json::array()}};
  for (const auto& r : curves) {
    j["epoch"].push_back(r.epoch);
    j["train_loss"].push_back(r.train_loss);
    j["val_accuracy"].push_back(r.val_accuracy);
    j["val_f1"].push_back(r.val_f1);
  }
  return j;
}

nlohmann::json curves_json(std::span<const SegEpochRecord> curves) {
  nlohmann::json j{{"epoch", nlohmann::json::array()},
                   {"train_loss", nlohmann::json::array()},
                   {"val_jaccard", nlohmann::json::array()}};
  for (const auto& r : curves) {
    j["epoch"].push_back(r.epoch);
    j["train_loss"].push_back(r.train_loss);
    j["val_jaccard"].push_back(r.val_jaccard);
  }
  return j;
}

}  // namespace patchtriage
