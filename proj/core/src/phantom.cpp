#include "patchtriage/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <utility>

#include "patchtriage/digest.hpp"
#include "patchtriage/errors.hpp"
#include "patchtriage/image_io.hpp"
#include "patchtriage/parallel.hpp"
#include "patchtriage/random.hpp"

namespace patchtriage {

namespace {

struct EllipseF {
  double row, col, semi_rows, semi_cols;

  // Squared normalized radius of a point given in image fractions.
  double rho2(double y, double x) const {
    const double dy = (y - row) / semi_rows;
    const double dx = (x - col) / semi_cols;
    return dy * dy + dx * dx;
  }
};

// Jittered geometry of one phantom.
struct Layout {
  EllipseF body;
  EllipseF lungs[2];  // [0]: image-left (patient's right), [1]: image-right (patient's left)
  EllipseF heart;
  double ctr;
};

Layout draw_layout(const PhantomSpec& s, Rng& rng) {
  auto jit = [&](double v) { return v + rng.uniform(-s.geometry_jitter, s.geometry_jitter); };
  Layout g;
  g.body = {s.body_row, 0.5, s.body_semi_rows, s.body_semi_cols};
  const double shift_r = rng.uniform(-s.position_jitter, s.position_jitter);
  const double shift_c = rng.uniform(-s.position_jitter, s.position_jitter);
  const double lr = jit(s.lung_row) + shift_r;
  const double off = jit(s.lung_offset);
  const double sr = jit(s.lung_semi_rows);
  const double sc = jit(s.lung_semi_cols);
  g.lungs[0] = {lr, 0.5 + shift_c - off, sr, sc};
  g.lungs[1] = {lr, 0.5 + shift_c + off, sr, sc};
  g.ctr = s.ctr_ratio + rng.uniform(-s.ctr_jitter, s.ctr_jitter);
  const double thoracic = 2.0 * (off + sc);
  g.heart = {jit(s.heart_row) + shift_r, jit(s.heart_col) + shift_c, jit(s.heart_semi_rows), 0.5 * g.ctr * thoracic};
  return g;
}

constexpr std::uint8_t kLungLabel[2] = {static_cast<std::uint8_t>(Anatomy::right_lung),
                                        static_cast<std::uint8_t>(Anatomy::left_lung)};

struct Canvas {
  int size;
  std::vector<double> base;
  std::vector<double> delta;
  Grid<std::uint8_t> labels;
  std::vector<std::uint8_t> in_body;

  double y(int r) const { return (r + 0.5) / size; }
  double x(int c) const { return (c + 0.5) / size; }
  std::size_t idx(int r, int c) const { return static_cast<std::size_t>(r) * size + c; }
};

struct Box {
  int r0, r1, c0, c1;  // inclusive-exclusive pixel bounds
};

Box bounding_box(const Canvas& cv, double row, double col, double half_rows, double half_cols) {
  const int n = cv.size;
  return {std::clamp(static_cast<int>(std::floor((row - half_rows) * n)) - 1, 0, n),
          std::clamp(static_cast<int>(std::ceil((row + half_rows) * n)) + 1, 0, n),
          std::clamp(static_cast<int>(std::floor((col - half_cols) * n)) - 1, 0, n),
          std::clamp(static_cast<int>(std::ceil((col + half_cols) * n)) + 1, 0, n)};
}

// One unilateral consolidation spanning most of a lung.
void paint_bacterial(const PhantomSpec& s, const Layout& g, Canvas& cv, Rng& rng, PhantomTruth& truth,
                     std::vector<std::uint8_t>& lesion) {
  const int side = static_cast<int>(rng.below(2));
  const EllipseF& lung = g.lungs[side];
  const double k = rng.uniform(s.lesions.radius_min, s.lesions.radius_max);
  const double aspect = rng.uniform(0.95, 1.05);
  const EllipseF blob{lung.row + rng.uniform(-0.3, 0.3) * lung.semi_rows,
                      lung.col + rng.uniform(-0.3, 0.3) * lung.semi_cols, k * lung.semi_rows * aspect,
                      k * lung.semi_cols / aspect};
  const double contrast = rng.uniform(s.lesions.contrast_min, s.lesions.contrast_max);
  const Box b = bounding_box(cv, blob.row, blob.col, blob.semi_rows, blob.semi_cols);
  for (int r = b.r0; r < b.r1; ++r) {
    for (int c = b.c0; c < b.c1; ++c) {
      const std::size_t i = cv.idx(r, c);
      if (!cv.in_body[i]) continue;
      const double rho = std::sqrt(blob.rho2(cv.y(r), cv.x(c)));
      if (rho >= 1.0) continue;
      const double w = rho <= 0.8 ? 1.0 : 0.5 + 0.5 * std::cos(std::numbers::pi * (rho - 0.8) / 0.2);
      cv.delta[i] += contrast * w;
      if (cv.labels[i] != kLungLabel[side]) truth.lesion_straddles = true;
      if (w > 0.5) lesion[i] = 1;
    }
  }
}

// Small bright nodules in the upper thirds, alternating lungs, clipped to lung.
void paint_tb(const PhantomSpec& s, const Layout& g, Canvas& cv, Rng& rng, int count, std::vector<std::uint8_t>& lesion) {
  int side = static_cast<int>(rng.below(2));
  for (int n = 0; n < count; ++n, side ^= 1) {
    const EllipseF& lung = g.lungs[side];
    const double rad = rng.uniform(s.lesions.radius_min, s.lesions.radius_max);
    const double contrast = rng.uniform(s.lesions.contrast_min, s.lesions.contrast_max);
    double cy = lung.row - lung.semi_rows * 0.6;
    double cx = lung.col;
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double ty = rng.uniform(lung.row - lung.semi_rows, lung.row - lung.semi_rows / 3.0);
      const double tx = rng.uniform(lung.col - lung.semi_cols, lung.col + lung.semi_cols);
      const EllipseF inner{lung.row, lung.col, lung.semi_rows - rad, lung.semi_cols - rad};
      if (inner.semi_rows > 0 && inner.semi_cols > 0 && inner.rho2(ty, tx) <= 1.0) {
        cy = ty;
        cx = tx;
        break;
      }
    }
    const double rad_px = rad * cv.size;
    const Box b = bounding_box(cv, cy, cx, rad, rad);
    for (int r = b.r0; r < b.r1; ++r) {
      for (int c = b.c0; c < b.c1; ++c) {
        const std::size_t i = cv.idx(r, c);
        if (cv.labels[i] != kLungLabel[side]) continue;
        const double d = std::hypot(cv.y(r) - cy, cv.x(c) - cx) * cv.size;
        const double w = std::clamp(rad_px + 0.5 - d, 0.0, 1.0);
        if (w <= 0.0) continue;
        cv.delta[i] += contrast * w;
        if (w > 0.5) lesion[i] = 1;
      }
    }
  }
}

// Diffuse low-density blobs, bilateral, biased toward the lung periphery.
void paint_viral(const PhantomSpec& s, const Layout& g, Canvas& cv, Rng& rng, int count,
                 std::vector<std::uint8_t>& lesion) {
  int side = static_cast<int>(rng.below(2));
  for (int n = 0; n < count; ++n, side ^= 1) {
    const EllipseF& lung = g.lungs[side];
    const double rad = rng.uniform(s.lesions.radius_min, s.lesions.radius_max);
    const double contrast = rng.uniform(s.lesions.contrast_min, s.lesions.contrast_max);
    const double rho = rng.uniform(0.55, 0.95);
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double cy = lung.row + rho * lung.semi_rows * std::sin(theta);
    const double cx = lung.col + rho * lung.semi_cols * std::cos(theta);
    const double sigma = rad / 2.0;
    const Box b = bounding_box(cv, cy, cx, 2.0 * rad, 2.0 * rad);
    for (int r = b.r0; r < b.r1; ++r) {
      for (int c = b.c0; c < b.c1; ++c) {
        const std::size_t i = cv.idx(r, c);
        if (cv.labels[i] != kLungLabel[side]) continue;
        const double dy = cv.y(r) - cy;
        const double dx = cv.x(c) - cx;
        const double d2 = dy * dy + dx * dx;
        if (d2 > 4.0 * rad * rad) continue;
        const double w = std::exp(-d2 / (2.0 * sigma * sigma));
        cv.delta[i] += contrast * w;
        if (w > 0.5) lesion[i] = 1;
      }
    }
  }
}

void check_fraction(double v, const char* what) {
  if (!(v > 0.0 && v < 1.0)) throw InvalidArgument(std::string("phantom geometry: ") + what + " must lie in (0, 1)");
}

void check_intensity(double v, const char* what) {
  if (!(v >= 0.0 && v <= 255.0)) throw InvalidArgument(std::string("phantom intensity ") + what + " outside [0, 255]");
}

}  // namespace

std::string_view class_name(PhantomClass c) {
  switch (c) {
    case PhantomClass::normal: return "normal";
    case PhantomClass::bacterial: return "bacterial";
    case PhantomClass::tb: return "tb";
    case PhantomClass::viral_covid: return "viral_covid";
  }
  return "unknown";
}

std::optional<PhantomClass> parse_class(std::string_view name) {
  for (int i = 0; i < kPhantomClassCount; ++i) {
    if (class_name(static_cast<PhantomClass>(i)) == name) return static_cast<PhantomClass>(i);
  }
  return std::nullopt;
}

const std::vector<std::string>& phantom_class_names() {
  static const std::vector<std::string> names = {"normal", "bacterial", "tb", "viral_covid"};
  return names;
}

void PhantomSpec::validate() const {
  if (image_size < 16) throw InvalidArgument("phantom image_size must be >= 16");
  for (auto [v, name] : {std::pair{body_row, "body_row"}, {body_semi_rows, "body_semi_rows"},
                         {body_semi_cols, "body_semi_cols"}, {lung_row, "lung_row"}, {lung_offset, "lung_offset"},
                         {lung_semi_rows, "lung_semi_rows"}, {lung_semi_cols, "lung_semi_cols"},
                         {heart_row, "heart_row"}, {heart_col, "heart_col"}, {heart_semi_rows, "heart_semi_rows"},
                         {ctr_ratio, "ctr_ratio"}, {rib_period, "rib_period"}}) {
    check_fraction(v, name);
  }
  if (!(geometry_jitter >= 0.0) || !(ctr_jitter >= 0.0) || !(position_jitter >= 0.0)) {
    throw InvalidArgument("phantom jitter must be >= 0");
  }
  const double gj = geometry_jitter;
  const double pj = position_jitter;
  auto fits = [](double centre, double half) { return centre - half >= 0.0 && centre + half <= 1.0; };
  if (!fits(body_row, body_semi_rows) || !fits(0.5, body_semi_cols)) {
    throw InvalidArgument("phantom geometry: body ellipse does not fit in the image");
  }
  if (!fits(lung_row, lung_semi_rows + 2 * gj + pj) || !fits(0.5, lung_offset + lung_semi_cols + 2 * gj + pj)) {
    throw InvalidArgument("phantom geometry: lung ellipses do not fit in the image");
  }
  if (lung_offset - gj <= lung_semi_cols + gj) throw InvalidArgument("phantom geometry: lung ellipses overlap");
  if (ctr_ratio + ctr_jitter >= 1.0 || ctr_ratio - ctr_jitter <= 0.0) {
    throw InvalidArgument("phantom geometry: ctr_ratio +- ctr_jitter must stay inside (0, 1)");
  }
  const double heart_half = 0.5 * (ctr_ratio + ctr_jitter) * 2.0 * (lung_offset + lung_semi_cols + 2 * gj);
  if (!fits(heart_row, heart_semi_rows + 2 * gj + pj) || !fits(heart_col, heart_half + gj + pj)) {
    throw InvalidArgument("phantom geometry: heart ellipse does not fit in the image");
  }
  for (auto [v, name] : {std::pair{air, "air"}, {tissue, "tissue"}, {lung, "lung"}, {heart, "heart"}}) {
    check_intensity(v, name);
  }
  if (!(rib_amplitude >= 0.0) || !(noise_sigma >= 0.0)) throw InvalidArgument("phantom rib/noise must be >= 0");
  const auto& l = lesions;
  if (l.count_min < 0 || l.count_max < l.count_min) throw InvalidArgument("phantom lesion count range is invalid");
  if (!(l.radius_min >= 0.0) || l.radius_max < l.radius_min) throw InvalidArgument("phantom lesion radius range is invalid");
  if (l.contrast_max < l.contrast_min) throw InvalidArgument("phantom lesion contrast range is invalid");
  if (label == PhantomClass::bacterial && l.radius_max > 1.2) {
    throw InvalidArgument("phantom bacterial lesion radius is relative to the lung and must be <= 1.2");
  }
}

PhantomSpec default_phantom_spec(PhantomClass label, int image_size, std::uint64_t seed) {
  PhantomSpec s;
  s.label = label;
  s.image_size = image_size;
  s.seed = seed;
  switch (label) {
    case PhantomClass::normal: break;
    case PhantomClass::bacterial: s.lesions = {1, 1, 0.85, 1.0, 105.0, 135.0}; break;
    case PhantomClass::tb: s.lesions = {2, 5, 0.018, 0.03, 80.0, 110.0}; break;
    case PhantomClass::viral_covid: s.lesions = {4, 10, 0.05, 0.09, -40.0, -25.0}; break;
  }
  return s;
}

double analytic_lung_mean(const PhantomTruth& truth, double gamma) {
  const double a = truth.air_fraction;
  const double l = truth.lung_fraction;
  if (!(l > 0.0)) throw NotComputable("analytic_lung_mean: phantom has no lung");
  return (std::pow(a + l, gamma + 1.0) - std::pow(a, gamma + 1.0)) / ((gamma + 1.0) * l);
}

Phantom gen_phantom(const PhantomSpec& s) {
  s.validate();
  Rng rng(s.seed);
  const Layout g = draw_layout(s, rng);
  const int n = s.image_size;
  Canvas cv{n, std::vector<double>(static_cast<std::size_t>(n) * n), std::vector<double>(static_cast<std::size_t>(n) * n),
            Grid<std::uint8_t>(n, n), std::vector<std::uint8_t>(static_cast<std::size_t>(n) * n)};

  long long air = 0;
  for (int r = 0; r < n; ++r) {
    const double y = cv.y(r);
    for (int c = 0; c < n; ++c) {
      const double x = cv.x(c);
      const std::size_t i = cv.idx(r, c);
      const bool body = g.body.rho2(y, x) <= 1.0;
      cv.in_body[i] = body;
      double v = body ? s.tissue : s.air;
      std::uint8_t label = 0;
      if (!body) ++air;
      for (int side = 0; side < 2; ++side) {
        if (g.lungs[side].rho2(y, x) <= 1.0) {
          label = kLungLabel[side];
          const double phase = (y + 0.35 * std::abs(x - 0.5)) / s.rib_period;
          v = s.lung + s.rib_amplitude * std::pow(0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * phase), 4.0);
        }
      }
      if (body && g.heart.rho2(y, x) <= 1.0) {
        label = static_cast<std::uint8_t>(Anatomy::heart);
        v = s.heart;
      }
      cv.base[i] = v;
      cv.labels[i] = label;
    }
  }

  Phantom out;
  out.label = s.label;
  PhantomTruth& truth = out.truth;
  truth.ctr = g.ctr;
  std::vector<std::uint8_t> lesion(cv.base.size(), 0);
  const int count = s.lesions.count_max > 0 ? rng.uniform_int(s.lesions.count_min, s.lesions.count_max) : 0;
  truth.lesion_count = count;
  switch (s.label) {
    case PhantomClass::normal: break;
    case PhantomClass::bacterial:
      for (int k = 0; k < count; ++k) paint_bacterial(s, g, cv, rng, truth, lesion);
      break;
    case PhantomClass::tb: paint_tb(s, g, cv, rng, count, lesion); break;
    case PhantomClass::viral_covid: paint_viral(s, g, cv, rng, count, lesion); break;
  }

  out.image = {n, n, 8, std::vector<std::uint16_t>(cv.base.size())};
  for (std::size_t i = 0; i < cv.base.size(); ++i) {
    double v = cv.base[i] + cv.delta[i];
    if (s.noise_sigma > 0.0) v += s.noise_sigma * rng.normal();
    out.image.values[i] = static_cast<std::uint16_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  out.mask = LabelMask(std::move(cv.labels));
  truth.stats = mask_stats(out.mask);
  long long lung_lesion = 0;
  const auto labels = out.mask.grid().values();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (lesion[i] && is_lung_label(labels[i])) ++lung_lesion;
  }
  const double total = static_cast<double>(labels.size());
  truth.lung_fraction = static_cast<double>(truth.stats.lung_area) / total;
  truth.air_fraction = static_cast<double>(air) / total;
  truth.lesion_lung_fraction =
      truth.stats.lung_area > 0 ? static_cast<double>(lung_lesion) / static_cast<double>(truth.stats.lung_area) : 0.0;
  return out;
}

std::vector<Phantom> gen_phantom_batch(const PhantomSpec& base, int n, std::uint64_t seed) {
  if (n < 0) throw InvalidArgument("phantom batch size must be >= 0");
  std::vector<Phantom> out(static_cast<std::size_t>(n));
  parallel_for(out.size(), [&](std::size_t i) {
    PhantomSpec s = base;
    s.seed = derive_seed(seed, i);
    out[i] = gen_phantom(s);
  });
  return out;
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "val";
    case Split::test: return "test";
  }
  return "unknown";
}

SplitCounts split_counts(int n) {
  if (n < 0) throw InvalidArgument("split_counts: negative count");
  SplitCounts c;
  c.train = (7 * n + 5) / 10;
  c.validation = (n + 5) / 10;
  c.test = n - c.train - c.validation;
  if (c.test < 0) {
    c.validation += c.test;
    c.test = 0;
  }
  return c;
}

DatasetConfig DatasetConfig::defaults(int n_per_class, int image_size, std::uint64_t seed) {
  DatasetConfig cfg;
  cfg.n_per_class = n_per_class;
  cfg.image_size = image_size;
  cfg.seed = seed;
  for (int c = 0; c < kPhantomClassCount; ++c) {
    cfg.class_specs.push_back(default_phantom_spec(static_cast<PhantomClass>(c), image_size));
  }
  return cfg;
}

void DatasetConfig::validate() const {
  if (n_per_class < 10) throw InvalidArgument("gen_dataset: n_per_class must be >= 10");
  if (class_specs.empty()) throw InvalidArgument("gen_dataset: no class specs");
  for (std::size_t c = 0; c < class_specs.size(); ++c) {
    PhantomSpec s = class_specs[c];
    s.image_size = image_size;
    s.validate();
  }
}

PhantomSpec item_spec(const DatasetConfig& cfg, const DatasetItem& item) {
  for (const auto& s : cfg.class_specs) {
    if (s.label == item.label) {
      PhantomSpec out = s;
      out.image_size = cfg.image_size;
      out.seed = item.seed;
      return out;
    }
  }
  throw InvalidArgument("dataset config has no spec for class '" + std::string(class_name(item.label)) + "'");
}

DatasetManifest plan_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  DatasetManifest m;
  m.seed = cfg.seed;
  nlohmann::json digest_src{{"n_per_class", cfg.n_per_class}, {"image_size", cfg.image_size}};
  for (const auto& s : cfg.class_specs) digest_src["class_specs"].push_back(to_json(s));
  m.spec_digest = sha256_hex(digest_src.dump());

  const SplitCounts counts = split_counts(cfg.n_per_class);
  for (const auto& spec : cfg.class_specs) {
    const auto cls = static_cast<std::uint64_t>(spec.label);
    std::vector<int> perm(static_cast<std::size_t>(cfg.n_per_class));
    for (int i = 0; i < cfg.n_per_class; ++i) perm[i] = i;
    Rng rng(derive_seed(cfg.seed, 1000 + cls));
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    std::vector<Split> split(perm.size());
    for (int rank = 0; rank < cfg.n_per_class; ++rank) {
      split[perm[rank]] = rank < counts.train                        ? Split::train
                          : rank < counts.train + counts.validation ? Split::validation
                                                                     : Split::test;
    }
    for (int i = 0; i < cfg.n_per_class; ++i) {
      char stem[64];
      std::snprintf(stem, sizeof stem, "%s_%04d.png", std::string(class_name(spec.label)).c_str(), i);
      m.items.push_back({std::string("images/") + stem, std::string("masks/") + stem, spec.label, split[i],
                         derive_seed(derive_seed(cfg.seed, cls), static_cast<std::uint64_t>(i))});
    }
  }
  return m;
}

DatasetManifest gen_dataset(const DatasetConfig& cfg, const std::filesystem::path& dir) {
  DatasetManifest m = plan_dataset(cfg);
  std::error_code ec;
  const auto parent = dir.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw IoError("output directory parent does not exist: " + parent.string());
  }
  for (const auto& sub : {dir, dir / "images", dir / "masks"}) {
    std::filesystem::create_directory(sub, ec);
    if (ec || !std::filesystem::is_directory(sub)) throw IoError("cannot create directory " + sub.string());
  }
  parallel_for(m.items.size(), [&](std::size_t i) {
    const auto& item = m.items[i];
    const Phantom ph = gen_phantom(item_spec(cfg, item));
    write_png(dir / item.image_path, ph.image);
    write_mask(dir / item.mask_path, ph.mask);
  });
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << to_json(m).dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest");
  return m;
}

namespace {

struct SpecField {
  const char* name;
  double PhantomSpec::*member;
};

constexpr SpecField kDoubleFields[] = {
    {"body_row", &PhantomSpec::body_row},
    {"body_semi_rows", &PhantomSpec::body_semi_rows},
    {"body_semi_cols", &PhantomSpec::body_semi_cols},
    {"lung_row", &PhantomSpec::lung_row},
    {"lung_offset", &PhantomSpec::lung_offset},
    {"lung_semi_rows", &PhantomSpec::lung_semi_rows},
    {"lung_semi_cols", &PhantomSpec::lung_semi_cols},
    {"heart_row", &PhantomSpec::heart_row},
    {"heart_col", &PhantomSpec::heart_col},
    {"heart_semi_rows", &PhantomSpec::heart_semi_rows},
    {"ctr_ratio", &PhantomSpec::ctr_ratio},
    {"ctr_jitter", &PhantomSpec::ctr_jitter},
    {"geometry_jitter", &PhantomSpec::geometry_jitter},
    {"position_jitter", &PhantomSpec::position_jitter},
    {"air", &PhantomSpec::air},
    {"tissue", &PhantomSpec::tissue},
    {"lung", &PhantomSpec::lung},
    {"heart", &PhantomSpec::heart},
    {"rib_amplitude", &PhantomSpec::rib_amplitude},
    {"rib_period", &PhantomSpec::rib_period},
    {"noise_sigma", &PhantomSpec::noise_sigma},
};

}  // namespace

nlohmann::json to_json(const PhantomSpec& spec) {
  nlohmann::json j{{"label", class_name(spec.label)}, {"image_size", spec.image_size}, {"seed", spec.seed}};
  for (const auto& f : kDoubleFields) j[f.name] = spec.*(f.member);
  const auto& l = spec.lesions;
  j["lesions"] = {{"count_min", l.count_min},       {"count_max", l.count_max},
                  {"radius_min", l.radius_min},     {"radius_max", l.radius_max},
                  {"contrast_min", l.contrast_min}, {"contrast_max", l.contrast_max}};
  return j;
}

PhantomSpec phantom_spec_from_json(const nlohmann::json& j, PhantomSpec base) {
  if (!j.is_object()) throw InvalidArgument("phantom spec must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "label") {
        const auto c = parse_class(value.get<std::string>());
        if (!c) throw InvalidArgument("unknown phantom class '" + value.get<std::string>() + "'");
        base.label = *c;
      } else if (key == "image_size") {
        base.image_size = value.get<int>();
      } else if (key == "seed") {
        base.seed = value.get<std::uint64_t>();
      } else if (key == "lesions") {
        if (!value.is_object()) throw InvalidArgument("phantom 'lesions' must be an object");
        for (const auto& [lk, lv] : value.items()) {
          auto& l = base.lesions;
          if (lk == "count_min") l.count_min = lv.get<int>();
          else if (lk == "count_max") l.count_max = lv.get<int>();
          else if (lk == "radius_min") l.radius_min = lv.get<double>();
          else if (lk == "radius_max") l.radius_max = lv.get<double>();
          else if (lk == "contrast_min") l.contrast_min = lv.get<double>();
          else if (lk == "contrast_max") l.contrast_max = lv.get<double>();
          else throw InvalidArgument("unknown phantom lesion key '" + lk + "'");
        }
      } else {
        const auto it = std::find_if(std::begin(kDoubleFields), std::end(kDoubleFields),
                                     [&](const SpecField& f) { return key == f.name; });
        if (it == std::end(kDoubleFields)) throw InvalidArgument("unknown phantom spec key '" + key + "'");
        base.*(it->member) = value.get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("phantom spec has a value of the wrong type: ") + e.what());
  }
  return base;
}

nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : m.items) {
    items.push_back({{"image_path", it.image_path},
                     {"mask_path", it.mask_path},
                     {"label", class_name(it.label)},
                     {"split", split_name(it.split)},
                     {"seed", it.seed}});
  }
  return {{"items", items}, {"seed", m.seed}, {"spec_digest", m.spec_digest}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    m.spec_digest = j.value("spec_digest", std::string());
    for (const auto& it : j.at("items")) {
      DatasetItem item;
      item.image_path = it.at("image_path").get<std::string>();
      item.mask_path = it.at("mask_path").get<std::string>();
      const auto label = parse_class(it.at("label").get<std::string>());
      if (!label) throw InvalidArgument("manifest item has an unknown label");
      item.label = *label;
      const auto split = it.at("split").get<std::string>();
      if (split == "train") item.split = Split::train;
      else if (split == "val") item.split = Split::validation;
      else if (split == "test") item.split = Split::test;
      else throw InvalidArgument("manifest item has an unknown split '" + split + "'");
      item.seed = it.value("seed", std::uint64_t{0});
      m.items.push_back(std::move(item));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed dataset manifest: ") + e.what());
  }
  return m;
}

}  // namespace patchtriage
