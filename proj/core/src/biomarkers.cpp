#include <bit>
#include "patchtriage/biomarkers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "patchtriage/errors.hpp"
#include "patchtriage/parallel.hpp"
#include "patchtriage/random.hpp"
#include "patchtriage/segmask.hpp"

namespace patchtriage {

namespace {

enum Marker { kLungMean = 0, kLungStd, kCtr, kInterPatch, kIntraPatch, kMarkerCount };

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

nlohmann::json test_json(const TestResult& t) {
  nlohmann::json j{{"statistic", t.statistic},
                   {"p_value", t.p_value},
                   {"method", t.method == TestMethod::exact ? "exact" : "approximate"},
                   {"n1", t.n1},
                   {"n2", t.n2}};
  if (t.method == TestMethod::exact) {
    j["p_numerator"] = t.p_numerator;
    j["p_denominator"] = t.p_denominator;
  }
  return j;
}

}  // namespace

IntensityStats lung_intensity_stats(const RasterImage& img, const LabelMask& mask) {
  if (img.height() != mask.height() || img.width() != mask.width()) {
    throw InvalidArgument("lung_intensity_stats: image and mask differ in size");
  }
  double s = 0.0;
  long long n = 0;
  const auto px = img.pixels();
  const auto lab = mask.grid().values();
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (!is_lung_label(lab[i])) continue;
    s += px[i];
    ++n;
  }
  if (n == 0) throw NotComputable("lung_intensity_stats: mask has no lung pixels");
  const double mean = s / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (is_lung_label(lab[i])) ss += (px[i] - mean) * (px[i] - mean);
  }
  return {mean / 255.0, std::sqrt(ss / static_cast<double>(n)) / 255.0, n};
}

PatchIntensityStats patch_intensity_stats(std::span<const Patch> patches) {
  if (patches.empty()) throw InvalidArgument("patch_intensity_stats: no patches");
  PatchIntensityStats out;
  for (const auto& patch : patches) {
    double s = 0.0;
    long long n = 0;
    for (float v : patch.pixels()) {
      if (v != 0.0f) {
        s += v;
        ++n;
      }
    }
    if (n == 0) {
      ++out.excluded;
      continue;
    }
    const double mean = s / static_cast<double>(n);
    double ss = 0.0;
    for (float v : patch.pixels()) {
      if (v != 0.0f) ss += (v - mean) * (v - mean);
    }
    out.inter.push_back(mean / 255.0);
    out.intra.push_back(std::sqrt(ss / static_cast<double>(n)) / 255.0);
  }
  if (out.inter.empty()) throw NotComputable("patch_intensity_stats: every patch is empty");
  return out;
}

std::uint64_t marker_image_seed(std::uint64_t master, const RasterImage& img, const LabelMask& mask) {
  // FNV-1a over the dimensions, pixel bit patterns and labels
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(img.height()));
  mix(static_cast<std::uint64_t>(img.width()));
  for (float v : img.pixels()) mix(std::bit_cast<std::uint32_t>(v));
  for (std::uint8_t v : mask.grid().values()) mix(v);
  return derive_seed(master, h);
}

ImageMarkers image_markers(const RasterImage& img, const LabelMask& mask, int class_index, const MarkerConfig& cfg,
                           std::uint64_t seed) {
  ImageMarkers m;
  const auto lung = lung_intensity_stats(img, mask);
  m.lung_mean = lung.mean;
  m.lung_std = lung.std;
  try {
    m.ctr = ctr(mask);
  } catch (const NotComputable&) {
    m.ctr.reset();
  }
  const RasterImage masked = apply_mask(img, mask, LabelSet::lungs());
  PatchSet set = extract_patches(masked, mask, cfg.K, cfg.p, cfg.q, seed);
  std::vector<Patch> kept;
  if (cfg.patch_filter) {
    for (auto& patch : set.patches) {
      if (cfg.patch_filter(patch, class_index)) kept.push_back(std::move(patch));
    }
  } else {
    kept = std::move(set.patches);
  }
  if (!kept.empty()) {
    try {
      auto ps = patch_intensity_stats(kept);
      m.inter_patch_means = std::move(ps.inter);
      m.intra_patch_stds = std::move(ps.intra);
      m.excluded_patches = ps.excluded;
    } catch (const NotComputable&) {
      m.excluded_patches = kept.size();
    }
  }
  m.excluded_patches += set.patches.size() - kept.size();
  return m;
}

const std::vector<double>& MarkerTable::marker(const std::string& name, int cls) const {
  const auto& names = marker_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidArgument("unknown marker '" + name + "'");
  return values.at(static_cast<std::size_t>(it - names.begin())).at(static_cast<std::size_t>(cls));
}

const PairwiseCell& MarkerTable::cell(const std::string& name, int a, int b) const {
  const auto& names = marker_names();
  const auto idx = static_cast<int>(std::find(names.begin(), names.end(), name) - names.begin());
  for (const auto& c : pairwise) {
    if (c.marker == idx && ((c.class_a == a && c.class_b == b) || (c.class_a == b && c.class_b == a))) return c;
  }
  throw InvalidArgument("no pairwise cell for marker '" + name + "'");
}

MarkerTable assemble_marker_table(std::span<const std::string> class_names,
                                  std::span<const std::vector<ImageMarkers>> per_class) {
  if (class_names.size() != per_class.size()) throw InvalidArgument("marker table: one name per class required");
  if (per_class.size() < 2) throw InvalidArgument("marker table: at least two classes are required");
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    if (per_class[c].size() < 3) {
      throw InvalidArgument("marker table: class '" + class_names[c] + "' has fewer than three images");
    }
  }
  MarkerTable t;
  t.class_names.assign(class_names.begin(), class_names.end());
  const std::size_t nc = per_class.size();
  t.values.assign(kMarkerCount, std::vector<std::vector<double>>(nc));
  t.excluded_patches.assign(nc, 0);
  for (std::size_t c = 0; c < nc; ++c) {
    for (const auto& m : per_class[c]) {
      t.values[kLungMean][c].push_back(m.lung_mean);
      t.values[kLungStd][c].push_back(m.lung_std);
      if (m.ctr) t.values[kCtr][c].push_back(*m.ctr);
      t.excluded_patches[c] += m.excluded_patches;
      t.values[kInterPatch][c].insert(t.values[kInterPatch][c].end(), m.inter_patch_means.begin(),
                                      m.inter_patch_means.end());
      t.values[kIntraPatch][c].insert(t.values[kIntraPatch][c].end(), m.intra_patch_stds.begin(),
                                      m.intra_patch_stds.end());
    }
  }
  t.normality.assign(kMarkerCount, std::vector<std::optional<TestResult>>(nc));
  for (int mk = 0; mk < kMarkerCount; ++mk) {
    for (std::size_t c = 0; c < nc; ++c) {
      try {
        t.normality[mk][c] = ks_normality(t.values[mk][c]);
      } catch (const std::exception&) {
        t.normality[mk][c].reset();
      }
    }
    for (std::size_t a = 0; a < nc; ++a) {
      for (std::size_t b = a + 1; b < nc; ++b) {
        const auto& xa = t.values[mk][a];
        const auto& xb = t.values[mk][b];
        if (xa.size() < 3 || xb.size() < 3) continue;
        PairwiseCell cell{mk, static_cast<int>(a), static_cast<int>(b), wilcoxon_rank_sum(xa, xb), {}};
        cell.stars = significance_stars(cell.test.p_value);
        t.pairwise.push_back(std::move(cell));
      }
    }
  }
  return t;
}

MarkerTable marker_report(std::span<const MarkerClass> classes, const MarkerConfig& cfg) {
  if (classes.size() < 2) throw InvalidArgument("marker_report: at least two classes are required");
  std::vector<std::string> names;
  std::vector<std::vector<ImageMarkers>> per_class(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& cls = classes[c];
    if (cls.images.size() != cls.masks.size()) throw InvalidArgument("marker_report: images and masks differ in count");
    if (cls.images.size() < 3) throw InvalidArgument("marker_report: class '" + cls.name + "' has fewer than three images");
    names.push_back(cls.name);
    per_class[c].resize(cls.images.size());
    parallel_for(cls.images.size(), [&](std::size_t i) {
      per_class[c][i] = image_markers(cls.images[i], cls.masks[i], static_cast<int>(c), cfg,
                                      marker_image_seed(cfg.seed, cls.images[i], cls.masks[i]));
    });
  }
  return assemble_marker_table(names, per_class);
}

nlohmann::json to_json(const MarkerTable& table) {
  nlohmann::json markers = nlohmann::json::array();
  const auto& names = marker_names();
  for (int mk = 0; mk < kMarkerCount; ++mk) {
    nlohmann::json classes = nlohmann::json::array();
    for (std::size_t c = 0; c < table.class_names.size(); ++c) {
      const auto& v = table.values[mk][c];
      nlohmann::json entry{{"class", table.class_names[c]}, {"n", v.size()}, {"mean", mean_of(v)}, {"std", sd_of(v)}};
      entry["ks"] = table.normality[mk][c] ? test_json(*table.normality[mk][c]) : nlohmann::json();
      if (mk < kInterPatch) entry["values"] = v;
      classes.push_back(std::move(entry));
    }
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& cell : table.pairwise) {
      if (cell.marker != mk) continue;
      pairs.push_back({{"class_a", table.class_names[cell.class_a]},
                       {"class_b", table.class_names[cell.class_b]},
                       {"rank_sum", test_json(cell.test)},
                       {"stars", cell.stars}});
    }
    markers.push_back({{"marker", names[mk]}, {"classes", classes}, {"pairwise", pairs}});
  }
  return {{"classes", table.class_names}, {"markers", markers}, {"excluded_patches", table.excluded_patches}};
}

std::string marker_text_table(const MarkerTable& table) {
  std::ostringstream os;
  const auto& names = marker_names();
  std::size_t width = 8;
  for (const auto& n : table.class_names) width = std::max(width, n.size() + 2);
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  for (int mk = 0; mk < kMarkerCount; ++mk) {
    os << names[mk] << '\n';
    os << pad("class", width) << pad("n", 8) << pad("mean", 12) << pad("std", 12) << "KS p\n";
    for (std::size_t c = 0; c < table.class_names.size(); ++c) {
      const auto& v = table.values[mk][c];
      const auto& ks = table.normality[mk][c];
      os << pad(table.class_names[c], width) << pad(std::to_string(v.size()), 8) << pad(fmt("%.4f", mean_of(v)), 12)
         << pad(fmt("%.4f", sd_of(v)), 12) << (ks ? fmt("%.3g", ks->p_value) : std::string("n/a")) << '\n';
    }
    os << pad("pair", 2 * width + 4) << pad("p", 12) << "sig\n";
    for (const auto& cell : table.pairwise) {
      if (cell.marker != mk) continue;
      os << pad(table.class_names[cell.class_a] + " vs " + table.class_names[cell.class_b], 2 * width + 4)
         << pad(fmt("%.3g", cell.test.p_value), 12) << cell.stars << '\n';
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace patchtriage
