#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "densesynth/core/density.hpp"
#include "densesynth/core/error.hpp"
#include "densesynth/core/geometry.hpp"
#include "densesynth/core/hash.hpp"
#include "densesynth/core/manifest.hpp"
#include "densesynth/core/types.hpp"

namespace densesynth::phantom {

// Intensity model (normalized units). Bright fibroglandular tissue sits above
// kDenseThreshold; fatty tissue and the pectoral wedge sit below it.
inline constexpr float kFattyLevel = 0.20f;
inline constexpr float kDenseLevel = 0.55f;
inline constexpr float kPectoralLevel = 0.30f;
inline constexpr float kBreastFloor = 0.06f;
inline constexpr float kDenseThreshold = 0.40f;
inline constexpr float kDenseCoreGain = 0.12f;
inline constexpr float kFatRadialBias = 6.0f;

struct MassSpec {
  double cx = 0.0;  ///< centre column (pixels)
  double cy = 0.0;  ///< centre row (pixels)
  double rx = 0.0;
  double ry = 0.0;
  double contrast = 0.3;
};

struct PhantomSpec {
  std::uint64_t seed = 0;
  View view = View::CC;
  Laterality laterality = Laterality::L;
  double density = 0.0;  ///< d in [0, 1]
  std::vector<MassSpec> masses;
  int height = 256;
  int width = 160;
  std::string id = "phantom";
  std::string dataset_tag = "PHANTOM";
};

/// Breast outline for a spec. `breast` covers the whole foreground, `tissue`
/// excludes the pectoral wedge (empty for CC).
struct PhantomGeometry {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> breast;
  std::vector<std::uint8_t> tissue;
  /// Normalized elliptical radius from the chest-wall centre (0 deep, 1 at the skin).
  std::vector<float> radius;

  [[nodiscard]] bool in_breast(int r, int c) const {
    return r >= 0 && c >= 0 && r < height && c < width && breast[r * width + c];
  }
  [[nodiscard]] bool in_tissue(int r, int c) const {
    return r >= 0 && c >= 0 && r < height && c < width && tissue[r * width + c];
  }
  [[nodiscard]] Rect bounding_rect() const {
    int x0 = width, y0 = height, x1 = -1, y1 = -1;
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c)
        if (breast[r * width + c]) {
          x0 = std::min(x0, c);
          x1 = std::max(x1, c);
          y0 = std::min(y0, r);
          y1 = std::max(y1, r);
        }
    return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
  }
};

struct Phantom {
  MammogramRecord record;
  PhantomGeometry geometry;
  /// Density proxy of the tissue before masses are inserted.
  double tissue_density_percent = 0.0;
};

namespace detail {

inline std::vector<float> gaussian_blur(const std::vector<float>& in, int h, int w, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) total += kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
  for (double& v : kernel) v /= total;
  std::vector<float> tmp(in.size()), out(in.size());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * in[r * w + std::clamp(c + k, 0, w - 1)];
      tmp[r * w + c] = static_cast<float>(acc);
    }
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp[std::clamp(r + k, 0, h - 1) * w + c];
      out[r * w + c] = static_cast<float>(acc);
    }
  return out;
}

// Blurred white noise rescaled to zero mean / unit variance over the whole canvas.
inline std::vector<float> band_limited_noise(std::mt19937_64& rng, int h, int w, double sigma) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> white(static_cast<std::size_t>(h) * w);
  for (float& v : white) v = normal(rng);
  auto field = gaussian_blur(white, h, w, sigma);
  double mean = 0.0, sq = 0.0;
  for (float v : field) mean += v;
  mean /= field.size();
  for (float v : field) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / field.size());
  for (float& v : field) v = static_cast<float>((v - mean) / (sd > 0 ? sd : 1.0));
  return field;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Pixel-centre membership test; shared by rendering and box computation.
inline bool in_ellipse(const MassSpec& m, int r, int c) {
  const double dx = (c + 0.5 - m.cx) / m.rx;
  const double dy = (r + 0.5 - m.cy) / m.ry;
  return dx * dx + dy * dy <= 1.0;
}

}  // namespace detail

/// Breast outline derived from (seed, view, laterality, dims) only, so the same
/// geometry is available before masses are chosen.
inline PhantomGeometry phantom_geometry(const PhantomSpec& spec) {
  if (spec.height < 16 || spec.width < 16) throw InvalidInput("phantom canvas must be at least 16x16");
  std::mt19937_64 rng(mix_seed(spec.seed, 0x6e6f));
  const int h = spec.height, w = spec.width;
  PhantomGeometry g{h, w, std::vector<std::uint8_t>(h * w, 0), std::vector<std::uint8_t>(h * w, 0),
                    std::vector<float>(h * w, 1.0f)};
  const bool mlo = spec.view == View::MLO;
  const double cy = h * (mlo ? detail::uniform(rng, 0.52, 0.58) : detail::uniform(rng, 0.47, 0.53));
  const double ay = h * (mlo ? detail::uniform(rng, 0.42, 0.47) : detail::uniform(rng, 0.40, 0.46));
  const double ax = w * (mlo ? detail::uniform(rng, 0.80, 0.92) : detail::uniform(rng, 0.78, 0.90));
  const double pw = w * detail::uniform(rng, 0.26, 0.34);
  const double ph = h * detail::uniform(rng, 0.28, 0.36);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      // Chest wall on the left for L; mirrored below for R.
      const double x = c + 0.5, y = r + 0.5;
      const double rho2 = (x / ax) * (x / ax) + ((y - cy) / ay) * ((y - cy) / ay);
      const bool ellipse = rho2 <= 1.0;
      const bool wedge = mlo && (x / pw + y / ph < 1.0);
      const int col = spec.laterality == Laterality::L ? c : w - 1 - c;
      g.breast[r * w + col] = ellipse || wedge;
      g.tissue[r * w + col] = ellipse && !wedge;
      g.radius[r * w + col] = static_cast<float>(std::sqrt(rho2));
    }
  }
  return g;
}

/// Fraction (percent) of in-breast pixels at or above the dense threshold.
/// In-breast means intensity above kBreastFloor.
inline double measure_density_proxy(const Image& image) {
  std::size_t breast = 0, bright = 0;
  for (float v : image.pixels) {
    if (v > kBreastFloor) {
      ++breast;
      if (v >= kDenseThreshold) ++bright;
    }
  }
  if (breast == 0) throw InvalidInput("no breast region");
  return 100.0 * static_cast<double>(bright) / static_cast<double>(breast);
}

/// Tight pixel bounding box of a rendered mass ellipse.
inline MassBox mass_box(const MassSpec& m, int height, int width) {
  int x0 = width, y0 = height, x1 = -1, y1 = -1;
  const int r_lo = std::max(0, static_cast<int>(std::floor(m.cy - m.ry - 1)));
  const int r_hi = std::min(height - 1, static_cast<int>(std::ceil(m.cy + m.ry + 1)));
  const int c_lo = std::max(0, static_cast<int>(std::floor(m.cx - m.rx - 1)));
  const int c_hi = std::min(width - 1, static_cast<int>(std::ceil(m.cx + m.rx + 1)));
  for (int r = r_lo; r <= r_hi; ++r)
    for (int c = c_lo; c <= c_hi; ++c)
      if (detail::in_ellipse(m, r, c)) {
        x0 = std::min(x0, c);
        x1 = std::max(x1, c);
        y0 = std::min(y0, r);
        y1 = std::max(y1, r);
      }
  if (x1 < 0) return {};
  return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 - x0 + 1),
          static_cast<double>(y1 - y0 + 1)};
}

/// Mean intensity inside the ellipse inscribed in `box` (normalized radius
/// <= 0.8) minus the mean over the in-breast ring at radius [1.4, 2.0].
inline double measure_mass_contrast(const Image& image, const MassBox& box) {
  const double cx = box.x + box.w / 2, cy = box.y + box.h / 2;
  const double rx = box.w / 2, ry = box.h / 2;
  double in_sum = 0.0, ring_sum = 0.0;
  std::size_t in_n = 0, ring_n = 0;
  const int r_lo = std::max(0, static_cast<int>(std::floor(cy - 2.0 * ry)));
  const int r_hi = std::min(image.height - 1, static_cast<int>(std::ceil(cy + 2.0 * ry)));
  const int c_lo = std::max(0, static_cast<int>(std::floor(cx - 2.0 * rx)));
  const int c_hi = std::min(image.width - 1, static_cast<int>(std::ceil(cx + 2.0 * rx)));
  for (int r = r_lo; r <= r_hi; ++r)
    for (int c = c_lo; c <= c_hi; ++c) {
      const double dx = (c + 0.5 - cx) / rx, dy = (r + 0.5 - cy) / ry;
      const double rho = std::sqrt(dx * dx + dy * dy);
      const float v = image.at(r, c);
      if (rho <= 0.8) {
        in_sum += v;
        ++in_n;
      } else if (rho >= 1.4 && rho <= 2.0 && v > kBreastFloor) {
        ring_sum += v;
        ++ring_n;
      }
    }
  if (in_n == 0 || ring_n == 0) throw InvalidInput("mass contrast: empty mass or ring region");
  return in_sum / in_n - ring_sum / ring_n;
}

/// Renders a phantom and returns it with its masks.
inline Phantom render_phantom(const PhantomSpec& spec) {
  if (!(spec.density >= 0.0 && spec.density <= 1.0)) throw InvalidInput("phantom density must lie in [0, 1]");
  Phantom out;
  out.geometry = phantom_geometry(spec);
  const auto& g = out.geometry;
  const int h = spec.height, w = spec.width;

  std::mt19937_64 rng(mix_seed(spec.seed, 0x7478));
  const auto blobs = detail::band_limited_noise(rng, h, w, 0.02 * h);
  const auto fine = detail::band_limited_noise(rng, h, w, 1.0);
  // Brighter fibroglandular cores, roughly mass-sized, inside dense tissue.
  const auto cores = detail::band_limited_noise(rng, h, w, 0.015 * h);

  // Dense mask: the top-d fraction of tissue pixels by noise value. The radial
  // bias keeps residual fat near the skin line instead of in isolated holes.
  std::vector<float> field(blobs.size());
  for (std::size_t i = 0; i < field.size(); ++i) field[i] = blobs[i] - kFatRadialBias * g.radius[i] * g.radius[i];
  std::vector<float> tissue_noise;
  for (int i = 0; i < h * w; ++i)
    if (g.tissue[i]) tissue_noise.push_back(field[i]);
  const auto n_dense = static_cast<std::size_t>(std::llround(spec.density * tissue_noise.size()));
  float cut = std::numeric_limits<float>::infinity();
  if (n_dense > 0) {
    auto nth = tissue_noise.begin() + static_cast<std::ptrdiff_t>(tissue_noise.size() - n_dense);
    std::nth_element(tissue_noise.begin(), nth, tissue_noise.end());
    cut = *nth;
  }

  Image image(h, w, 0.0f);
  for (int i = 0; i < h * w; ++i) {
    if (!g.breast[i]) continue;
    const float f = std::clamp(fine[i], -3.0f, 3.0f);
    if (!g.tissue[i]) {
      image.pixels[i] = kPectoralLevel + 0.015f * f;
    } else if (field[i] >= cut) {
      image.pixels[i] = kDenseLevel + kDenseCoreGain * std::clamp(cores[i] - 0.5f, 0.0f, 2.0f) + 0.03f * f;
    } else {
      image.pixels[i] = kFattyLevel + 0.015f * f;
    }
  }
  out.tissue_density_percent = measure_density_proxy(image);

  MammogramRecord& rec = out.record;
  for (const auto& m : spec.masses) {
    if (!(m.rx > 0 && m.ry > 0)) throw InvalidInput("mass radii must be positive");
    if (!(m.contrast > 0 && m.contrast <= 0.35)) throw InvalidInput("mass contrast must lie in (0, 0.35]");
    const MassBox box = mass_box(m, h, w);
    if (box.w <= 0) throw InvalidInput("mass outside breast: empty footprint");
    for (int r = static_cast<int>(box.y); r < box.bottom(); ++r)
      for (int c = static_cast<int>(box.x); c < box.right(); ++c)
        if (detail::in_ellipse(m, r, c)) {
          if (!g.in_breast(r, c)) throw InvalidInput("mass outside breast in phantom " + spec.id);
          image.at(r, c) = std::min(1.0f, image.at(r, c) + static_cast<float>(m.contrast));
        }
    rec.annotations.push_back(box);
  }
  quantize16(image);

  rec.id = spec.id;
  rec.dataset_tag = spec.dataset_tag;
  rec.view = spec.view;
  rec.laterality = spec.laterality;
  rec.image = std::move(image);
  rec.health = spec.masses.empty() ? Health::NORMAL : Health::WITH_MASSES;
  rec.density = DensityMeasure{DensityKind::LIBRA_PERCENT, out.tissue_density_percent};
  return out;
}

inline MammogramRecord generate_phantom(const PhantomSpec& spec) { return render_phantom(spec).record; }

// ---- corpora ----------------------------------------------------------------

struct CategoryCounts {
  int normal = 0;
  int with_masses = 0;
};

/// Corpus request. JSON form:
///   {"seed": 1, "height": 256, "width": 160, "dataset_tag": "PHANTOM",
///    "id_prefix": "ph", "counts": {"A": {"normal": 10, "with_masses": 5}, ...},
///    "masses_per_image": [1, 2], "mass_radius": [0.03, 0.05],
///    "mass_contrast": [0.25, 0.35]}
/// Radii are fractions of the canvas height.
struct CorpusConfig {
  std::uint64_t seed = 1;
  int height = 256;
  int width = 160;
  std::string dataset_tag = "PHANTOM";
  std::string id_prefix = "ph";
  std::array<CategoryCounts, 4> counts{};
  int min_masses = 1;
  int max_masses = 2;
  double min_radius = 0.03;
  double max_radius = 0.05;
  double min_contrast = 0.25;
  double max_contrast = 0.35;
};

/// Density-parameter ranges chosen so the measured proxy lands inside the
/// category for both views (the MLO wedge removes at most ~10% of the breast).
inline std::pair<double, double> density_range(DensityCategory c) {
  switch (c) {
    case DensityCategory::A: return {0.0, 0.015};
    case DensityCategory::B: return {0.06, 0.22};
    case DensityCategory::C: return {0.32, 0.66};
    case DensityCategory::D: return {0.88, 1.0};
  }
  return {0.0, 0.0};
}

inline CorpusConfig corpus_config_from_json(const json& j) {
  CorpusConfig c;
  c.seed = j.value("seed", c.seed);
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.dataset_tag = j.value("dataset_tag", c.dataset_tag);
  c.id_prefix = j.value("id_prefix", c.id_prefix);
  if (j.contains("counts")) {
    for (const auto& [key, val] : j["counts"].items()) {
      auto& slot = c.counts[static_cast<int>(parse_category(key))];
      slot.normal = val.value("normal", 0);
      slot.with_masses = val.value("with_masses", 0);
    }
  }
  if (j.contains("masses_per_image")) {
    c.min_masses = j["masses_per_image"].at(0).get<int>();
    c.max_masses = j["masses_per_image"].at(1).get<int>();
  }
  if (j.contains("mass_radius")) {
    c.min_radius = j["mass_radius"].at(0).get<double>();
    c.max_radius = j["mass_radius"].at(1).get<double>();
  }
  if (j.contains("mass_contrast")) {
    c.min_contrast = j["mass_contrast"].at(0).get<double>();
    c.max_contrast = j["mass_contrast"].at(1).get<double>();
  }
  return c;
}

inline json corpus_config_to_json(const CorpusConfig& c) {
  json counts = json::object();
  for (auto cat : kAllCategories) {
    const auto& n = c.counts[static_cast<int>(cat)];
    counts[to_string(cat)] = {{"normal", n.normal}, {"with_masses", n.with_masses}};
  }
  return {{"seed", c.seed},
          {"height", c.height},
          {"width", c.width},
          {"dataset_tag", c.dataset_tag},
          {"id_prefix", c.id_prefix},
          {"counts", counts},
          {"masses_per_image", {c.min_masses, c.max_masses}},
          {"mass_radius", {c.min_radius, c.max_radius}},
          {"mass_contrast", {c.min_contrast, c.max_contrast}}};
}

/// Places up to `count` non-overlapping masses whose context ring (twice the
/// radius) stays inside the tissue region.
inline std::vector<MassSpec> place_masses(const PhantomGeometry& g, std::mt19937_64& rng, int count,
                                          const CorpusConfig& cfg) {
  std::vector<MassSpec> masses;
  for (int attempt = 0; attempt < 2000 && static_cast<int>(masses.size()) < count; ++attempt) {
    MassSpec m;
    m.ry = g.height * detail::uniform(rng, cfg.min_radius, cfg.max_radius);
    m.rx = m.ry * detail::uniform(rng, 0.75, 1.0);
    m.cx = detail::uniform(rng, 0.0, g.width);
    m.cy = detail::uniform(rng, 0.0, g.height);
    m.contrast = detail::uniform(rng, cfg.min_contrast, cfg.max_contrast);
    bool ok = true;
    for (const auto& o : masses) {
      if (std::hypot(m.cx - o.cx, m.cy - o.cy) < 2.2 * (std::max(m.ry, m.rx) + std::max(o.ry, o.rx))) ok = false;
    }
    constexpr int kSamples = 32;
    for (int k = 0; ok && k < kSamples; ++k) {
      const double t = 2.0 * M_PI * k / kSamples;
      for (double scale : {1.0, 2.1}) {
        const int c = static_cast<int>(std::floor(m.cx + scale * m.rx * std::cos(t)));
        const int r = static_cast<int>(std::floor(m.cy + scale * m.ry * std::sin(t)));
        if (!g.in_tissue(r, c)) ok = false;
      }
    }
    if (ok && !g.in_tissue(static_cast<int>(m.cy), static_cast<int>(m.cx))) ok = false;
    if (ok) masses.push_back(m);
  }
  return masses;
}

/// Deterministic corpus: categories in A..D order, normals before mass-bearing
/// phantoms, views alternating CC/MLO and laterality alternating per pair.
inline Manifest generate_corpus(const CorpusConfig& cfg) {
  Manifest m;
  m.provenance = {{"generator", "phantom"}, {"config", corpus_config_to_json(cfg)}};
  std::uint64_t index = 0;
  for (auto cat : kAllCategories) {
    const auto& counts = cfg.counts[static_cast<int>(cat)];
    const auto [lo, hi] = density_range(cat);
    for (int k = 0; k < counts.normal + counts.with_masses; ++k, ++index) {
      std::mt19937_64 rng(mix_seed(cfg.seed, index));
      PhantomSpec spec;
      spec.seed = rng();
      spec.view = index % 2 == 0 ? View::CC : View::MLO;
      spec.laterality = (index / 2) % 2 == 0 ? Laterality::L : Laterality::R;
      spec.density = detail::uniform(rng, lo, hi);
      spec.height = cfg.height;
      spec.width = cfg.width;
      spec.dataset_tag = cfg.dataset_tag;
      spec.id = cfg.id_prefix + "-" + to_string(cat) + "-" + std::to_string(index);
      if (k >= counts.normal) {
        const int n = std::uniform_int_distribution<int>(cfg.min_masses, cfg.max_masses)(rng);
        spec.masses = place_masses(phantom_geometry(spec), rng, std::max(1, n), cfg);
        if (spec.masses.empty()) throw Error("could not place a mass in phantom " + spec.id);
      }
      m.records.push_back(generate_phantom(spec));
    }
  }
  return m;
}

}  // namespace densesynth::phantom
