#pragma once

#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "densesynth/core/error.hpp"
#include "densesynth/core/image.hpp"

namespace densesynth {

enum class View { CC, MLO };
enum class Laterality { L, R };
enum class Health { NORMAL, WITH_MASSES };
enum class DensityKind { VOLPARA_VBD_PERCENT, LIBRA_PERCENT, ACR_CLASS, BIRADS_DIRECT };
enum class DensityCategory { A = 0, B = 1, C = 2, D = 3 };
enum class Split { TRAIN, VAL, TEST };

inline constexpr DensityCategory kAllCategories[] = {DensityCategory::A, DensityCategory::B,
                                                     DensityCategory::C, DensityCategory::D};

/// Axis-aligned box in pixel units; (x, y) is the top-left corner.
struct MassBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  [[nodiscard]] double area() const noexcept { return w * h; }
  [[nodiscard]] double right() const noexcept { return x + w; }
  [[nodiscard]] double bottom() const noexcept { return y + h; }
  bool operator==(const MassBox&) const = default;
};

struct DensityMeasure {
  DensityKind kind = DensityKind::LIBRA_PERCENT;
  /// Percent for the VBD/LIBRA kinds, 1..4 for ACR and for direct BI-RADS (A..D).
  double value = 0.0;
  bool operator==(const DensityMeasure&) const = default;
};

/// Where a synthetic record came from.
struct Provenance {
  std::string source_id;
  std::string model_key;
  bool operator==(const Provenance&) const = default;
};

struct MammogramRecord {
  std::string id;
  std::string dataset_tag;
  View view = View::CC;
  Laterality laterality = Laterality::L;
  Image image;
  /// Path relative to the owning manifest; empty until serialized.
  std::string image_path;
  std::optional<DensityMeasure> density;
  Health health = Health::NORMAL;
  std::vector<MassBox> annotations;
  std::optional<Provenance> provenance;

  [[nodiscard]] bool is_synthetic() const noexcept { return provenance.has_value(); }
};

// ---- string conversions -----------------------------------------------------

inline std::string to_string(View v) { return v == View::CC ? "CC" : "MLO"; }
inline std::string to_string(Laterality l) { return l == Laterality::L ? "L" : "R"; }
inline std::string to_string(Health h) { return h == Health::NORMAL ? "NORMAL" : "WITH_MASSES"; }
inline std::string to_string(DensityCategory c) {
  return std::string(1, static_cast<char>('A' + static_cast<int>(c)));
}
inline std::string to_string(Split s) {
  switch (s) {
    case Split::TRAIN: return "TRAIN";
    case Split::VAL: return "VAL";
    case Split::TEST: return "TEST";
  }
  return "TRAIN";
}
inline std::string to_string(DensityKind k) {
  switch (k) {
    case DensityKind::VOLPARA_VBD_PERCENT: return "VOLPARA_VBD_PERCENT";
    case DensityKind::LIBRA_PERCENT: return "LIBRA_PERCENT";
    case DensityKind::ACR_CLASS: return "ACR_CLASS";
    case DensityKind::BIRADS_DIRECT: return "BIRADS_DIRECT";
  }
  return "LIBRA_PERCENT";
}

inline View parse_view(std::string_view s) {
  if (s == "CC") return View::CC;
  if (s == "MLO") return View::MLO;
  throw InvalidInput("unknown view: " + std::string(s));
}
inline Laterality parse_laterality(std::string_view s) {
  if (s == "L") return Laterality::L;
  if (s == "R") return Laterality::R;
  throw InvalidInput("unknown laterality: " + std::string(s));
}
inline Health parse_health(std::string_view s) {
  if (s == "NORMAL") return Health::NORMAL;
  if (s == "WITH_MASSES") return Health::WITH_MASSES;
  throw InvalidInput("unknown health status: " + std::string(s));
}
inline DensityCategory parse_category(std::string_view s) {
  if (s.size() == 1 && s[0] >= 'A' && s[0] <= 'D') return static_cast<DensityCategory>(s[0] - 'A');
  throw InvalidInput("unknown density category: " + std::string(s));
}
inline Split parse_split(std::string_view s) {
  if (s == "TRAIN") return Split::TRAIN;
  if (s == "VAL") return Split::VAL;
  if (s == "TEST") return Split::TEST;
  throw InvalidInput("unknown split: " + std::string(s));
}
inline DensityKind parse_density_kind(std::string_view s) {
  if (s == "VOLPARA_VBD_PERCENT" || s == "VOLPARA_VBD") return DensityKind::VOLPARA_VBD_PERCENT;
  if (s == "LIBRA_PERCENT") return DensityKind::LIBRA_PERCENT;
  if (s == "ACR_CLASS") return DensityKind::ACR_CLASS;
  if (s == "BIRADS_DIRECT") return DensityKind::BIRADS_DIRECT;
  throw InvalidInput("unknown density kind: " + std::string(s));
}

// ---- dataset families -------------------------------------------------------

/// Two-letter family code of a dataset tag: "OPTIMAM" -> "OP", "BCDR" -> "BC".
inline std::string dataset_family(std::string_view tag) {
  std::string f(tag.substr(0, 2));
  for (char& c : f) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return f;
}

/// Family part of a translator key: "OP-CC" -> "OP", "BC-All" -> "BC".
inline std::string model_family(std::string_view model_key) {
  return std::string(model_key.substr(0, model_key.find('-')));
}

// ---- validation -------------------------------------------------------------

inline void validate_box(const MassBox& b) {
  if (!(std::isfinite(b.x) && std::isfinite(b.y) && std::isfinite(b.w) && std::isfinite(b.h)))
    throw InvalidInput("mass box has non-finite coordinates");
  if (b.w <= 0 || b.h <= 0) throw InvalidInput("mass box extents must be positive");
  if (b.x < 0 || b.y < 0) throw InvalidInput("mass box coordinates must be non-negative");
}

/// Checks the record invariants: health matches annotations and every box fits
/// inside the image (when the image is loaded).
inline void validate_record(const MammogramRecord& r) {
  if (r.id.empty()) throw InvalidInput("record id must not be empty");
  const bool normal = r.health == Health::NORMAL;
  if (normal != r.annotations.empty()) {
    throw InvalidInput("record " + r.id + ": health status " + to_string(r.health) +
                       " disagrees with " + std::to_string(r.annotations.size()) + " annotations");
  }
  for (const auto& b : r.annotations) {
    validate_box(b);
    if (!r.image.empty() && (b.right() > r.image.width + 1e-9 || b.bottom() > r.image.height + 1e-9)) {
      throw InvalidInput("record " + r.id + ": mass box exceeds image bounds");
    }
  }
}

}  // namespace densesynth
