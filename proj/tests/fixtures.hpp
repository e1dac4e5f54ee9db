#pragma once
// Random inputs shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <random>
#include <string>

#include <set>

#include "densesynth/augment/augment.hpp"
#include "densesynth/detection/boxes.hpp"

namespace fixture {

using densesynth::GroundTruthMap;
using densesynth::MassBox;
using densesynth::PredictionMap;
using namespace densesynth;
using densesynth::augment::SyntheticSource;

struct FrocInstance {
  PredictionMap preds;
  GroundTruthMap gt;
};

// <= 5 images, <= 4 boxes each, coarse scores so ties occur.
inline FrocInstance random_froc_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_img(1, 5), n_box(0, 4), coord(0, 40), ext(4, 16), score(1, 8);
  FrocInstance inst;
  const int images = n_img(rng);
  for (int i = 0; i < images; ++i) {
    const std::string id = "img" + std::to_string(i);
    auto& les = inst.gt[id];
    for (int k = n_box(rng); k > 0; --k)
      les.push_back({double(coord(rng)), double(coord(rng)), double(ext(rng)), double(ext(rng))});
    auto& p = inst.preds[id];
    for (int k = n_box(rng); k > 0; --k) {
      MassBox b{double(coord(rng)), double(coord(rng)), double(ext(rng)), double(ext(rng))};
      if (!les.empty() && rng() % 2) {  // jitter a lesion so matches happen
        const auto& l = les[rng() % les.size()];
        b = {l.x + double(coord(rng) % 5) - 2, l.y + double(coord(rng) % 5) - 2, l.w, l.h};
        b.x = std::max(0.0, b.x);
        b.y = std::max(0.0, b.y);
      }
      p.push_back({b, score(rng) / 8.0});
    }
  }
  if (inst.gt.begin()->second.empty()) inst.gt.begin()->second.push_back({1, 1, 8, 8});
  return inst;
}


inline MammogramRecord real_record(const std::string& id, DensityCategory c, View v, bool mass) {
  MammogramRecord r;
  r.id = id;
  r.dataset_tag = "PHANTOM";
  r.view = v;
  r.image = Image(8, 6, 0.25f);
  r.density = DensityMeasure{DensityKind::BIRADS_DIRECT, static_cast<double>(static_cast<int>(c) + 1)};
  if (mass) {
    r.health = Health::WITH_MASSES;
    r.annotations = {{1, 2, 3, 2}};
  }
  return r;
}

/// Augmentation input with `per_cat[c]` records of category c, alternating views.
inline Manifest mixed_corpus(std::array<int, 4> per_cat) {
  Manifest m;
  int k = 0;
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < per_cat[c]; ++i, ++k)
      m.records.push_back(real_record("r" + std::to_string(k), static_cast<DensityCategory>(c),
                                      k % 2 ? View::MLO : View::CC, k % 3 == 0));
  return m;
}

/// Fixed three-family layout: BC pooled over views, CS and OP split by view.
class FakeSource : public SyntheticSource {
 public:
  std::set<std::string> keys{"BC-All", "CS-CC", "CS-MLO", "OP-CC", "OP-MLO"};
  int calls = 0;

  std::vector<std::string> families() const override { return {"BC", "CS", "OP"}; }
  std::optional<std::string> model_for(std::string_view family, View view) const override {
    const std::string f(family);
    if (keys.count(f + "-All")) return f + "-All";
    const auto k = f + "-" + to_string(view);
    if (keys.count(k)) return k;
    return std::nullopt;
  }
  MammogramRecord synthesize(const MammogramRecord& real, const std::string& key) override {
    ++calls;
    MammogramRecord out = real;
    out.id = real.id + "-SYN-" + key;
    for (float& v : out.image.pixels) v += 0.5f;
    out.density = DensityMeasure{DensityKind::BIRADS_DIRECT, 4};
    out.provenance = Provenance{real.id, key};
    return out;
  }
};

inline std::size_t count_real_d(const Manifest& m) {
  return std::count_if(m.records.begin(), m.records.end(), [](const MammogramRecord& r) {
    return !r.is_synthetic() && map_density(*r.density) == DensityCategory::D;
  });
}

}  // namespace fixture
