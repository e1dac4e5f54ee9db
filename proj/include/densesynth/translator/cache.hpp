#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "densesynth/augment/augment.hpp"
#include "densesynth/core/hash.hpp"
#include "densesynth/core/image.hpp"
#include "densesynth/translator/cyclegan.hpp"
#include "densesynth/translator/registry.hpp"

namespace densesynth::translator {

/// Trains every registry entry on its healthy A/D domains, writes checkpoints
/// under `dir` and the index to `dir/index.json`. Each entry's seed is derived
/// from the base seed and the key.
inline Registry train_registry(const Manifest& corpus, Registry registry, const TranslatorConfig& base,
                               const std::filesystem::path& dir,
                               const std::function<void(const std::string&, const TrainStep&)>& on_step = {}) {
  for (auto& e : registry.entries) {
    auto [low, high] = training_domains(corpus, e);
    if (low.empty() || high.empty())
      throw InvalidInput("registry entry " + e.key + " has no healthy " + (low.empty() ? "A" : "D") + " images");
    TranslatorConfig cfg = base;
    cfg.seed = mix_seed(base.seed, fnv1a64(e.key));
    auto result = train_cyclegan(low, high, cfg, e.key, [&](const TrainStep& s) {
      if (on_step) on_step(e.key, s);
    });
    e.n_source = static_cast<int>(low.size());
    e.n_target = static_cast<int>(high.size());
    save_checkpoint(result.model, dir / e.checkpoint);
    result.log.write_csv(dir / ("logs/" + e.key + ".csv"));
  }
  save_registry(registry, dir / "index.json");
  return registry;
}

inline std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex64(fnv1a64(bytes));
}

/// Registry-backed synthetic source. Translations are stored as 16-bit PNGs
/// keyed by (source id, model key, checkpoint content), so repeated builds and
/// every detector seed see identical synthetic images.
class TranslationCache : public augment::SyntheticSource {
 public:
  TranslationCache(Registry registry, std::filesystem::path registry_dir, std::filesystem::path cache_dir)
      : registry_(std::move(registry)), registry_dir_(std::move(registry_dir)), cache_dir_(std::move(cache_dir)) {
    std::filesystem::create_directories(cache_dir_);
  }

  static TranslationCache open(const std::filesystem::path& index, const std::filesystem::path& cache_dir) {
    return TranslationCache(load_registry(index), index.parent_path(), cache_dir);
  }

  [[nodiscard]] std::vector<std::string> families() const override { return registry_.families(); }

  [[nodiscard]] std::optional<std::string> model_for(std::string_view family, View view) const override {
    try {
      return registry_.model_for(family, view).key;
    } catch (const InvalidInput&) {
      return std::nullopt;
    }
  }

  MammogramRecord synthesize(const MammogramRecord& real, const std::string& key) override {
    const auto path = cache_dir_ / (cache_key(real.id, key) + ".png");
    if (std::filesystem::exists(path)) {
      ++hits_;
      Image image = read_png(path);
      image.bit_depth = real.image.bit_depth;
      if (image.height != real.image.height || image.width != real.image.width)
        throw Error("cached translation " + path.string() + " does not match source dims");
      return synthetic_record(real, key, std::move(image));
    }
    ++misses_;
    auto out = translate(model(key), real);
    const auto tmp = path.string() + ".tmp";
    write_png(out.image, tmp, 16);
    std::filesystem::rename(tmp, path);
    return out;
  }

  [[nodiscard]] std::string cache_key(const std::string& source_id, const std::string& key) {
    return hex64(fnv1a64(source_id + '\0' + key + '\0' + checkpoint_hash(key)));
  }

  [[nodiscard]] const Registry& registry() const { return registry_; }
  [[nodiscard]] std::size_t hits() const { return hits_; }
  [[nodiscard]] std::size_t misses() const { return misses_; }

 private:
  const RegistryEntry& entry(const std::string& key) const {
    const auto* e = registry_.find(key);
    if (!e) throw InvalidInput("registry has no model " + key);
    return *e;
  }

  const std::string& checkpoint_hash(const std::string& key) {
    auto it = checkpoint_hashes_.find(key);
    if (it == checkpoint_hashes_.end())
      it = checkpoint_hashes_.emplace(key, file_hash(registry_dir_ / entry(key).checkpoint)).first;
    return it->second;
  }

  const TranslatorModel& model(const std::string& key) {
    auto it = models_.find(key);
    if (it == models_.end())
      it = models_.emplace(key, std::make_unique<TranslatorModel>(load_checkpoint(registry_dir_ / entry(key).checkpoint)))
               .first;
    return *it->second;
  }

  Registry registry_;
  std::filesystem::path registry_dir_;
  std::filesystem::path cache_dir_;
  std::map<std::string, std::string> checkpoint_hashes_;
  std::map<std::string, std::unique_ptr<TranslatorModel>> models_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

}  // namespace densesynth::translator
