#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "densesynth/augment/augment.hpp"
#include "densesynth/detection/reference.hpp"
#include "densesynth/eval/experiment.hpp"
#include "densesynth/eval/report.hpp"
#include "densesynth/phantom/phantom.hpp"
#include "densesynth/translator/cache.hpp"

namespace densesynth::pipeline {

/// Desk-scale low-data experiment on phantoms: a translator learns A -> D on
/// healthy images, and detectors trained on A-C mass phantoms with and without
/// synthetic D companions are compared on held-out D mass phantoms.
struct DeskExperimentConfig {
  std::uint64_t seed = 2023;
  int height = 256;
  int width = 160;
  int translator_normals = 100;  ///< per domain (A and D)
  int train_masses = 60;         ///< A-C mass phantoms, split evenly over A, B, C
  int test_masses = 120;         ///< D mass phantoms
  int detector_seeds = 5;
  int detector_epochs = 20;
  translator::TranslatorConfig translator = desk_translator();
  detection::ReferenceDetectorConfig detector;

  static translator::TranslatorConfig desk_translator() {
    translator::TranslatorConfig c;
    c.height = 256;
    c.width = 160;
    c.ngf = 8;
    c.ndf = 16;
    c.n_blocks = 6;
    c.max_steps = 200;
    c.lambda_identity = 0.5;
    return c;
  }
};

struct DeskExperimentResult {
  eval::ReportGroup group;
  std::string csv;
  std::string markdown;
  double translator_seconds = 0.0;
  double detector_seconds = 0.0;
  std::size_t n_train_baseline = 0;
  std::size_t n_train_augmented = 0;
};

inline phantom::CorpusConfig desk_corpus(const DeskExperimentConfig& c, std::uint64_t salt, const std::string& prefix) {
  phantom::CorpusConfig p;
  p.seed = mix_seed(c.seed, salt);
  p.height = c.height;
  p.width = c.width;
  p.id_prefix = prefix;
  return p;
}

/// Runs the experiment under `dir` (checkpoints, translation cache, predictions, report).
inline DeskExperimentResult run_desk_experiment(const DeskExperimentConfig& c, const std::filesystem::path& dir,
                                                const std::function<void(const std::string&)>& log = {}) {
  namespace fs = std::filesystem;
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  auto normals_cfg = desk_corpus(c, 1, "tr");
  normals_cfg.counts[0].normal = c.translator_normals;
  normals_cfg.counts[3].normal = c.translator_normals;
  auto train_cfg = desk_corpus(c, 2, "det");
  for (int k = 0; k < 3; ++k) train_cfg.counts[k].with_masses = c.train_masses / 3 + (k < c.train_masses % 3);
  auto test_cfg = desk_corpus(c, 3, "test");
  test_cfg.counts[3].with_masses = c.test_masses;
  const auto normals = phantom::generate_corpus(normals_cfg);
  const auto train = phantom::generate_corpus(train_cfg);
  const auto test = phantom::generate_corpus(test_cfg);

  DeskExperimentResult out;
  auto t0 = std::chrono::steady_clock::now();
  auto registry = translator::build_registry(translator::summarize_datasets(normals));
  auto tcfg = c.translator;
  tcfg.seed = mix_seed(c.seed, 4);
  registry = translator::train_registry(normals, registry, tcfg, dir / "translators");
  out.translator_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  say("translator trained in " + eval::format_fixed(out.translator_seconds, 1) + " s");

  translator::TranslationCache cache(registry, dir / "translators", dir / "cache");
  const auto family = registry.families().at(0);
  auto base_plan = augment::AugmentationPlan::baseline(false);
  auto aug_plan = augment::AugmentationPlan::single(family, false);
  base_plan.seed = aug_plan.seed = c.seed;
  const auto base_set = augment::build_augmented_set(train, nullptr, base_plan);
  const auto aug_set = augment::build_augmented_set(train, &cache, aug_plan);
  out.n_train_baseline = base_set.train.size();
  out.n_train_augmented = aug_set.train.size();

  detection::ReferenceBackend backend(c.detector);
  std::vector<eval::StrategyRuns> runs{{base_plan.name(), {}}, {aug_plan.name(), {}}};
  const Manifest* sets[] = {&base_set.train, &aug_set.train};
  t0 = std::chrono::steady_clock::now();
  for (int s = 0; s < c.detector_seeds; ++s) {
    const auto seed = mix_seed(c.seed, 100 + s);
    for (int k = 0; k < 2; ++k) {
      auto model = detection::train_detector(backend, *sets[k], seed, c.detector_epochs);
      auto preds = detection::predict_all(*model, test);
      write_predictions(preds, dir / "predictions" / (runs[k].strategy + "-seed" + std::to_string(s) + ".jsonl"));
      runs[k].per_seed.push_back(std::move(preds));
    }
    say("detector seed " + std::to_string(s) + " done");
  }
  out.detector_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  out.group = eval::evaluate_group("Phantom BI-RADS D", "ONLY_SYNTH_D", runs, eval::ground_truth_from(test));
  out.csv = eval::emit_report_csv({out.group});
  out.markdown = eval::emit_report_markdown({out.group});
  fs::create_directories(dir);
  std::ofstream(dir / "report.csv") << out.csv;
  std::ofstream(dir / "report.md") << out.markdown;
  return out;
}

}  // namespace densesynth::pipeline
