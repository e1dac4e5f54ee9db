// densesynth: command-line entry point for every pipeline stage.
// Exit codes: 0 ok, 1 stage failure, 2 usage error.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "densesynth/augment/augment.hpp"
#include "densesynth/core/ingest.hpp"
#include "densesynth/core/stratify.hpp"
#include "densesynth/detection/reference.hpp"
#include "densesynth/eval/embed.hpp"
#include "densesynth/eval/experiment.hpp"
#include "densesynth/eval/fid.hpp"
#include "densesynth/eval/froc.hpp"
#include "densesynth/eval/plot.hpp"
#include "densesynth/eval/report.hpp"
#include "densesynth/phantom/phantom.hpp"
#include "densesynth/pipeline/desk.hpp"
#include "densesynth/study/server.hpp"
#include "densesynth/study/store.hpp"
#include "densesynth/study/study.hpp"
#include "densesynth/translator/cache.hpp"
#include "densesynth/translator/cyclegan.hpp"
#include "densesynth/translator/registry.hpp"

using namespace densesynth;
namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "densesynth 1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flags shared by every subcommand.
struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = "out";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Base random seed");
  cmd->add_option("--config", c.config, "JSON config file; flags override its values")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Output directory");
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

json merged(json base, const json& overlay) {
  base.update(overlay);
  return base;
}

json config_or_empty(const Common& c) { return c.config.empty() ? json::object() : read_json_file(c.config); }

/// Records what a command produced and the configuration that determined it.
class Artifacts {
 public:
  Artifacts(std::string command, const Common& common) : command_(std::move(command)), out_(common.out) {
    fs::create_directories(out_);
  }

  void set_config(json config, std::uint64_t seed) {
    config_ = std::move(config);
    seed_ = seed;
  }
  fs::path path(const std::string& rel) {
    files_.push_back(rel);
    return out_ / rel;
  }
  void add(const std::string& rel) { files_.push_back(rel); }

  void write() const {
    const auto hash = hex64(fnv1a64(config_.dump()));
    const json j = {{"command", command_}, {"tool", kToolVersion}, {"seed", seed_},
                    {"config", config_},   {"config_hash", hash},  {"artifacts", files_}};
    std::ofstream(out_ / "artifacts.json") << j.dump(2) << '\n';
    std::cout << command_ << ": wrote " << files_.size() << " artifact(s) to " << out_.string() << " (config "
              << hash << ")\n";
  }

  [[nodiscard]] const fs::path& out() const { return out_; }

 private:
  std::string command_;
  fs::path out_;
  json config_ = json::object();
  std::uint64_t seed_ = 0;
  std::vector<std::string> files_;
};

std::uint64_t seed_from(const Common& c, const json& cfg, std::uint64_t fallback = 1) {
  if (c.seed) return *c.seed;
  return cfg.value("seed", fallback);
}

/// "A=10" -> (A, 10).
std::pair<DensityCategory, int> parse_count(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw UsageError("expected CATEGORY=N, got " + s);
  try {
    return {parse_category(s.substr(0, eq)), std::stoi(s.substr(eq + 1))};
  } catch (const std::exception&) {
    throw UsageError("expected CATEGORY=N, got " + s);
  }
}

/// "name=path" -> (name, path); a bare path uses its stem as the name.
std::pair<std::string, std::string> parse_named(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) return {fs::path(s).stem().string(), s};
  return {s.substr(0, eq), s.substr(eq + 1)};
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what);
  if (!fs::exists(path)) throw UsageError(std::string(what) + " not found: " + path);
}

// ---- stages -------------------------------------------------------------------

void cmd_ingest(const Common& c, const std::string& manifest, int height, int width) {
  Artifacts a("ingest", c);
  a.set_config({{"manifest", manifest}, {"height", height}, {"width", width}}, 0);
  const auto raw = load_manifest(manifest);
  auto result = ingest(raw, height, width);
  save_manifest(result.manifest, a.path("manifest.json"));
  write_rejects(result.rejects, a.path("rejects.jsonl"));
  std::cout << "ingested " << result.manifest.size() << " record(s), rejected " << result.rejects.size() << "\n";
  a.write();
}

void cmd_phantom_gen(const Common& c, const std::vector<std::string>& normal, const std::vector<std::string>& masses,
                     std::optional<int> height, std::optional<int> width, std::optional<std::string> tag,
                     std::optional<std::string> prefix) {
  Artifacts a("phantom gen", c);
  const json file = config_or_empty(c);
  auto cfg = phantom::corpus_config_from_json(file);
  cfg.seed = seed_from(c, file, cfg.seed);
  if (height) cfg.height = *height;
  if (width) cfg.width = *width;
  if (tag) cfg.dataset_tag = *tag;
  if (prefix) cfg.id_prefix = *prefix;
  for (const auto& s : normal) {
    const auto [cat, n] = parse_count(s);
    cfg.counts[static_cast<int>(cat)].normal = n;
  }
  for (const auto& s : masses) {
    const auto [cat, n] = parse_count(s);
    cfg.counts[static_cast<int>(cat)].with_masses = n;
  }
  a.set_config(phantom::corpus_config_to_json(cfg), cfg.seed);
  const auto m = phantom::generate_corpus(cfg);
  save_manifest(m, a.path("manifest.json"));
  std::cout << "generated " << m.size() << " phantom(s)\n";
  a.write();
}

void cmd_stratify(const Common& c, const std::string& manifest) {
  Artifacts a("stratify", c);
  a.set_config({{"manifest", manifest}}, 0);
  const auto s = stratify(load_manifest(manifest));
  for (auto cat : kAllCategories) {
    const auto name = "bucket_" + to_string(cat) + ".json";
    save_manifest(s[cat], a.path(name));
    std::cout << to_string(cat) << ": " << s[cat].size() << "\n";
  }
  write_rejects(s.rejects, a.path("rejects.jsonl"));
  a.write();
}

void cmd_train_translator(const Common& c, const std::string& manifest, bool desk, std::optional<int> max_steps,
                          int small_threshold) {
  Artifacts a("train-translator", c);
  const json file = config_or_empty(c);
  auto cfg = desk ? pipeline::DeskExperimentConfig::desk_translator() : translator::TranslatorConfig{};
  cfg = translator::translator_config_from_json(merged(translator::translator_config_to_json(cfg), file));
  cfg.seed = seed_from(c, file, cfg.seed);
  if (max_steps) cfg.max_steps = *max_steps;
  cfg.validate();
  a.set_config({{"manifest", manifest}, {"translator", translator::translator_config_to_json(cfg)},
                {"small_threshold", small_threshold}},
               cfg.seed);
  const auto corpus = load_manifest(manifest);
  auto registry = translator::build_registry(translator::summarize_datasets(corpus), small_threshold);
  if (registry.entries.empty()) throw InvalidInput("no dataset has healthy BI-RADS A and D images");
  registry = translator::train_registry(corpus, registry, cfg, a.out(), [](const std::string& key, const auto& s) {
    if (s.step % 50 == 0) std::cout << key << " step " << s.step << " cycle " << s.cycle << std::endl;
  });
  a.add("index.json");
  for (const auto& e : registry.entries) {
    a.add(e.checkpoint);
    a.add("logs/" + e.key + ".csv");
  }
  a.write();
}

void cmd_translate(const Common& c, const std::string& registry_path, const std::string& manifest,
                   const std::string& family, const std::string& cache_dir) {
  Artifacts a("translate", c);
  a.set_config({{"registry", registry_path}, {"manifest", manifest}, {"family", family}}, 0);
  auto cache = translator::TranslationCache::open(registry_path, cache_dir.empty() ? a.out() / "cache" : fs::path(cache_dir));
  const auto input = load_manifest(manifest);
  Manifest out;
  out.split = input.split;
  out.provenance = {{"translated_from", manifest}, {"family", family}};
  for (const auto& r : input.records) {
    const auto key = cache.model_for(family, r.view);
    if (!key) throw InvalidInput("no translator for family " + family + " view " + to_string(r.view));
    out.records.push_back(cache.synthesize(r, *key));
  }
  save_manifest(out, a.path("manifest.json"));
  std::cout << "translated " << out.size() << " record(s) (" << cache.hits() << " cached)\n";
  a.write();
}

void cmd_build_augset(const Common& c, const std::string& manifest, const std::string& registry_path,
                      const std::string& cache_dir, std::optional<std::string> strategy,
                      std::optional<std::string> family, bool no_real_d, std::optional<double> fraction) {
  Artifacts a("build-augset", c);
  json plan_json = c.config.empty() ? json{{"strategy", "BASELINE"}} : read_json_file(c.config);
  if (strategy) plan_json["strategy"] = *strategy;
  if (family) plan_json["family"] = *family;
  if (no_real_d) plan_json["include_real_D"] = false;
  if (fraction) plan_json["real_D_train_fraction"] = *fraction;
  if (c.seed) plan_json["seed"] = *c.seed;
  if (!plan_json.contains("strategy")) throw UsageError("plan needs a strategy");
  const auto plan = augment::plan_from_json(plan_json);
  a.set_config({{"manifest", manifest}, {"registry", registry_path}, {"plan", augment::plan_to_json(plan)}},
               plan.seed);
  std::optional<translator::TranslationCache> cache;
  if (plan.strategy != augment::Strategy::BASELINE) {
    if (registry_path.empty()) throw UsageError("augmentation plan " + plan.name() + " needs --registry");
    require_file(registry_path, "registry index");
    cache.emplace(translator::TranslationCache::open(registry_path,
                                                     cache_dir.empty() ? a.out() / "cache" : fs::path(cache_dir)));
  }
  const auto set = augment::build_augmented_set(load_manifest(manifest), cache ? &*cache : nullptr, plan);
  save_manifest(set.train, a.path("train.json"));
  save_manifest(set.reserved_d, a.path("reserved_d.json"));
  std::cout << set.train.provenance.value("name", "") << ": " << set.n_real << " real + " << set.n_synthetic
            << " synthetic; " << set.reserved_d.size() << " real D reserved\n";
  a.write();
}

void cmd_train_detector(const Common& c, const std::string& manifest, std::optional<int> epochs) {
  Artifacts a("train-detector", c);
  const json file = config_or_empty(c);
  auto cfg = detection::detector_config_from_json(file);
  if (epochs) cfg.epochs = *epochs;
  const auto seed = seed_from(c, file);
  a.set_config({{"manifest", manifest}, {"detector", detection::detector_config_to_json(cfg)}}, seed);
  detection::ReferenceBackend backend(cfg);
  auto model = detection::train_detector(backend, load_manifest(manifest), seed, cfg.epochs);
  model->save(a.path("detector.pt"));
  a.write();
}

void cmd_predict(const Common& c, const std::string& model_path, const std::string& manifest) {
  Artifacts a("predict", c);
  a.set_config({{"model", model_path}, {"manifest", manifest}}, 0);
  detection::ReferenceBackend backend;
  auto model = backend.load(model_path);
  write_predictions(detection::predict_all(*model, load_manifest(manifest)), a.path("predictions.jsonl"));
  a.write();
}

void cmd_eval_froc(const Common& c, const std::string& predictions, const std::string& manifest, double iou) {
  Artifacts a("eval froc", c);
  a.set_config({{"predictions", predictions}, {"manifest", manifest}, {"iou", iou}}, 0);
  const auto truth = eval::ground_truth_from(load_manifest(manifest, false));
  const auto froc = eval::froc_curve(read_predictions(predictions), truth, iou);
  eval::write_curve_csv(froc, a.path("froc_curve.csv"));
  const json summary = {{"auc_percent", froc.auc_percent},
                        {"sensitivity_at_fppi_1", eval::sensitivity_at(froc, 1.0)},
                        {"n_images", froc.n_images},
                        {"n_lesions", froc.n_lesions}};
  std::ofstream(a.path("froc.json")) << summary.dump(2) << '\n';
  std::cout << "FROC AUC " << eval::format_fixed(froc.auc_percent) << "%\n";
  a.write();
}

void cmd_eval_fid(const Common& c, const std::string& low, const std::string& high,
                  const std::vector<std::string>& synthetic, const std::string& dataset, const std::string& view,
                  int splits) {
  Artifacts a("eval fid", c);
  const json file = config_or_empty(c);
  const auto seed = seed_from(c, file);
  a.set_config({{"real_low", low}, {"real_high", high}, {"synthetic", synthetic}, {"dataset", dataset},
                {"view", view}, {"splits", splits}},
               seed);
  const eval::ReferenceEmbedder embedder;
  auto embed_cached = [&](const std::string& path, eval::EmbeddingSource src, const std::string& name) {
    auto set = eval::embed(load_manifest(path), embedder, std::move(src));
    eval::write_embeddings(set, a.path("embeddings/" + name + ".bin"));
    a.add("embeddings/" + name + ".bin.json");
    return set;
  };
  const auto low_set = embed_cached(low, {dataset, "A", false, ""}, "real_low");
  auto high_set = embed_cached(high, {dataset, view, false, ""}, "real_high");
  std::vector<eval::NamedEmbeddings> syn;
  for (const auto& s : synthetic) {
    const auto [name, path] = parse_named(s);
    require_file(path, "synthetic manifest");
    const auto m = load_manifest(path, false);
    std::string key = name;
    if (!m.empty() && m.records[0].provenance) key = m.records[0].provenance->model_key;
    syn.push_back({name, key, embed_cached(path, {dataset, view, true, key}, "synthetic_" + name)});
  }
  const auto result = eval::fid_bounds_protocol(low_set, high_set, syn, seed, splits);
  std::ofstream(a.path("fid.csv")) << eval::emit_fid_csv({result});
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  a.write();
}

void cmd_report(const Common& c, const std::string& experiment) {
  Artifacts a("report", c);
  const json exp = read_json_file(experiment);
  a.set_config(exp, 0);
  const fs::path base = fs::path(experiment).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  std::vector<eval::ReportGroup> groups;
  for (const auto& g : exp.at("groups")) {
    const auto truth = eval::ground_truth_from(load_manifest(resolve(g.at("manifest").get<std::string>()), false));
    std::vector<eval::StrategyRuns> runs;
    for (const auto& s : g.at("strategies")) {
      eval::StrategyRuns r{s.at("name").get<std::string>(), {}};
      for (const auto& p : s.at("predictions")) r.per_seed.push_back(read_predictions(resolve(p.get<std::string>())));
      runs.push_back(std::move(r));
    }
    groups.push_back(eval::evaluate_group(g.at("test_set").get<std::string>(), g.value("scenario", ""), runs, truth,
                                          g.value("iou", eval::kDefaultIouThreshold)));
  }
  std::ofstream(a.path("report.csv"), std::ios::binary) << eval::emit_report_csv(groups);
  std::ofstream(a.path("report.md"), std::ios::binary) << eval::emit_report_markdown(groups);
  a.write();
}

void cmd_plot_froc(const Common& c, const std::string& manifest, const std::vector<std::string>& curves,
                   const std::string& title, double max_fppi) {
  Artifacts a("plot froc", c);
  a.set_config({{"manifest", manifest}, {"curves", curves}, {"title", title}, {"max_fppi", max_fppi}}, 0);
  const auto truth = eval::ground_truth_from(load_manifest(manifest, false));
  std::vector<eval::PlotCurve> plot;
  for (const auto& s : curves) {
    const auto [name, path] = parse_named(s);
    require_file(path, "predictions");
    const auto froc = eval::froc_curve(read_predictions(path), truth);
    plot.push_back({name + " (" + eval::format_fixed(froc.auc_percent) + "%)", froc.points});
    eval::write_curve_csv(froc, a.path("curve_" + name + ".csv"));
  }
  std::ofstream(a.path("froc.svg")) << eval::plot_froc_svg(plot, title, max_fppi);
  a.write();
}

void cmd_study_build(const Common& c, const std::string& real, const std::string& synthetic) {
  Artifacts a("study build", c);
  const json file = config_or_empty(c);
  auto cfg = study::study_config_from_json(file);
  cfg.seed = seed_from(c, file, cfg.seed);
  a.set_config(study::study_config_to_json(cfg), cfg.seed);
  const auto set = study::build_stimulus_set(load_manifest(real), load_manifest(synthetic), cfg);
  study::save_stimulus_set(set, a.out());
  a.add("study.json");
  a.add("images/");
  std::cout << "study with " << set.stimuli.size() << " stimuli\n";
  a.write();
}

void cmd_study_serve(const std::string& dir, const std::string& host, int port) {
  study::StudyServer server(dir);
  static study::StudyServer* active = nullptr;
  active = &server;
  std::signal(SIGINT, [](int) {
    if (active) active->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (active) active->stop();
  });
  int bound = port;
  if (port == 0) {
    bound = server.bind_any(host);
    if (bound < 0) throw Error("cannot bind " + host);
    std::cout << "listening on http://" << host << ":" << bound << std::endl;
    server.listen_after_bind();
  } else {
    std::cout << "listening on http://" << host << ":" << bound << std::endl;
    if (!server.listen(host, bound)) throw Error("cannot listen on " + host + ":" + std::to_string(bound));
  }
}

void cmd_study_report(const Common& c, const std::string& dir) {
  Artifacts a("study report", c);
  a.set_config({{"study", dir}}, 0);
  const auto set = study::load_stimulus_set(dir);
  const study::ResponseStore store(set, dir);
  std::ofstream(a.path("reader_study.csv"), std::ios::binary)
      << study::emit_study_csv(study::score_study(store.completed_responses(), set));
  a.write();
}

void cmd_desk_experiment(const Common& c, std::optional<int> seeds, std::optional<int> epochs,
                         std::optional<int> steps) {
  Artifacts a("desk-experiment", c);
  const json file = config_or_empty(c);
  pipeline::DeskExperimentConfig cfg;
  cfg.seed = seed_from(c, file, cfg.seed);
  cfg.train_masses = file.value("train_masses", cfg.train_masses);
  cfg.test_masses = file.value("test_masses", cfg.test_masses);
  cfg.translator_normals = file.value("translator_normals", cfg.translator_normals);
  cfg.detector_seeds = seeds.value_or(file.value("detector_seeds", cfg.detector_seeds));
  cfg.detector_epochs = epochs.value_or(file.value("detector_epochs", cfg.detector_epochs));
  if (file.contains("translator"))
    cfg.translator = translator::translator_config_from_json(
        merged(translator::translator_config_to_json(cfg.translator), file["translator"]));
  if (steps) cfg.translator.max_steps = *steps;
  if (file.contains("detector")) cfg.detector = detection::detector_config_from_json(file["detector"]);
  a.set_config({{"seed", cfg.seed},
                {"train_masses", cfg.train_masses},
                {"test_masses", cfg.test_masses},
                {"translator_normals", cfg.translator_normals},
                {"detector_seeds", cfg.detector_seeds},
                {"detector_epochs", cfg.detector_epochs},
                {"translator", translator::translator_config_to_json(cfg.translator)},
                {"detector", detection::detector_config_to_json(cfg.detector)}},
               cfg.seed);
  const auto r = pipeline::run_desk_experiment(cfg, a.out(), [](const std::string& s) { std::cout << s << std::endl; });
  a.add("report.csv");
  a.add("report.md");
  a.add("translators/index.json");
  std::cout << r.markdown;
  a.write();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Density-aware synthetic mammogram pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  Common common;
  std::function<void()> run;

  std::string manifest, registry, cache_dir, model, predictions, experiment, real, synthetic, dir;
  int height = kTargetHeight, width = kTargetWidth;

  {
    auto* cmd = app.add_subcommand("ingest", "Crop and resize raw records into a normalized manifest");
    add_common(cmd, common);
    cmd->add_option("--manifest", manifest, "Raw manifest")->required()->check(CLI::ExistingFile);
    cmd->add_option("--height", height, "Target height");
    cmd->add_option("--width", width, "Target width");
    cmd->callback([&] { run = [&] { cmd_ingest(common, manifest, height, width); }; });
  }

  static std::vector<std::string> normal, masses;
  static std::optional<int> ph_height, ph_width;
  static std::optional<std::string> tag, prefix;
  {
    auto* ph = app.add_subcommand("phantom", "Procedural phantom corpora");
    ph->require_subcommand(1);
    auto* cmd = ph->add_subcommand("gen", "Generate a phantom corpus");
    add_common(cmd, common);
    cmd->add_option("--normal", normal, "Healthy phantoms per category, e.g. A=100");
    cmd->add_option("--masses", masses, "Mass phantoms per category, e.g. B=30");
    cmd->add_option("--height", ph_height, "Canvas height");
    cmd->add_option("--width", ph_width, "Canvas width");
    cmd->add_option("--tag", tag, "Dataset tag");
    cmd->add_option("--prefix", prefix, "Record id prefix");
    cmd->callback([&] {
      run = [&] { cmd_phantom_gen(common, normal, masses, ph_height, ph_width, tag, prefix); };
    });
  }
  {
    auto* cmd = app.add_subcommand("stratify", "Split a manifest into BI-RADS buckets");
    add_common(cmd, common);
    cmd->add_option("--manifest", manifest, "Input manifest")->required()->check(CLI::ExistingFile);
    cmd->callback([&] { run = [&] { cmd_stratify(common, manifest); }; });
  }

  static bool desk = false;
  static std::optional<int> max_steps;
  static int small_threshold = translator::kSmallDatasetThreshold;
  {
    auto* cmd = app.add_subcommand("train-translator", "Train the translator registry on healthy A and D images");
    add_common(cmd, common);
    cmd->add_option("--manifest", manifest, "Corpus manifest")->required()->check(CLI::ExistingFile);
    cmd->add_flag("--desk", desk, "Start from the desk-scale network sizes");
    cmd->add_option("--max-steps", max_steps, "Stop after this many optimization steps");
    cmd->add_option("--small-threshold", small_threshold, "Healthy-image count below which views are pooled");
    cmd->callback([&] { run = [&] { cmd_train_translator(common, manifest, desk, max_steps, small_threshold); }; });
  }

  static std::string family;
  {
    auto* cmd = app.add_subcommand("translate", "Translate records to high density with a registry model");
    add_common(cmd, common);
    cmd->add_option("--registry", registry, "Registry index.json")->required()->check(CLI::ExistingFile);
    cmd->add_option("--manifest", manifest, "Records to translate")->required()->check(CLI::ExistingFile);
    cmd->add_option("--family", family, "Model family, e.g. OP")->required();
    cmd->add_option("--cache", cache_dir, "Translation cache directory");
    cmd->callback([&] { run = [&] { cmd_translate(common, registry, manifest, family, cache_dir); }; });
  }

  static std::optional<std::string> strategy, plan_family;
  static bool no_real_d = false;
  static std::optional<double> fraction;
  {
    auto* cmd = app.add_subcommand("build-augset", "Build a detection training set from an augmentation plan");
    add_common(cmd, common);
    cmd->add_option("--manifest", manifest, "Real training manifest")->required()->check(CLI::ExistingFile);
    cmd->add_option("--registry", registry, "Registry index.json");
    cmd->add_option("--cache", cache_dir, "Translation cache directory");
    cmd->add_option("--strategy", strategy, "BASELINE, SINGLE_SOURCE or COMBINED_ALL");
    cmd->add_option("--family", plan_family, "Model family for SINGLE_SOURCE");
    cmd->add_flag("--no-real-d", no_real_d, "Exclude every real BI-RADS D record");
    cmd->add_option("--real-d-fraction", fraction, "Fraction of real D records used for training");
    cmd->callback([&] {
      run = [&] {
        cmd_build_augset(common, manifest, registry, cache_dir, strategy, plan_family, no_real_d, fraction);
      };
    });
  }

  static std::optional<int> epochs;
  {
    auto* cmd = app.add_subcommand("train-detector", "Train the reference mass detector");
    add_common(cmd, common);
    cmd->add_option("--manifest", manifest, "Training manifest")->required()->check(CLI::ExistingFile);
    cmd->add_option("--epochs", epochs, "Training epochs");
    cmd->callback([&] { run = [&] { cmd_train_detector(common, manifest, epochs); }; });
  }
  {
    auto* cmd = app.add_subcommand("predict", "Run a trained detector over a manifest");
    add_common(cmd, common);
    cmd->add_option("--model", model, "Detector checkpoint")->required()->check(CLI::ExistingFile);
    cmd->add_option("--manifest", manifest, "Test manifest")->required()->check(CLI::ExistingFile);
    cmd->callback([&] { run = [&] { cmd_predict(common, model, manifest); }; });
  }

  static double iou = eval::kDefaultIouThreshold;
  static std::string low, high, dataset = "PHANTOM", view = "CC";
  static std::vector<std::string> synthetic_sets;
  static int splits = 1;
  {
    auto* ev = app.add_subcommand("eval", "Evaluation");
    ev->require_subcommand(1);
    auto* froc = ev->add_subcommand("froc", "FROC curve and AUC of a prediction file");
    add_common(froc, common);
    froc->add_option("--predictions", predictions, "Predictions JSONL")->required()->check(CLI::ExistingFile);
    froc->add_option("--manifest", manifest, "Ground-truth manifest")->required()->check(CLI::ExistingFile);
    froc->add_option("--iou", iou, "IoU threshold for a true positive");
    froc->callback([&] { run = [&] { cmd_eval_froc(common, predictions, manifest, iou); }; });

    auto* fidc = ev->add_subcommand("fid", "FID bounds protocol");
    add_common(fidc, common);
    fidc->add_option("--real-low", low, "Real low-density manifest")->required()->check(CLI::ExistingFile);
    fidc->add_option("--real-high", high, "Real high-density manifest")->required()->check(CLI::ExistingFile);
    fidc->add_option("--synthetic", synthetic_sets, "Synthetic manifest, optionally name=path");
    fidc->add_option("--dataset", dataset, "Dataset label");
    fidc->add_option("--view", view, "View label");
    fidc->add_option("--splits", splits, "Number of random real-D splits to average");
    fidc->callback([&] {
      run = [&] { cmd_eval_fid(common, low, high, synthetic_sets, dataset, view, splits); };
    });
  }
  {
    auto* cmd = app.add_subcommand("report", "Strategy report with DeLong tests from cached predictions");
    add_common(cmd, common);
    cmd->add_option("--experiment", experiment, "Experiment JSON")->required()->check(CLI::ExistingFile);
    cmd->callback([&] { run = [&] { cmd_report(common, experiment); }; });
  }

  static std::vector<std::string> curves;
  static std::string title = "FROC";
  static double max_fppi = 1.0;
  {
    auto* pl = app.add_subcommand("plot", "Charts");
    pl->require_subcommand(1);
    auto* cmd = pl->add_subcommand("froc", "Render FROC curves to SVG");
    add_common(cmd, common);
    cmd->add_option("--manifest", manifest, "Ground-truth manifest")->required()->check(CLI::ExistingFile);
    cmd->add_option("--curve", curves, "name=predictions.jsonl")->required();
    cmd->add_option("--title", title, "Chart title");
    cmd->add_option("--max-fppi", max_fppi, "FPPI axis limit");
    cmd->callback([&] { run = [&] { cmd_plot_froc(common, manifest, curves, title, max_fppi); }; });
  }

  static std::string host = "127.0.0.1";
  static int port = 8080;
  {
    auto* st = app.add_subcommand("study", "Reader study");
    st->require_subcommand(1);
    auto* build = st->add_subcommand("build", "Assemble a blinded stimulus set");
    add_common(build, common);
    build->add_option("--real", real, "Real image pool")->required()->check(CLI::ExistingFile);
    build->add_option("--synthetic", synthetic, "Synthetic image pool")->required()->check(CLI::ExistingFile);
    build->callback([&] { run = [&] { cmd_study_build(common, real, synthetic); }; });

    auto* serve = st->add_subcommand("serve", "Serve the study over HTTP");
    serve->add_option("--dir", dir, "Study directory")->required()->check(CLI::ExistingDirectory);
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port (0 picks a free one)");
    serve->callback([&] { run = [&] { cmd_study_serve(dir, host, port); }; });

    auto* rep = st->add_subcommand("report", "Per-reader ROC AUC table from completed sessions");
    add_common(rep, common);
    rep->add_option("--dir", dir, "Study directory")->required()->check(CLI::ExistingDirectory);
    rep->callback([&] { run = [&] { cmd_study_report(common, dir); }; });
  }

  static std::optional<int> desk_seeds, desk_epochs, desk_steps;
  {
    auto* cmd = app.add_subcommand("desk-experiment", "Phantom low-data experiment, baseline vs synthetic-D augmentation");
    add_common(cmd, common);
    cmd->add_option("--detector-seeds", desk_seeds, "Detector training seeds");
    cmd->add_option("--detector-epochs", desk_epochs, "Detector epochs");
    cmd->add_option("--translator-steps", desk_steps, "Translator optimization steps");
    cmd->callback([&] { run = [&] { cmd_desk_experiment(common, desk_seeds, desk_epochs, desk_steps); }; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    run();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
