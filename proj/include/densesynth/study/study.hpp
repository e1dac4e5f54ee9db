#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "densesynth/core/density.hpp"
#include "densesynth/core/error.hpp"
#include "densesynth/core/hash.hpp"
#include "densesynth/core/image.hpp"
#include "densesynth/core/manifest.hpp"

namespace densesynth::study {

enum class Truth { REAL, SYNTHETIC };

inline std::string to_string(Truth t) { return t == Truth::REAL ? "REAL" : "SYNTHETIC"; }
inline Truth parse_truth(std::string_view s) {
  if (s == "REAL") return Truth::REAL;
  if (s == "SYNTHETIC") return Truth::SYNTHETIC;
  throw InvalidInput("unknown truth label: " + std::string(s));
}

/// Which real stimuli a (family, view) cell is scored against.
enum class RealPool {
  ALL_MATCHING_VIEW,   // every real stimulus of that view
  SAME_FAMILY_VIEW,    // only reals from the family's own dataset
};

inline constexpr std::array<double, 6> kChoiceProbabilities{0.05, 0.23, 0.41, 0.59, 0.77, 0.95};

/// Choice 1 = certainly fake ... 6 = certainly real.
inline double choice_to_probability(int choice) {
  if (choice < 1 || choice > 6) throw InvalidInput("choice must be in 1..6, got " + std::to_string(choice));
  return kChoiceProbabilities[choice - 1];
}

struct StudyConfig {
  /// Real stimuli per dataset tag, split evenly between CC and MLO.
  std::map<std::string, int> real_counts{{"OPTIMAM", 30}, {"CSAW", 30}, {"BCDR", 30}};
  /// Synthetic stimuli per model family, split evenly between CC and MLO.
  std::map<std::string, int> synthetic_counts{{"OP", 30}, {"CS", 30}, {"BC", 30}};
  int max_height = 532;
  std::array<std::string, 6> choice_labels{"Certainly fake", "Probably fake", "Possibly fake",
                                           "Possibly real",  "Probably real", "Certainly real"};
  std::uint64_t seed = 1;
  RealPool real_pool = RealPool::ALL_MATCHING_VIEW;

  [[nodiscard]] int real_total() const {
    return std::accumulate(real_counts.begin(), real_counts.end(), 0, [](int a, const auto& kv) { return a + kv.second; });
  }
  [[nodiscard]] int synthetic_total() const {
    return std::accumulate(synthetic_counts.begin(), synthetic_counts.end(), 0,
                           [](int a, const auto& kv) { return a + kv.second; });
  }

  void validate() const {
    if (real_total() != synthetic_total())
      throw InvalidInput("study config: real total " + std::to_string(real_total()) + " != synthetic total " +
                         std::to_string(synthetic_total()));
    for (const auto* counts : {&real_counts, &synthetic_counts})
      for (const auto& [cell, n] : *counts)
        if (n < 0 || n % 2 != 0)
          throw InvalidInput("study config: count for " + cell + " must be even and non-negative for view balance");
    if (max_height < 1) throw InvalidInput("study config: max_height must be positive");
  }
};

inline json study_config_to_json(const StudyConfig& c) {
  return {{"real_counts", c.real_counts},
          {"synthetic_counts", c.synthetic_counts},
          {"max_height", c.max_height},
          {"choice_labels", c.choice_labels},
          {"seed", c.seed},
          {"real_pool", c.real_pool == RealPool::ALL_MATCHING_VIEW ? "all_matching_view" : "same_family_view"}};
}

inline StudyConfig study_config_from_json(const json& j) {
  StudyConfig c;
  if (j.contains("real_counts")) c.real_counts = j["real_counts"].get<std::map<std::string, int>>();
  if (j.contains("synthetic_counts")) c.synthetic_counts = j["synthetic_counts"].get<std::map<std::string, int>>();
  c.max_height = j.value("max_height", c.max_height);
  if (j.contains("choice_labels")) c.choice_labels = j["choice_labels"].get<std::array<std::string, 6>>();
  c.seed = j.value("seed", c.seed);
  const auto pool = j.value("real_pool", std::string("all_matching_view"));
  if (pool == "all_matching_view")
    c.real_pool = RealPool::ALL_MATCHING_VIEW;
  else if (pool == "same_family_view")
    c.real_pool = RealPool::SAME_FAMILY_VIEW;
  else
    throw InvalidInput("unknown real_pool: " + pool);
  c.validate();
  return c;
}

struct Stimulus {
  /// Opaque: carries no hint of truth or source.
  std::string id;
  std::string image_path;
  Truth truth = Truth::REAL;
  std::string dataset;
  std::string model_key;  // synthetic only
  std::string source_id;  // record the stimulus was cut from
  View view = View::CC;
  int height = 0;
  int width = 0;

  /// Family code used for score columns: dataset family for reals,
  /// translator family for synthetics.
  [[nodiscard]] std::string family() const {
    return truth == Truth::REAL ? dataset_family(dataset) : model_family(model_key);
  }
};

inline json stimulus_to_json(const Stimulus& s) {
  return {{"id", s.id},          {"image", s.image_path}, {"truth", to_string(s.truth)},
          {"dataset", s.dataset}, {"model_key", s.model_key}, {"source_id", s.source_id},
          {"view", to_string(s.view)}, {"height", s.height}, {"width", s.width}};
}

inline Stimulus stimulus_from_json(const json& j) {
  return {j.at("id").get<std::string>(),
          j.value("image", ""),
          parse_truth(j.at("truth").get<std::string>()),
          j.value("dataset", ""),
          j.value("model_key", ""),
          j.value("source_id", ""),
          parse_view(j.at("view").get<std::string>()),
          j.value("height", 0),
          j.value("width", 0)};
}

struct StimulusSet {
  StudyConfig config;
  std::vector<Stimulus> stimuli;  // sorted by id
  std::vector<Image> images;      // parallel to stimuli

  [[nodiscard]] const Stimulus* find(std::string_view id) const {
    auto it = std::lower_bound(stimuli.begin(), stimuli.end(), id,
                               [](const Stimulus& s, std::string_view v) { return s.id < v; });
    return it != stimuli.end() && it->id == id ? &*it : nullptr;
  }
};

namespace detail {

inline bool is_high_density(const MammogramRecord& r) {
  return !r.density || map_density(*r.density) == DensityCategory::D;
}

/// Seeded pick of `need` records matching `pred`, reporting the cell on shortage.
template <class Pred>
std::vector<const MammogramRecord*> pick(const Manifest& pool, Pred pred, int need, std::uint64_t seed,
                                         const std::string& cell) {
  std::vector<const MammogramRecord*> c;
  for (const auto& r : pool.records)
    if (pred(r)) c.push_back(&r);
  if (static_cast<int>(c.size()) < need)
    throw InvalidInput("insufficient source images for cell " + cell + ": need " + std::to_string(need) + ", have " +
                       std::to_string(c.size()));
  std::sort(c.begin(), c.end(), [](auto* a, auto* b) { return a->id < b->id; });
  std::mt19937_64 rng(mix_seed(seed, fnv1a64(cell)));
  std::shuffle(c.begin(), c.end(), rng);
  c.resize(static_cast<std::size_t>(need));
  return c;
}

}  // namespace detail

/// Draws the stimulus composition from the real and synthetic pools. Reals
/// must be high density (records without a measurement are accepted);
/// synthetics are grouped by the family of their translator key. Every image
/// is downsized to at most `max_height` rows.
inline StimulusSet build_stimulus_set(const Manifest& real_pool, const Manifest& synthetic_pool,
                                      const StudyConfig& config) {
  config.validate();
  StimulusSet out;
  out.config = config;
  struct Pick {
    const MammogramRecord* record;
    Truth truth;
  };
  std::vector<Pick> picks;
  for (const auto& [dataset, n] : config.real_counts) {
    for (View v : {View::CC, View::MLO}) {
      auto got = detail::pick(
          real_pool,
          [&](const MammogramRecord& r) {
            return !r.is_synthetic() && r.dataset_tag == dataset && r.view == v && detail::is_high_density(r);
          },
          n / 2, config.seed, "real/" + dataset + "/" + to_string(v));
      for (auto* r : got) picks.push_back({r, Truth::REAL});
    }
  }
  for (const auto& [family, n] : config.synthetic_counts) {
    for (View v : {View::CC, View::MLO}) {
      auto got = detail::pick(
          synthetic_pool,
          [&](const MammogramRecord& r) {
            return r.is_synthetic() && model_family(r.provenance->model_key) == family && r.view == v;
          },
          n / 2, config.seed, "synthetic/" + family + "/" + to_string(v));
      for (auto* r : got) picks.push_back({r, Truth::SYNTHETIC});
    }
  }

  std::set<std::string> seen;
  for (const auto& p : picks) {
    const auto& r = *p.record;
    if (r.image.empty()) throw InvalidInput("stimulus source " + r.id + " has no pixels loaded");
    Stimulus s;
    s.id = "s" + hex64(mix_seed(config.seed, fnv1a64(r.id))).substr(0, 12);
    if (!seen.insert(s.id).second) throw InvalidInput("stimulus source " + r.id + " selected twice");
    s.truth = p.truth;
    s.dataset = r.dataset_tag;
    s.model_key = r.provenance ? r.provenance->model_key : "";
    s.source_id = r.id;
    s.view = r.view;
    s.image_path = "images/" + s.id + ".png";
    Image img = downsize_to_height(r.image, config.max_height);
    s.height = img.height;
    s.width = img.width;
    out.stimuli.push_back(std::move(s));
    out.images.push_back(std::move(img));
  }
  std::vector<std::size_t> order(out.stimuli.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return out.stimuli[a].id < out.stimuli[b].id; });
  StimulusSet sorted{out.config, {}, {}};
  for (auto i : order) {
    sorted.stimuli.push_back(std::move(out.stimuli[i]));
    sorted.images.push_back(std::move(out.images[i]));
  }
  return sorted;
}

/// Writes `study.json` (config + stimuli with truth, server side only) and the images.
inline void save_stimulus_set(const StimulusSet& set, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  json stimuli = json::array();
  for (std::size_t i = 0; i < set.stimuli.size(); ++i) {
    if (i < set.images.size() && !set.images[i].empty()) write_png(set.images[i], dir / set.stimuli[i].image_path, 16);
    stimuli.push_back(stimulus_to_json(set.stimuli[i]));
  }
  std::ofstream out(dir / "study.json");
  if (!out) throw Error("cannot write " + (dir / "study.json").string());
  out << json{{"config", study_config_to_json(set.config)}, {"stimuli", stimuli}}.dump(2) << '\n';
}

/// Loads metadata only; images stay on disk and are served from there.
inline StimulusSet load_stimulus_set(const std::filesystem::path& dir) {
  std::ifstream in(dir / "study.json");
  if (!in) throw InvalidInput("no study.json in " + dir.string());
  const auto j = json::parse(in);
  StimulusSet set;
  set.config = study_config_from_json(j.at("config"));
  for (const auto& s : j.at("stimuli")) set.stimuli.push_back(stimulus_from_json(s));
  std::sort(set.stimuli.begin(), set.stimuli.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return set;
}

/// Presentation order for one reader: reproducible from (reader, seed),
/// different across readers.
inline std::vector<std::string> reader_order(const StimulusSet& set, std::string_view reader) {
  std::vector<std::string> ids;
  for (const auto& s : set.stimuli) ids.push_back(s.id);
  std::mt19937_64 rng(mix_seed(set.config.seed, fnv1a64(reader)));
  std::shuffle(ids.begin(), ids.end(), rng);
  return ids;
}

struct StudyResponse {
  std::string reader;
  std::string stimulus_id;
  int choice = 0;
  double probability = 0.0;
  std::string timestamp;
};

inline json response_to_json(const StudyResponse& r) {
  return {{"reader", r.reader},
          {"stimulus_id", r.stimulus_id},
          {"choice", r.choice},
          {"probability", r.probability},
          {"timestamp", r.timestamp}};
}

inline StudyResponse response_from_json(const json& j) {
  StudyResponse r;
  r.reader = j.at("reader").get<std::string>();
  r.stimulus_id = j.at("stimulus_id").get<std::string>();
  r.choice = j.at("choice").get<int>();
  r.probability = choice_to_probability(r.choice);
  r.timestamp = j.value("timestamp", "");
  return r;
}

// ---- scoring ----------------------------------------------------------------

/// Mann-Whitney ROC AUC; ties count one half.
inline double roc_auc(const std::vector<double>& positives, const std::vector<double>& negatives) {
  if (positives.empty() || negatives.empty()) throw InvalidInput("roc_auc: empty class");
  std::vector<double> neg = negatives;
  std::sort(neg.begin(), neg.end());
  double acc = 0.0;
  for (double p : positives) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    const auto hi = std::upper_bound(lo, neg.end(), p);
    acc += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return acc / (static_cast<double>(positives.size()) * static_cast<double>(neg.size()));
}

struct StudyColumn {
  std::string family;
  View view;
  std::string label;  // "OPTIMAM CC"
};

struct CellSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // population sd over readers
};

/// Reader average with the population standard deviation.
inline CellSummary summarize_readers(const std::vector<double>& aucs) {
  if (aucs.empty()) throw InvalidInput("summarize_readers: no values");
  CellSummary s;
  s.n = aucs.size();
  s.mean = std::accumulate(aucs.begin(), aucs.end(), 0.0) / static_cast<double>(s.n);
  double sq = 0.0;
  for (double x : aucs) sq += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(sq / static_cast<double>(s.n));
  return s;
}

struct StudyScores {
  std::vector<std::string> readers;
  std::vector<StudyColumn> columns;
  /// auc[reader][column]; empty optional = n/a.
  std::vector<std::vector<std::optional<double>>> auc;
  std::vector<std::optional<CellSummary>> summary;
};

/// Per (reader, family, view) ROC AUC with truth REAL as the positive class and
/// probability-of-real as the score, plus a reader average +/- population sd.
inline StudyScores score_study(const std::vector<StudyResponse>& responses, const StimulusSet& set) {
  StudyScores out;
  // Columns are labelled with the dataset name of the matching real family when present.
  std::map<std::string, std::string> family_name;
  for (const auto& s : set.stimuli)
    if (s.truth == Truth::REAL) family_name.emplace(s.family(), s.dataset);
  // Configured families first, then any others found in the set.
  std::vector<std::string> ordered;
  auto add = [&](const std::string& f) {
    if (std::find(ordered.begin(), ordered.end(), f) == ordered.end()) ordered.push_back(f);
  };
  std::set<std::string> present;
  for (const auto& s : set.stimuli)
    if (s.truth == Truth::SYNTHETIC) present.insert(s.family());
  for (const auto& [fam, n] : set.config.synthetic_counts)
    if (present.count(fam)) add(fam);
  for (const auto& f : present) add(f);
  for (const auto& f : ordered)
    for (View v : {View::CC, View::MLO}) {
      const auto it = family_name.find(f);
      out.columns.push_back({f, v, (it != family_name.end() ? it->second : f) + " " + to_string(v)});
    }

  std::map<std::string, std::map<std::string, double>> by_reader;
  for (const auto& r : responses) {
    if (!set.find(r.stimulus_id)) throw InvalidInput("response for unknown stimulus " + r.stimulus_id);
    by_reader[r.reader][r.stimulus_id] = r.probability;
  }
  for (const auto& [reader, _] : by_reader) out.readers.push_back(reader);

  for (const auto& reader : out.readers) {
    const auto& answers = by_reader[reader];
    std::vector<std::optional<double>> row;
    for (const auto& col : out.columns) {
      std::vector<double> pos, neg;
      for (const auto& s : set.stimuli) {
        const auto a = answers.find(s.id);
        if (a == answers.end() || s.view != col.view) continue;
        if (s.truth == Truth::SYNTHETIC && s.family() == col.family) neg.push_back(a->second);
        if (s.truth == Truth::REAL &&
            (set.config.real_pool == RealPool::ALL_MATCHING_VIEW || s.family() == col.family))
          pos.push_back(a->second);
      }
      row.push_back(pos.empty() || neg.empty() ? std::nullopt : std::optional<double>(roc_auc(pos, neg)));
    }
    out.auc.push_back(std::move(row));
  }

  for (std::size_t c = 0; c < out.columns.size(); ++c) {
    std::vector<double> v;
    for (const auto& row : out.auc)
      if (row[c]) v.push_back(*row[c]);
    out.summary.push_back(v.empty() ? std::nullopt : std::optional<CellSummary>(summarize_readers(v)));
  }
  return out;
}

inline std::string format_mean_sd(double mean, double sd) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f ± %.3f", mean, sd);
  return buf;
}

/// Same columns as the reader-results table: one row per reader, then the average row.
inline std::string emit_study_csv(const StudyScores& s) {
  std::ostringstream os;
  os << "reader";
  for (const auto& c : s.columns) os << ',' << c.label;
  os << '\n';
  char buf[32];
  for (std::size_t r = 0; r < s.readers.size(); ++r) {
    os << s.readers[r];
    for (const auto& cell : s.auc[r]) {
      if (cell) {
        std::snprintf(buf, sizeof buf, "%.3f", *cell);
        os << ',' << buf;
      } else {
        os << ",n/a";
      }
    }
    os << '\n';
  }
  os << "Average ± std";
  for (const auto& cell : s.summary) os << ',' << (cell ? format_mean_sd(cell->mean, cell->sd) : "n/a");
  os << '\n';
  return os.str();
}

}  // namespace densesynth::study
