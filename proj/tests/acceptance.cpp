// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Pass criterion names as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "densesynth/augment/augment.hpp"
#include "densesynth/core/density.hpp"
#include "densesynth/core/geometry.hpp"
#include "densesynth/eval/delong.hpp"
#include "densesynth/eval/embed.hpp"
#include "densesynth/eval/fid.hpp"
#include "densesynth/eval/froc.hpp"
#include "densesynth/phantom/phantom.hpp"
#include "densesynth/pipeline/desk.hpp"
#include "densesynth/study/study.hpp"
#include "densesynth/translator/cyclegan.hpp"
#include "densesynth/translator/losses.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "toy_modules.hpp"

using namespace densesynth;
namespace fs = std::filesystem;

namespace {

/// Accumulates the first few failure messages of one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) msg_ << (failures_ > 1 ? "; " : "") << what;
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s.precision(17);
    s << what << ": got " << got << " want " << want << " +- " << tol;
    expect(std::abs(got - want) <= tol, s.str());
  }
  void note(const std::string& s) { notes_ << (notes_.str().empty() ? "" : ", ") << s; }

  [[nodiscard]] bool ok() const { return failures_ == 0; }
  [[nodiscard]] std::string summary() const {
    if (failures_ == 0) return notes_.str();
    return std::to_string(failures_) + " failure(s): " + msg_.str() + (notes_.str().empty() ? "" : " | " + notes_.str());
  }

 private:
  int failures_ = 0;
  std::ostringstream msg_, notes_;
};

std::string fixed(double v, int digits = 2) { return eval::format_fixed(v, digits); }

Manifest phantoms(std::uint64_t seed, std::array<phantom::CategoryCounts, 4> counts, const std::string& prefix,
                  int h = 256, int w = 160) {
  phantom::CorpusConfig cfg;
  cfg.seed = seed;
  cfg.height = h;
  cfg.width = w;
  cfg.id_prefix = prefix;
  cfg.counts = counts;
  return phantom::generate_corpus(cfg);
}

// ---- criteria ------------------------------------------------------------------

void metric_oracles(Check& c) {
  std::mt19937_64 rng(2024);
  double worst_froc = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = fixture::random_froc_instance(rng);
    const auto got = eval::froc_curve(inst.preds, inst.gt).auc_percent;
    const auto want = oracle::froc_auc_percent(oracle::froc_points(inst.preds, inst.gt, eval::kDefaultIouThreshold));
    worst_froc = std::max(worst_froc, std::abs(got - want));
    c.near(got, want, 1e-9, "FROC AUC trial " + std::to_string(trial));
  }
  double worst_var = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 4 + rng() % 197;
    std::vector<bool> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = i % 2 == 0 || rng() % 3 == 0;
    y[1] = y[3] = false;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(rng() % 20) + (y[i] ? 3 : 0);
      b[i] = a[i] * 0.5 + static_cast<double>(rng() % 10);
    }
    const auto fast = eval::delong_compare(a, b, y);
    const auto naive = oracle::delong_naive(a, b, y);
    const std::string tag = " n=" + std::to_string(n);
    c.near(fast.var_a, naive.var_a, 1e-10, "var_a" + tag);
    c.near(fast.var_b, naive.var_b, 1e-10, "var_b" + tag);
    c.near(fast.cov_ab, naive.cov_ab, 1e-10, "cov_ab" + tag);
    worst_var = std::max({worst_var, std::abs(fast.var_a - naive.var_a), std::abs(fast.var_b - naive.var_b),
                          std::abs(fast.cov_ab - naive.cov_ab)});
    c.expect(eval::delong_compare(a, a, y).p_value == 1.0, "p != 1 on identical inputs" + tag);
  }
  std::ostringstream s;
  s << "max |dAUC| " << worst_froc << ", max |dVar| " << worst_var;
  c.note(s.str());
}

void fid_correctness(Check& c) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(6, 9);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  const Eigen::MatrixXd s = a * a.transpose() / 9.0;
  const Eigen::VectorXd m = Eigen::VectorXd::LinSpaced(6, -1, 1);
  c.near(eval::frechet_distance(m, s, m, s), 0.0, 1e-9, "identical Gaussians");
  const auto v = [](double x) { return Eigen::VectorXd::Constant(1, x); };
  const auto one = Eigen::MatrixXd::Identity(1, 1);
  c.near(eval::frechet_distance(v(0), one, v(1), one), 1.0, 1e-9, "1-D unit mean shift");
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + trial % 10;
    Eigen::MatrixXd x(d, d + 3), y(d, d + 3);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = g(rng), y.data()[i] = g(rng);
    const Eigen::MatrixXd s1 = x * x.transpose() / (d + 3.0), s2 = y * y.transpose() / (d + 3.0);
    Eigen::VectorXd m1(d), m2(d);
    for (int i = 0; i < d; ++i) m1[i] = g(rng), m2[i] = g(rng);
    c.near(eval::frechet_distance(m1, s1, m2, s2), eval::frechet_distance(m2, s2, m1, s1), 1e-9, "symmetry");
  }
  const eval::ReferenceEmbedder e;
  const auto low = eval::embed(phantoms(1, {{{200, 0}, {}, {}, {}}}, "low"), e, {"PHANTOM", "A"});
  const auto high = eval::embed(phantoms(2, {{{}, {}, {}, {200, 0}}}, "high"), e, {"PHANTOM", "D"});
  const auto r = eval::fid_bounds_protocol(low, high, {}, 7);
  c.expect(r.lower_bound < r.upper_bound, "lower bound " + fixed(r.lower_bound) + " >= upper " + fixed(r.upper_bound));
  c.note("phantom bounds " + fixed(r.lower_bound, 4) + " < " + fixed(r.upper_bound, 4));
}

void density_mapping(Check& c) {
  using K = DensityKind;
  using D = DensityCategory;
  struct Row {
    K kind;
    double value;
    D want;
  };
  const Row rows[] = {
      {K::LIBRA_PERCENT, 2.8, D::A},       {K::LIBRA_PERCENT, 2.8 + 1e-9, D::B}, {K::LIBRA_PERCENT, 25.0 - 1e-9, D::B},
      {K::LIBRA_PERCENT, 25.0, D::C},      {K::LIBRA_PERCENT, 75.0 - 1e-9, D::C}, {K::LIBRA_PERCENT, 75.0, D::D},
      {K::VOLPARA_VBD_PERCENT, 3.5, D::A}, {K::VOLPARA_VBD_PERCENT, 3.5 + 1e-9, D::B},
      {K::VOLPARA_VBD_PERCENT, 7.5, D::B}, {K::VOLPARA_VBD_PERCENT, 7.5 + 1e-9, D::C},
      {K::VOLPARA_VBD_PERCENT, 15.5 - 1e-9, D::C}, {K::VOLPARA_VBD_PERCENT, 15.5, D::D},
      {K::ACR_CLASS, 1, D::A},             {K::ACR_CLASS, 2, D::B},              {K::ACR_CLASS, 3, D::C},
      {K::ACR_CLASS, 4, D::D},
  };
  for (const auto& r : rows) {
    const auto got = map_density({r.kind, r.value});
    c.expect(got == r.want, to_string(r.kind) + " " + fixed(r.value, 9) + " -> " + to_string(got));
  }
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> pct(0.0, 100.0);
  for (auto kind : {K::LIBRA_PERCENT, K::VOLPARA_VBD_PERCENT}) {
    std::vector<double> values(10000);
    for (auto& x : values) x = pct(rng);
    std::sort(values.begin(), values.end());
    int prev = 0;
    for (double x : values) {
      const int cat = static_cast<int>(map_density({kind, x}));
      c.expect(cat >= prev, to_string(kind) + " not monotone at " + fixed(x, 6));
      prev = cat;
    }
  }
  c.note("16 boundary rows, 2 x 10000 random values");
}

void geometry(Check& c) {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  std::size_t boxes = 0;
  for (int i = 0; i < 1000; ++i) {
    phantom::CorpusConfig cfg;
    cfg.seed = rng();
    cfg.height = 96 + static_cast<int>(rng() % 160);
    cfg.width = 64 + static_cast<int>(rng() % 100);
    cfg.counts[i % 4].with_masses = 1;
    const auto rec = phantom::generate_corpus(cfg).records.at(0);
    const auto crop = crop_to_breast(rec.image);
    const bool full = i % 10 == 0;  // full detector frame is slow; sample one in ten
    const int th = full ? kTargetHeight : 256, tw = full ? kTargetWidth : 160;
    const auto res = resize_keep_aspect(crop.image, rec.annotations, th, tw, &crop.transform);
    c.expect(res.image.height == th && res.image.width == tw,
             "output " + std::to_string(res.image.height) + "x" + std::to_string(res.image.width));
    for (std::size_t k = 0; k < rec.annotations.size(); ++k, ++boxes) {
      const auto back = res.transform.invert(res.boxes[k]);
      const auto& o = rec.annotations[k];
      const double err = std::max({std::abs(back.x - o.x), std::abs(back.y - o.y), std::abs(back.right() - o.right()),
                                   std::abs(back.bottom() - o.bottom())});
      worst = std::max(worst, err);
      c.expect(err <= 1.0, rec.id + " round trip off by " + fixed(err, 3) + " px");
    }
  }
  c.note("1000 phantoms, " + std::to_string(boxes) + " boxes, max error " + fixed(worst, 3) + " px");
}

void translator_desk(Check& c) {
  const auto low = phantoms(1, {{{100, 0}, {}, {}, {}}}, "a");
  const auto high = phantoms(2, {{{}, {}, {}, {100, 0}}}, "d");
  const auto probes = phantoms(3, {{{20, 20}, {}, {}, {}}}, "probe");
  auto cfg = pipeline::DeskExperimentConfig::desk_translator();
  cfg.seed = 7;
  c.expect(cfg.max_steps >= 200 && cfg.lambda_cyc == 10.0, "desk translator must run >= 200 steps at lambda 10");
  const auto res = translator::train_cyclegan(low, high, cfg, "PH");
  const auto& steps = res.log.steps;
  c.expect(steps.size() >= 200, "only " + std::to_string(steps.size()) + " steps logged");
  // The end value is a trailing 10-step mean; single steps are noisy.
  double end = 0.0;
  for (std::size_t i = steps.size() - 10; i < steps.size(); ++i) end += steps[i].cycle / 10.0;
  const double at10 = steps.at(10).cycle;
  c.expect(end < 0.5 * at10, "(a) cycle loss " + fixed(end, 4) + " not below half of " + fixed(at10, 4));
  c.note("(a) cycle " + fixed(at10, 4) + " -> " + fixed(end, 4));

  double proxy_in = 0.0, proxy_out = 0.0, min_ret = 1e9;
  int retained = 0, masses = 0;
  for (const auto& r : probes.records) {
    const auto t = translator::translate(res.model, r);
    proxy_in += phantom::measure_density_proxy(r.image) / probes.size();
    proxy_out += phantom::measure_density_proxy(t.image) / probes.size();
    for (const auto& b : r.annotations) {
      const double ret = phantom::measure_mass_contrast(t.image, b) / phantom::measure_mass_contrast(r.image, b);
      min_ret = std::min(min_ret, ret);
      retained += ret >= 0.5;
      ++masses;
    }
  }
  c.expect(proxy_out - proxy_in >= 10.0, "(b) density proxy rose only " + fixed(proxy_out - proxy_in) + " pp");
  c.note("(b) proxy " + fixed(proxy_in) + "% -> " + fixed(proxy_out) + "%");
  c.expect(retained == masses, "(c) " + std::to_string(masses - retained) + " mass(es) below 50% contrast retention");
  c.note("(c) " + std::to_string(retained) + "/" + std::to_string(masses) + " masses retained, min " + fixed(min_ret));

  torch::manual_seed(0);
  fixture::ToyGen G(0.8, 0.1, 0.9), F(1.1, -0.2, 0.7);
  fixture::ToyDisc DX(1.3, 0.2), DY(-0.6, 0.4);
  const auto x = torch::rand({2, 1, 4, 4}, torch::kFloat64) * 2 - 1;
  const auto y = torch::rand({2, 1, 4, 4}, torch::kFloat64) * 2 - 1;
  auto objective = [&] { return translator::full_objective(G, F, DX, DY, x, y, 10.0).total; };
  objective().backward();
  double worst = 0.0;
  for (auto& p : G->parameters()) {
    const double analytic = p.grad().item<double>();
    const double h = 1e-6;
    torch::NoGradGuard guard;
    const double p0 = p.item<double>();
    p.fill_(p0 + h);
    const double up = objective().item<double>();
    p.fill_(p0 - h);
    const double down = objective().item<double>();
    p.fill_(p0);
    const double numeric = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8}));
  }
  c.expect(worst <= 1e-3, "(d) gradient relative error " + fixed(worst, 6));
  std::ostringstream s;
  s << "(d) gradient rel err " << worst;
  c.note(s.str());
}

void augmentation_counts(Check& c) {
  using namespace augment;
  fixture::FakeSource source;
  const auto reals = fixture::mixed_corpus({40, 30, 30, 0});
  const auto single = build_augmented_set(reals, &source, AugmentationPlan::single("OP"));
  const auto combined = build_augmented_set(reals, &source, AugmentationPlan::combined());
  c.expect(single.train.size() == 200, "SINGLE_SOURCE gave " + std::to_string(single.train.size()));
  c.expect(combined.train.size() == 400, "COMBINED_ALL gave " + std::to_string(combined.train.size()));

  const auto with_d = fixture::mixed_corpus({30, 30, 20, 22});
  const std::size_t expected_d = 22 / 4;
  auto only = AugmentationPlan::single("OP", false);
  auto with = AugmentationPlan::single("OP", true);
  only.seed = with.seed = 11;
  const auto a = build_augmented_set(with_d, &source, only);
  const auto b = build_augmented_set(with_d, &source, with);
  c.expect(fixture::count_real_d(a.train) == 0, "ONLY_SYNTH_D has real D records");
  c.expect(fixture::count_real_d(b.train) == expected_d,
           "WITH_REAL_D has " + std::to_string(fixture::count_real_d(b.train)) + " real D records");
  std::set<std::string> reserved;
  for (const auto& r : b.reserved_d.records) reserved.insert(r.id);
  for (const auto& r : b.train.records)
    c.expect(!reserved.count(r.id), r.id + " is in both the training set and the reserved D pool");
  c.expect(reserved.size() + expected_d == 22, "reserved pool has " + std::to_string(reserved.size()));
  auto again = with;
  const auto b2 = build_augmented_set(with_d, &source, again);
  c.expect(b2.train.records.size() == b.train.records.size() &&
               std::equal(b.train.records.begin(), b.train.records.end(), b2.train.records.begin(),
                          [](const auto& x, const auto& y) { return x.id == y.id; }),
           "real D sample not reproducible under a fixed seed");
  c.note("200 / 400 records; real D " + std::to_string(expected_d) + " of 22 with, 0 without");
}

bool report_complete(const eval::ReportGroup& g, std::size_t n_strategies, int n_seeds, std::string& why) {
  if (g.rows.size() != n_strategies) return why = "report has " + std::to_string(g.rows.size()) + " rows", false;
  for (std::size_t i = 0; i < g.rows.size(); ++i) {
    const auto& r = g.rows[i];
    if (static_cast<int>(r.auc.values.size()) != n_seeds)
      return why = r.strategy + " aggregated " + std::to_string(r.auc.values.size()) + " seeds", false;
    if (!std::isfinite(r.auc.mean) || !r.auc.ci_defined()) return why = r.strategy + " lacks AUC or CI", false;
    if (i > 0 && !r.vs_baseline) return why = r.strategy + " lacks a DeLong comparison", false;
  }
  return true;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void end_to_end(Check& c) {
  const pipeline::DeskExperimentConfig cfg;
  c.expect(cfg.train_masses == 60 && cfg.test_masses == 120 && cfg.detector_seeds == 5, "experiment size changed");
  const fs::path root = fs::temp_directory_path() / "densesynth_acceptance_e2e";
  fs::remove_all(root);
  std::vector<pipeline::DeskExperimentResult> runs;
  for (int k = 0; k < 2; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    runs.push_back(pipeline::run_desk_experiment(cfg, root / ("run" + std::to_string(k))));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(secs <= 1800.0, "run " + std::to_string(k) + " took " + fixed(secs, 0) + " s");
    c.note("run " + std::to_string(k) + " " + fixed(secs, 0) + " s");
  }
  std::string why;
  c.expect(report_complete(runs[0].group, 2, cfg.detector_seeds, why), why);
  c.expect(cfg.train_masses == static_cast<int>(runs[0].n_train_baseline), "baseline set size mismatch");
  for (const char* f : {"report.csv", "report.md"})
    c.expect(read_bytes(root / "run0" / f) == read_bytes(root / "run1" / f) && !read_bytes(root / "run0" / f).empty(),
             std::string(f) + " differs between identical runs");
  const auto& rows = runs[0].group.rows;
  if (rows.size() == 2) {
    c.note(rows[0].strategy + " " + fixed(rows[0].auc.mean) + "%, " + rows[1].strategy + " " +
           fixed(rows[1].auc.mean) + "%, p " + (rows[1].vs_baseline ? fixed(rows[1].vs_baseline->p_value, 4) : "n/a"));
    c.note(std::string("augmented >= baseline: ") + (rows[1].auc.mean >= rows[0].auc.mean ? "yes" : "no"));
  }
  fs::remove_all(root);
}

void reader_scoring(Check& c) {
  using namespace study;
  const double six[] = {0.05, 0.23, 0.41, 0.59, 0.77, 0.95};
  for (int k = 1; k <= 6; ++k)
    c.expect(choice_to_probability(k) == six[k - 1], "choice " + std::to_string(k) + " maps to " +
                                                        fixed(choice_to_probability(k), 4));

  // Two cells (CC and MLO) with eight reals and eight synthetics each.
  StimulusSet set;
  set.config.real_counts = {{"R", 16}};
  set.config.synthetic_counts = {{"XX", 16}};
  int id = 0;
  for (View v : {View::CC, View::MLO})
    for (int i = 0; i < 8; ++i) {
      set.stimuli.push_back({"r" + std::to_string(id++), "", Truth::REAL, "R", "", "", v, 1, 1});
      set.stimuli.push_back({"s" + std::to_string(id++), "", Truth::SYNTHETIC, "", "XX-" + to_string(v), "", v, 1, 1});
    }
  std::sort(set.stimuli.begin(), set.stimuli.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::vector<StudyResponse> rs;
  std::mt19937_64 rng(5);
  for (const auto& s : set.stimuli) {
    const int perfect = s.truth == Truth::REAL ? 5 + static_cast<int>(rng() % 2) : 1 + static_cast<int>(rng() % 3);
    rs.push_back({"perfect", s.id, perfect, choice_to_probability(perfect), ""});
    rs.push_back({"constant", s.id, 4, choice_to_probability(4), ""});
  }
  const auto sc = score_study(rs, set);
  c.expect(sc.readers == std::vector<std::string>{"constant", "perfect"}, "unexpected reader order");
  for (std::size_t r = 0; r < sc.readers.size() && r < 2; ++r)
    for (const auto& cell : sc.auc[r]) {
      c.expect(cell.has_value(), sc.readers[r] + " has an empty cell");
      if (cell) c.near(*cell, sc.readers[r] == "perfect" ? 1.0 : 0.5, 1e-9, sc.readers[r] + " reader AUC");
    }

  // Ten responses in one cell: 20.5 pairwise wins of 25 by hand.
  StimulusSet hand;
  hand.config.real_counts = {{"R", 10}};
  hand.config.synthetic_counts = {{"XX", 10}};
  const int real_choice[] = {6, 5, 3, 4, 2};
  const int synth_choice[] = {1, 3, 2, 4, 1};
  std::vector<StudyResponse> hr;
  std::vector<double> pos, neg;
  for (int i = 0; i < 5; ++i) {
    const auto ri = "r" + std::to_string(i), si = "s" + std::to_string(i);
    hand.stimuli.push_back({ri, "", Truth::REAL, "R", "", "", View::CC, 1, 1});
    hand.stimuli.push_back({si, "", Truth::SYNTHETIC, "", "XX-CC", "", View::CC, 1, 1});
    hr.push_back({"A", ri, real_choice[i], choice_to_probability(real_choice[i]), ""});
    hr.push_back({"A", si, synth_choice[i], choice_to_probability(synth_choice[i]), ""});
    pos.push_back(choice_to_probability(real_choice[i]));
    neg.push_back(choice_to_probability(synth_choice[i]));
  }
  std::sort(hand.stimuli.begin(), hand.stimuli.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  const auto hs = score_study(hr, hand);
  c.expect(!hs.auc.empty() && !hs.auc[0].empty() && hs.auc[0][0].has_value(), "hand case produced no AUC");
  if (!hs.auc.empty() && !hs.auc[0].empty() && hs.auc[0][0]) {
    c.near(*hs.auc[0][0], 0.82, 1e-9, "hand-worked AUC");
    c.near(*hs.auc[0][0], oracle::roc_auc(pos, neg), 1e-9, "pairwise oracle AUC");
  }
  c.note("perfect 1.0, constant 0.5, hand case 0.82");
}

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<void(Check&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {"metric_oracles", 60, metric_oracles},
      {"fid_correctness", 120, fid_correctness},
      {"density_mapping", 30, density_mapping},
      {"geometry", 60, geometry},
      {"translator_desk_run", 900, translator_desk},
      {"augmentation_counts", 30, augmentation_counts},
      {"end_to_end_phantom_experiment", 3600, end_to_end},
      {"reader_study_scoring", 30, reader_scoring},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& cr : all) {
    if (!only.empty() && !only.count(cr.name)) continue;
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(secs <= cr.budget_seconds, "runtime " + fixed(secs, 1) + " s over " + fixed(cr.budget_seconds, 0) + " s");
    const bool ok = c.ok();
    failed += !ok;
    std::cout << (ok ? "PASS " : "FAIL ") << cr.name << " (" << fixed(secs, 1) << " s) " << c.summary() << std::endl;
  }
  std::cout << (failed ? "ACCEPTANCE FAIL: " + std::to_string(failed) + " criterion(s) failed" : "ACCEPTANCE PASS")
            << std::endl;
  return failed ? 1 : 0;
}
