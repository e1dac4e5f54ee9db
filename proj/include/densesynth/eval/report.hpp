#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "densesynth/eval/delong.hpp"
#include "densesynth/eval/seeds.hpp"

namespace densesynth::eval {

inline constexpr const char* kBaselineName = "Baseline";

struct StrategyResult {
  std::string strategy;
  SeedAggregate auc;  ///< FROC AUC percent per seed
  std::optional<DelongResult> vs_baseline;
};

/// One (test set, scenario) block; rows[0] is the reference strategy.
struct ReportGroup {
  std::string test_set;
  std::string scenario;
  std::vector<StrategyResult> rows;
};

inline std::string scenario_label(const std::string& scenario) {
  if (scenario == "ONLY_SYNTH_D") return "Only synthetic BI-RADS D in training";
  if (scenario == "WITH_REAL_D") return "Synthetic and real BI-RADS D in training";
  return scenario;
}

inline std::string format_fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string format_gain(double gain) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.2f", gain);
  return buf;
}

/// Four decimals, switching to scientific notation below 1e-4 (e.g. 6.08e-05).
inline std::string format_p_value(double p) {
  char buf[64];
  if (p < 1e-4) {
    std::snprintf(buf, sizeof buf, "%.2e", p);
  } else {
    std::snprintf(buf, sizeof buf, "%.4f", p);
  }
  return buf;
}

/// "79.71% (78.44, 80.98)"; the interval reads "n/a" for a single seed.
inline std::string format_auc_ci(const SeedAggregate& a) {
  std::string s = format_fixed(a.mean) + "%";
  if (a.ci_defined()) {
    s += " (" + format_fixed(*a.ci_low) + ", " + format_fixed(*a.ci_high) + ")";
  } else {
    s += " (n/a)";
  }
  return s;
}

struct ReportCell {
  std::string auc;
  std::string gain;
  std::string p_value;
};

inline ReportCell report_cell(const ReportGroup& g, std::size_t row) {
  const auto& r = g.rows[row];
  ReportCell c{format_auc_ci(r.auc), "Ref", "Ref"};
  if (row == 0) return c;
  c.gain = format_gain(r.auc.mean - g.rows[0].auc.mean);
  c.p_value = r.vs_baseline ? format_p_value(r.vs_baseline->p_value) : "n/a";
  return c;
}

inline std::string emit_report_csv(const std::vector<ReportGroup>& groups) {
  std::ostringstream out;
  out << "test_set,scenario,strategy,froc_auc,ci_low,ci_high,gain,p_value,n_seeds\n";
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.rows.size(); ++i) {
      const auto& r = g.rows[i];
      const auto cell = report_cell(g, i);
      out << g.test_set << ',' << g.scenario << ',' << r.strategy << ',' << format_fixed(r.auc.mean) << ','
          << (r.auc.ci_defined() ? format_fixed(*r.auc.ci_low) : "n/a") << ','
          << (r.auc.ci_defined() ? format_fixed(*r.auc.ci_high) : "n/a") << ',' << cell.gain << ','
          << cell.p_value << ',' << r.auc.values.size() << '\n';
    }
  }
  return out.str();
}

/// Markdown comparison tables: one table per test
/// set, strategies as rows, one (AUC, gain, p) column triple per scenario.
inline std::string emit_report_markdown(const std::vector<ReportGroup>& groups) {
  std::vector<std::string> test_sets, scenarios;
  auto push_unique = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& g : groups) {
    push_unique(test_sets, g.test_set);
    push_unique(scenarios, g.scenario);
  }
  std::ostringstream out;
  out << "# FROC AUC by augmentation strategy\n\n";
  auto header = [&] {
    out << "| Test set | Strategy |";
    for (const auto& s : scenarios) out << " FROC AUC (" << scenario_label(s) << ") | Gain | p-value |";
    out << "\n|---|---|";
    for (std::size_t i = 0; i < scenarios.size(); ++i) out << "---|---|---|";
    out << '\n';
  };
  if (groups.empty()) header();
  for (const auto& ts : test_sets) {
    header();
    std::vector<std::string> strategies;
    for (const auto& g : groups)
      if (g.test_set == ts)
        for (const auto& r : g.rows) push_unique(strategies, r.strategy);
    for (const auto& strat : strategies) {
      out << "| " << ts << " | " << strat << " |";
      for (const auto& sc : scenarios) {
        const ReportGroup* group = nullptr;
        for (const auto& g : groups)
          if (g.test_set == ts && g.scenario == sc) group = &g;
        std::optional<ReportCell> cell;
        if (group)
          for (std::size_t i = 0; i < group->rows.size(); ++i)
            if (group->rows[i].strategy == strat) cell = report_cell(*group, i);
        if (cell) {
          out << ' ' << cell->auc << " | " << cell->gain << " | " << cell->p_value << " |";
        } else {
          out << " n/a | n/a | n/a |";
        }
      }
      out << '\n';
    }
    out << '\n';
  }
  out << "95% confidence intervals in parentheses are computed across detector seeds as "
         "mean +/- 1.96 sd / sqrt(n). p-values come from the paired DeLong test on detection "
         "scores with at most 10 false positives per image, seed-averaged per case. Ref marks the "
         "reference strategy.\n";
  return out.str();
}

}  // namespace densesynth::eval
