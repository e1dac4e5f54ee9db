#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "densesynth/core/error.hpp"
#include "densesynth/core/hash.hpp"
#include "densesynth/eval/embed.hpp"

namespace densesynth::eval {

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  /// Set when eps * I was added to a rank-deficient covariance.
  bool regularized = false;
};

/// Sample mean and (n - 1)-normalized covariance. A rank-deficient covariance
/// gets eps * I with eps = 1e-6 * trace / d.
inline GaussianFit fit_gaussian(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw InvalidInput("fit_gaussian: need at least two samples");
  if (!x.allFinite()) throw InvalidInput("fit_gaussian: non-finite features");
  GaussianFit g;
  g.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - g.mean.transpose();
  g.cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  const Eigen::Index d = g.cov.rows();
  bool deficient = x.rows() < d + 1;
  if (!deficient) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.cov, Eigen::EigenvaluesOnly);
    const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
    deficient = es.eigenvalues().minCoeff() <= 1e-12 * std::max(top, 1e-300);
  }
  if (deficient) {
    const double tr = g.cov.trace();
    const double eps = tr > 0 ? 1e-6 * tr / static_cast<double>(d) : 1e-6;
    g.cov.diagonal().array() += eps;
    g.regularized = true;
  }
  return g;
}

/// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}). The square root comes from
/// a complex Schur decomposition; imaginary residue above 1e-6 relative to the
/// real part is treated as a failure.
inline double frechet_distance(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1, const Eigen::VectorXd& mu2,
                               const Eigen::MatrixXd& s2) {
  const Eigen::Index d = mu1.size();
  if (mu2.size() != d || s1.rows() != d || s1.cols() != d || s2.rows() != d || s2.cols() != d)
    throw InvalidInput("frechet_distance: dimension mismatch");
  if (!mu1.allFinite() || !mu2.allFinite() || !s1.allFinite() || !s2.allFinite())
    throw InvalidInput("frechet_distance: non-finite input");
  const Eigen::MatrixXcd prod = (s1 * s2).cast<std::complex<double>>();
  const Eigen::MatrixXcd root = prod.sqrt();
  if (!root.allFinite()) throw Error("frechet_distance: matrix square root diverged");
  const double real_scale = std::max(root.real().cwiseAbs().maxCoeff(), 1e-300);
  if (root.imag().cwiseAbs().maxCoeff() > 1e-6 * real_scale)
    throw Error("frechet_distance: matrix square root has a significant imaginary part");
  const double value = (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * root.real().trace();
  return std::max(value, 0.0);  // clamps round-off below zero
}

inline double frechet_distance(const GaussianFit& a, const GaussianFit& b) {
  return frechet_distance(a.mean, a.cov, b.mean, b.cov);
}

inline double fid(const EmbeddingSet& a, const EmbeddingSet& b, bool* regularized = nullptr) {
  if (a.dim() != b.dim()) throw InvalidInput("fid: embedding dimensions differ");
  const auto ga = fit_gaussian(a.features), gb = fit_gaussian(b.features);
  if (regularized) *regularized = ga.regularized || gb.regularized;
  return frechet_distance(ga, gb);
}

struct SyntheticFid {
  std::string source;     // where the translated inputs came from
  std::string model_key;  // translator that produced them
  double value = 0.0;
  bool within_bounds = false;
};

struct FidBoundsResult {
  std::string dataset;
  std::string view;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  std::vector<SyntheticFid> synthetic;
  std::vector<std::string> warnings;

  [[nodiscard]] bool degenerate() const noexcept { return upper_bound <= lower_bound; }
};

struct NamedEmbeddings {
  std::string source;
  std::string model_key;
  EmbeddingSet set;
};

namespace detail {

inline std::vector<Eigen::Index> seeded_permutation(Eigen::Index n, std::uint64_t seed) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

inline EmbeddingSet take_rows(const EmbeddingSet& s, const std::vector<Eigen::Index>& idx, std::size_t begin,
                              std::size_t end) {
  EmbeddingSet out;
  out.source = s.source;
  out.embedder = s.embedder;
  out.features.resize(static_cast<Eigen::Index>(end - begin), s.dim());
  for (std::size_t i = begin; i < end; ++i) out.features.row(static_cast<Eigen::Index>(i - begin)) = s.features.row(idx[i]);
  return out;
}

}  // namespace detail

/// Lower bound: FID between two halves of real high-density images under a
/// seeded shuffle (averaged over `n_splits` splits). Upper bound: FID between
/// real low-density and real high-density images.
///
/// Each synthetic set is scored at the lower bound's sample size: a seeded
/// half-size subsample stands in for split 1 and is compared with split 2.
/// FID is biased upward at small n, so comparing full sets against a
/// half-vs-half bound would not be like for like.
inline FidBoundsResult fid_bounds_protocol(const EmbeddingSet& real_low, const EmbeddingSet& real_high,
                                           const std::vector<NamedEmbeddings>& synthetic, std::uint64_t split_seed,
                                           int n_splits = 1) {
  if (real_high.size() < 4) throw InvalidInput("fid_bounds_protocol: need at least 4 high-density images to split");
  if (n_splits < 1) throw InvalidInput("fid_bounds_protocol: n_splits must be positive");
  FidBoundsResult out;
  out.dataset = real_high.source.dataset;
  out.view = real_high.source.category;
  for (const auto& s : synthetic) {
    if (s.set.size() < 2) throw InvalidInput("fid_bounds_protocol: synthetic set " + s.model_key + " is too small");
    out.synthetic.push_back({s.source, s.model_key, 0.0, false});
  }

  bool reg = false, lower_reg = false;
  std::vector<bool> synth_reg(synthetic.size(), false);
  const auto n = static_cast<std::size_t>(real_high.size()), half = n / 2;
  for (int k = 0; k < n_splits; ++k) {
    const std::uint64_t seed = k == 0 ? split_seed : mix_seed(split_seed, static_cast<std::uint64_t>(k));
    const auto idx = detail::seeded_permutation(real_high.size(), seed);
    const auto split1 = detail::take_rows(real_high, idx, 0, half);
    const auto split2 = detail::take_rows(real_high, idx, half, n);
    out.lower_bound += fid(split1, split2, &reg) / n_splits;
    lower_reg |= reg;
    for (std::size_t s = 0; s < synthetic.size(); ++s) {
      const auto& set = synthetic[s].set;
      const auto sidx = detail::seeded_permutation(set.size(), seed);
      const auto sub = detail::take_rows(set, sidx, 0, std::min<std::size_t>(half, sidx.size()));
      out.synthetic[s].value += fid(sub, split2, &reg) / n_splits;
      synth_reg[s] = synth_reg[s] || reg;
    }
  }
  if (lower_reg) out.warnings.push_back("lower-bound split too small for a full-rank covariance; regularized");

  out.upper_bound = fid(real_low, real_high, &reg);
  if (reg) out.warnings.push_back("upper-bound covariance regularized");
  if (out.degenerate()) out.warnings.push_back("degenerate bounds: upper bound does not exceed lower bound");

  for (std::size_t s = 0; s < synthetic.size(); ++s) {
    auto& r = out.synthetic[s];
    r.within_bounds = out.lower_bound <= r.value && r.value <= out.upper_bound;
    if (synth_reg[s]) out.warnings.push_back("covariance regularized for " + r.model_key);
  }
  return out;
}

/// Long-format table: one row per synthetic set, bounds repeated.
inline std::string emit_fid_csv(const std::vector<FidBoundsResult>& results) {
  std::ostringstream os;
  os << "dataset,view,lower_bound,source,model,fid,upper_bound,within_bounds\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  for (const auto& r : results) {
    if (r.synthetic.empty())
      os << r.dataset << ',' << r.view << ',' << num(r.lower_bound) << ",,,," << num(r.upper_bound) << ",\n";
    for (const auto& s : r.synthetic)
      os << r.dataset << ',' << r.view << ',' << num(r.lower_bound) << ',' << s.source << ',' << s.model_key << ','
         << num(s.value) << ',' << num(r.upper_bound) << ',' << (s.within_bounds ? "true" : "false") << '\n';
  }
  return os.str();
}

}  // namespace densesynth::eval
