#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "densesynth/core/error.hpp"

namespace densesynth::translator {

inline constexpr double kProbabilityEps = 1e-7;

/// Binary cross-entropy GAN value E[log D(y)] + E[log(1 - D(G(x)))] on
/// discriminator probabilities, clamped to [eps, 1 - eps]. The discriminator
/// ascends this; the generator descends the second term.
inline double adversarial_loss(std::span<const double> d_real, std::span<const double> d_fake) {
  if (d_real.empty() || d_fake.empty()) throw InvalidInput("adversarial_loss: empty batch");
  auto clamp = [](double p) { return std::clamp(p, kProbabilityEps, 1.0 - kProbabilityEps); };
  double real = 0.0, fake = 0.0;
  for (double p : d_real) real += std::log(clamp(p));
  for (double p : d_fake) fake += std::log(1.0 - clamp(p));
  return real / static_cast<double>(d_real.size()) + fake / static_cast<double>(d_fake.size());
}

/// Per-pixel mean L1 of each reconstruction, summed over both directions.
inline double cycle_loss(std::span<const double> x, std::span<const double> x_rec, std::span<const double> y,
                         std::span<const double> y_rec) {
  if (x.size() != x_rec.size() || y.size() != y_rec.size()) throw InvalidInput("cycle_loss: dimension mismatch");
  if (x.empty() || y.empty()) throw InvalidInput("cycle_loss: empty batch");
  auto l1 = [](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
  };
  return l1(x_rec, x) + l1(y_rec, y);
}

/// L = L_GAN(G, D_Y) + L_GAN(F, D_X) + lambda * L_cyc.
inline double combine_objective(double adv_g, double adv_f, double cyc, double lambda) {
  return adv_g + adv_f + lambda * cyc;
}

}  // namespace densesynth::translator
