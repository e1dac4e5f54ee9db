#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "densesynth/core/error.hpp"
#include "densesynth/core/geometry.hpp"
#include "densesynth/core/image.hpp"
#include "densesynth/core/manifest.hpp"

namespace densesynth::eval {

/// Maps an image to a fixed-length feature vector. Implementations must be
/// deterministic; an Inception-style network can be attached through this.
class Embedder {
 public:
  virtual ~Embedder() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual int dim() const = 0;
  [[nodiscard]] virtual std::vector<double> embed(const Image& image) const = 0;
};

/// Handcrafted 32-d statistics over foreground pixels:
/// 12-bin intensity histogram, 12-bin gradient-magnitude histogram and the
/// area fraction of smoothed blobs above 8 intensity levels.
class ReferenceEmbedder final : public Embedder {
 public:
  static constexpr int kIntensityBins = 12;
  static constexpr int kGradientBins = 12;
  static constexpr int kBlobLevels = 8;
  static constexpr double kGradientBinWidth = 0.01;

  [[nodiscard]] std::string name() const override { return "reference-v1"; }
  [[nodiscard]] int dim() const override { return kIntensityBins + kGradientBins + kBlobLevels; }

  [[nodiscard]] std::vector<double> embed(const Image& image) const override {
    if (image.empty()) throw InvalidInput("embed: empty image");
    const int h = image.height, w = image.width;
    const float cut = image.max_value() * static_cast<float>(kForegroundFraction);
    std::vector<bool> fg(image.size());
    std::size_t count = 0;
    for (std::size_t i = 0; i < image.size(); ++i) count += fg[i] = image.pixels[i] > cut;
    if (count == 0) {  // blank image: describe the whole frame
      fg.assign(image.size(), true);
      count = image.size();
    }

    std::vector<double> f(dim(), 0.0);
    const auto smooth = box_smooth(image, 2);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * w + c;
        if (!fg[i]) continue;
        const double v = std::clamp<double>(image.pixels[i], 0.0, 1.0);
        f[std::min(kIntensityBins - 1, static_cast<int>(v * kIntensityBins))] += 1.0;

        const double gx = 0.5 * (image.at(r, std::min(c + 1, w - 1)) - image.at(r, std::max(c - 1, 0)));
        const double gy = 0.5 * (image.at(std::min(r + 1, h - 1), c) - image.at(std::max(r - 1, 0), c));
        const int gbin = std::min(kGradientBins - 1, static_cast<int>(std::hypot(gx, gy) / kGradientBinWidth));
        f[kIntensityBins + gbin] += 1.0;

        for (int k = 0; k < kBlobLevels; ++k)
          if (smooth[i] >= 0.1 * (k + 1)) f[kIntensityBins + kGradientBins + k] += 1.0;
      }
    }
    for (double& v : f) v /= static_cast<double>(count);
    return f;
  }

 private:
  static std::vector<float> box_smooth(const Image& image, int radius) {
    const int h = image.height, w = image.width;
    std::vector<double> integral(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        integral[(r + 1) * (w + 1) + c + 1] = image.at(r, c) + integral[r * (w + 1) + c + 1] +
                                              integral[(r + 1) * (w + 1) + c] - integral[r * (w + 1) + c];
    std::vector<float> out(image.size());
    for (int r = 0; r < h; ++r) {
      const int r0 = std::max(0, r - radius), r1 = std::min(h, r + radius + 1);
      for (int c = 0; c < w; ++c) {
        const int c0 = std::max(0, c - radius), c1 = std::min(w, c + radius + 1);
        const double s = integral[r1 * (w + 1) + c1] - integral[r0 * (w + 1) + c1] -
                         integral[r1 * (w + 1) + c0] + integral[r0 * (w + 1) + c0];
        out[static_cast<std::size_t>(r) * w + c] = static_cast<float>(s / ((r1 - r0) * (c1 - c0)));
      }
    }
    return out;
  }
};

struct EmbeddingSource {
  std::string dataset;
  std::string category;
  bool synthetic = false;
  std::string model_key;
};

/// n x d feature matrix plus where it came from.
struct EmbeddingSet {
  Eigen::MatrixXd features;
  EmbeddingSource source;
  std::string embedder;

  [[nodiscard]] Eigen::Index size() const noexcept { return features.rows(); }
  [[nodiscard]] Eigen::Index dim() const noexcept { return features.cols(); }
};

inline EmbeddingSet embed(std::span<const Image> images, const Embedder& embedder, EmbeddingSource source = {}) {
  EmbeddingSet set;
  set.source = std::move(source);
  set.embedder = embedder.name();
  set.features.resize(static_cast<Eigen::Index>(images.size()), embedder.dim());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto row = embedder.embed(images[i]);
    if (static_cast<int>(row.size()) != embedder.dim()) throw Error("embedder returned a row of the wrong length");
    set.features.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), row.size());
  }
  return set;
}

inline EmbeddingSet embed(const Manifest& manifest, const Embedder& embedder, EmbeddingSource source = {}) {
  std::vector<Image> images;
  images.reserve(manifest.records.size());
  for (const auto& r : manifest.records) images.push_back(r.image);
  return embed(images, embedder, std::move(source));
}

inline json embedding_source_to_json(const EmbeddingSource& s) {
  return {{"dataset", s.dataset}, {"category", s.category}, {"synthetic", s.synthetic}, {"model_key", s.model_key}};
}

inline EmbeddingSource embedding_source_from_json(const json& j) {
  return {j.value("dataset", ""), j.value("category", ""), j.value("synthetic", false), j.value("model_key", "")};
}

/// Raw little-endian layout: "DSEMB1\0\0", int64 rows, int64 cols, row-major f64.
/// Metadata goes to `<path>.json`.
inline void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const char magic[8] = {'D', 'S', 'E', 'M', 'B', '1', 0, 0};
  const std::int64_t rows = set.size(), cols = set.dim();
  out.write(magic, sizeof magic);
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m = set.features;
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!out) throw Error("short write to " + path.string());
  std::ofstream side(path.string() + ".json");
  side << json{{"rows", rows}, {"cols", cols}, {"embedder", set.embedder},
               {"source", embedding_source_to_json(set.source)}}.dump(2)
       << "\n";
}

inline EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path.string());
  char magic[8];
  std::int64_t rows = 0, cols = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || std::string(magic, 6) != "DSEMB1" || rows < 0 || cols < 0)
    throw InvalidInput("not an embedding file: " + path.string());
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw InvalidInput("truncated embedding file: " + path.string());
  EmbeddingSet set;
  set.features = m;
  std::ifstream side(path.string() + ".json");
  if (side) {
    const auto j = json::parse(side);
    set.embedder = j.value("embedder", "");
    if (j.contains("source")) set.source = embedding_source_from_json(j["source"]);
  }
  return set;
}

}  // namespace densesynth::eval
