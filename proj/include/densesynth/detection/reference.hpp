#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "densesynth/core/hash.hpp"
#include "densesynth/detection/detector.hpp"

namespace densesynth::detection {

namespace nn = torch::nn;

/// JSON form: {"width": 8, "batch_size": 4, "lr": 0.001, "epochs": 30,
///             "min_score": 0.02, "nms_iou": 0.3, "max_boxes": 20}
struct ReferenceDetectorConfig {
  int width = 8;  ///< channels of the first layer
  int batch_size = 4;
  double lr = 1e-3;
  int epochs = 30;
  double min_score = 0.02;
  double nms_iou = 0.3;
  int max_boxes = 20;
  double flip_probability = 0.5;
  /// Cells whose centre lies within this normalized radius of a mass are positive.
  double positive_radius = 0.5;

  void validate() const {
    if (width < 1 || batch_size < 1 || epochs < 0 || max_boxes < 1) throw InvalidInput("invalid detector config");
    if (!(lr > 0)) throw InvalidInput("detector lr must be positive");
    if (!(min_score >= 0 && min_score < 1)) throw InvalidInput("detector min_score must lie in [0, 1)");
    if (!(nms_iou > 0 && nms_iou <= 1)) throw InvalidInput("detector nms_iou must lie in (0, 1]");
  }
};

inline json detector_config_to_json(const ReferenceDetectorConfig& c) {
  return {{"width", c.width},         {"batch_size", c.batch_size}, {"lr", c.lr},
          {"epochs", c.epochs},       {"min_score", c.min_score},   {"nms_iou", c.nms_iou},
          {"max_boxes", c.max_boxes}, {"flip_probability", c.flip_probability},
          {"positive_radius", c.positive_radius}};
}

inline ReferenceDetectorConfig detector_config_from_json(const json& j) {
  ReferenceDetectorConfig c;
  c.width = j.value("width", c.width);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.epochs = j.value("epochs", c.epochs);
  c.min_score = j.value("min_score", c.min_score);
  c.nms_iou = j.value("nms_iou", c.nms_iou);
  c.max_boxes = j.value("max_boxes", c.max_boxes);
  c.flip_probability = j.value("flip_probability", c.flip_probability);
  c.positive_radius = j.value("positive_radius", c.positive_radius);
  c.validate();
  return c;
}

inline constexpr int kHeatmapStride = 4;
inline constexpr double kSizePrior = 16.0;  // pixels; sizes are regressed as log(side / prior)

/// Fully convolutional scorer at stride 4: a dense sliding-window classifier
/// for "mass centred here" plus log box size.
struct HeatmapNetImpl : nn::Module {
  nn::Sequential body{nullptr};
  nn::Conv2d head{nullptr};

  explicit HeatmapNetImpl(int w) {
    auto conv = [](int in, int out, int dilation) {
      return nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(dilation).dilation(dilation));
    };
    body = register_module("body", nn::Sequential(conv(1, w, 1), nn::ReLU(), nn::MaxPool2d(2), conv(w, 2 * w, 1),
                                                  nn::ReLU(), nn::MaxPool2d(2), conv(2 * w, 2 * w, 2), nn::ReLU(),
                                                  conv(2 * w, 2 * w, 4), nn::ReLU(), conv(2 * w, 2 * w, 1),
                                                  nn::ReLU()));
    head = register_module("head", nn::Conv2d(nn::Conv2dOptions(2 * w, 3, 1)));
  }

  /// [N, 1, H, W] in [-1, 1] -> [N, 3, H/4, W/4]: objectness logit, log w, log h.
  torch::Tensor forward(const torch::Tensor& x) { return head->forward(body->forward(x)); }
};
TORCH_MODULE(HeatmapNet);

namespace detail {

inline torch::Tensor image_tensor(const Image& image) {
  if (image.height % kHeatmapStride || image.width % kHeatmapStride)
    throw InvalidInput("reference detector needs image dims divisible by 4");
  return torch::from_blob(const_cast<float*>(image.pixels.data()), {1, 1, image.height, image.width},
                          torch::kFloat32)
             .clone() *
         2.0f - 1.0f;
}

struct Targets {
  torch::Tensor objectness;  // [1, 1, h, w] in {0, 1}
  torch::Tensor size;        // [1, 2, h, w]
};

inline Targets make_targets(const MammogramRecord& r, double positive_radius) {
  const int gh = r.image.height / kHeatmapStride, gw = r.image.width / kHeatmapStride;
  auto obj = torch::zeros({1, 1, gh, gw});
  auto size = torch::zeros({1, 2, gh, gw});
  auto o = obj.accessor<float, 4>();
  auto s = size.accessor<float, 4>();
  for (const auto& b : r.annotations) {
    const double cx = b.x + b.w / 2, cy = b.y + b.h / 2;
    auto mark = [&](int i, int j) {
      o[0][0][i][j] = 1.0f;
      s[0][0][i][j] = static_cast<float>(std::log(b.w / kSizePrior));
      s[0][1][i][j] = static_cast<float>(std::log(b.h / kSizePrior));
    };
    for (int i = 0; i < gh; ++i)
      for (int j = 0; j < gw; ++j) {
        const double dx = ((j + 0.5) * kHeatmapStride - cx) / (b.w / 2);
        const double dy = ((i + 0.5) * kHeatmapStride - cy) / (b.h / 2);
        if (dx * dx + dy * dy <= positive_radius * positive_radius) mark(i, j);
      }
    mark(std::clamp(static_cast<int>(cy / kHeatmapStride), 0, gh - 1),
         std::clamp(static_cast<int>(cx / kHeatmapStride), 0, gw - 1));
  }
  return {obj, size};
}

}  // namespace detail

class ReferenceDetector : public DetectorModel {
 public:
  ReferenceDetector(const ReferenceDetectorConfig& cfg, std::uint64_t seed) : config_(cfg), seed_(seed) {
    config_.validate();
    torch::manual_seed(seed);
    net_ = HeatmapNet(config_.width);
  }

  [[nodiscard]] std::vector<ScoredBox> predict(const MammogramRecord& record) const override {
    torch::NoGradGuard guard;
    auto net = net_;
    auto out = net->forward(detail::image_tensor(record.image));
    return decode(out[0], record.image.height, record.image.width);
  }

  /// Peaks of the objectness map (3x3 local maxima above min_score), boxes
  /// from the size channels, then greedy NMS.
  [[nodiscard]] std::vector<ScoredBox> decode(const torch::Tensor& maps, int height, int width) const {
    auto prob = torch::sigmoid(maps[0]).contiguous();
    auto pooled = torch::max_pool2d(prob.unsqueeze(0), 3, 1, 1).squeeze(0);
    auto p = prob.accessor<float, 2>();
    auto m = pooled.accessor<float, 2>();
    auto sz = maps.slice(0, 1, 3).contiguous();
    auto s = sz.accessor<float, 3>();
    std::vector<ScoredBox> cands;
    for (int i = 0; i < prob.size(0); ++i)
      for (int j = 0; j < prob.size(1); ++j) {
        if (p[i][j] < config_.min_score || p[i][j] < m[i][j]) continue;
        const double cx = (j + 0.5) * kHeatmapStride, cy = (i + 0.5) * kHeatmapStride;
        const double bw = kSizePrior * std::exp(std::clamp<double>(s[0][i][j], -3.0, 3.0));
        const double bh = kSizePrior * std::exp(std::clamp<double>(s[1][i][j], -3.0, 3.0));
        const double x0 = std::clamp(cx - bw / 2, 0.0, static_cast<double>(width - 1));
        const double y0 = std::clamp(cy - bh / 2, 0.0, static_cast<double>(height - 1));
        const double x1 = std::clamp(cx + bw / 2, x0 + 1.0, static_cast<double>(width));
        const double y1 = std::clamp(cy + bh / 2, y0 + 1.0, static_cast<double>(height));
        cands.push_back({{x0, y0, x1 - x0, y1 - y0}, static_cast<double>(p[i][j])});
      }
    return non_max_suppression(std::move(cands), config_.nms_iou, config_.max_boxes);
  }

  /// Seeded training: per-epoch shuffle and horizontal flips come from the
  /// run seed, so (manifest, seed, config) fixes the result.
  void fit(const Manifest& manifest, int epochs) {
    const std::size_t n = manifest.size();
    std::vector<detail::Targets> targets, flipped_targets;
    std::vector<torch::Tensor> images, flipped_images;
    for (const auto& r : manifest.records) {
      images.push_back(detail::image_tensor(r.image));
      targets.push_back(detail::make_targets(r, config_.positive_radius));
      const auto f = flip_record(r);
      flipped_images.push_back(detail::image_tensor(f.image));
      flipped_targets.push_back(detail::make_targets(f, config_.positive_radius));
    }
    double pos = 0, total = 0;
    for (const auto& t : targets) {
      pos += t.objectness.sum().item<double>();
      total += t.objectness.numel();
    }
    const auto pos_weight = torch::full({1}, static_cast<float>(std::min(100.0, (total - pos) / std::max(pos, 1.0))));
    torch::optim::Adam opt(net_->parameters(), torch::optim::AdamOptions(config_.lr));
    std::mt19937_64 rng(mix_seed(seed_, 0x6465));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    net_->train();
    for (int epoch = 0; epoch < epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < n; start += config_.batch_size) {
        std::vector<torch::Tensor> xs, objs, sizes;
        for (std::size_t k = start; k < std::min(n, start + config_.batch_size); ++k) {
          const std::size_t i = order[k];
          const bool flip = std::bernoulli_distribution(config_.flip_probability)(rng);
          xs.push_back(flip ? flipped_images[i] : images[i]);
          const auto& t = flip ? flipped_targets[i] : targets[i];
          objs.push_back(t.objectness);
          sizes.push_back(t.size);
        }
        const auto x = torch::cat(xs), obj = torch::cat(objs), size = torch::cat(sizes);
        const auto out = net_->forward(x);
        auto loss = torch::binary_cross_entropy_with_logits(out.slice(1, 0, 1), obj, {}, pos_weight);
        const auto mask = obj.expand({obj.size(0), 2, obj.size(2), obj.size(3)});
        const auto n_pos = obj.sum();
        if (n_pos.item<float>() > 0)
          loss = loss + (torch::smooth_l1_loss(out.slice(1, 1, 3), size, at::Reduction::None) * mask).sum() /
                            (2 * n_pos);
        opt.zero_grad();
        loss.backward();
        opt.step();
        last_loss_ = loss.item<double>();
      }
    }
    net_->eval();
  }

  void save(const std::filesystem::path& path) const override {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    torch::serialize::OutputArchive archive;
    net_->save(archive);
    const json meta = {{"format", "densesynth-refdet-1"}, {"seed", seed_}, {"config", detector_config_to_json(config_)}};
    archive.write("meta", c10::IValue(meta.dump()));
    const auto tmp = path.string() + ".tmp";
    archive.save_to(tmp);
    std::filesystem::rename(tmp, path);
  }

  static std::unique_ptr<ReferenceDetector> load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw InvalidInput("no detector checkpoint at " + path.string());
    torch::serialize::InputArchive archive;
    archive.load_from(path.string());
    c10::IValue meta_value;
    if (!archive.try_read("meta", meta_value) || !meta_value.isString())
      throw InvalidInput("detector checkpoint " + path.string() + " has no metadata");
    const auto meta = json::parse(meta_value.toStringRef());
    if (meta.value("format", "") != "densesynth-refdet-1")
      throw InvalidInput("unsupported detector checkpoint in " + path.string());
    auto det = std::make_unique<ReferenceDetector>(detector_config_from_json(meta.at("config")),
                                                   meta.at("seed").get<std::uint64_t>());
    det->net_->load(archive);
    det->net_->eval();
    return det;
  }

  [[nodiscard]] const ReferenceDetectorConfig& config() const { return config_; }
  [[nodiscard]] double last_loss() const { return last_loss_; }
  [[nodiscard]] HeatmapNet net() const { return net_; }

 private:
  ReferenceDetectorConfig config_;
  std::uint64_t seed_ = 0;
  HeatmapNet net_{nullptr};
  double last_loss_ = 0.0;
};

class ReferenceBackend : public DetectorBackend {
 public:
  explicit ReferenceBackend(ReferenceDetectorConfig cfg = {}) : config_(cfg) { config_.validate(); }

  [[nodiscard]] std::string name() const override { return "reference-heatmap"; }

  std::unique_ptr<DetectorModel> train(const Manifest& manifest, std::uint64_t seed, int epochs) override {
    auto det = std::make_unique<ReferenceDetector>(config_, seed);
    det->fit(manifest, epochs);
    return det;
  }

  std::unique_ptr<DetectorModel> load(const std::filesystem::path& path) override {
    return ReferenceDetector::load(path);
  }

  [[nodiscard]] const ReferenceDetectorConfig& config() const { return config_; }

 private:
  ReferenceDetectorConfig config_;
};

}  // namespace densesynth::detection
