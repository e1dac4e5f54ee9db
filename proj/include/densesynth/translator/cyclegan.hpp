#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "densesynth/core/error.hpp"
#include "densesynth/core/hash.hpp"
#include "densesynth/core/image.hpp"
#include "densesynth/core/manifest.hpp"
#include "densesynth/translator/losses.hpp"
#include "densesynth/translator/networks.hpp"
#include "densesynth/translator/registry.hpp"

namespace densesynth::translator {

enum class GanMode { LSGAN, BCE };

struct TranslatorConfig {
  double lambda_cyc = 10.0;
  double lambda_identity = 0.0;  // relative to lambda_cyc; 0 disables
  int epochs = 200;
  int batch_size = 1;
  /// Caps the run in optimizer steps; 0 means epochs x steps-per-epoch.
  int max_steps = 0;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  /// Learning rate is constant until this fraction of steps, then decays linearly to 0.
  double decay_start = 0.5;
  GanMode gan_mode = GanMode::LSGAN;
  int ngf = 64;
  int ndf = 64;
  int n_blocks = 9;
  int height = 256;
  int width = 160;
  int pool_size = 50;
  std::uint64_t seed = 1;
  int checkpoint_every = 0;  // epochs; 0 disables
  std::filesystem::path checkpoint_dir;

  void validate() const {
    if (!(lambda_cyc > 0)) throw InvalidInput("lambda_cyc must be positive");
    if (lambda_identity < 0) throw InvalidInput("lambda_identity must be non-negative");
    if (batch_size < 1) throw InvalidInput("batch_size must be at least 1");
    if (epochs < 0 || max_steps < 0) throw InvalidInput("epochs and max_steps must be non-negative");
    if (height % 4 != 0 || width % 4 != 0 || height < 8 || width < 8)
      throw InvalidInput("translator image dims must be multiples of 4");
    if (!(decay_start >= 0 && decay_start <= 1)) throw InvalidInput("decay_start must be in [0, 1]");
  }
};

inline json translator_config_to_json(const TranslatorConfig& c) {
  return {{"lambda_cyc", c.lambda_cyc},   {"lambda_identity", c.lambda_identity},
          {"epochs", c.epochs},           {"batch_size", c.batch_size},
          {"max_steps", c.max_steps},     {"lr", c.lr},
          {"beta1", c.beta1},             {"beta2", c.beta2},
          {"decay_start", c.decay_start}, {"gan_mode", c.gan_mode == GanMode::LSGAN ? "lsgan" : "bce"},
          {"ngf", c.ngf},                 {"ndf", c.ndf},
          {"n_blocks", c.n_blocks},       {"height", c.height},
          {"width", c.width},             {"pool_size", c.pool_size},
          {"seed", c.seed},               {"checkpoint_every", c.checkpoint_every}};
}

inline TranslatorConfig translator_config_from_json(const json& j) {
  TranslatorConfig c;
  c.lambda_cyc = j.value("lambda_cyc", c.lambda_cyc);
  c.lambda_identity = j.value("lambda_identity", c.lambda_identity);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.decay_start = j.value("decay_start", c.decay_start);
  const auto mode = j.value("gan_mode", std::string("lsgan"));
  if (mode != "lsgan" && mode != "bce") throw InvalidInput("gan_mode must be lsgan or bce");
  c.gan_mode = mode == "lsgan" ? GanMode::LSGAN : GanMode::BCE;
  c.ngf = j.value("ngf", c.ngf);
  c.ndf = j.value("ndf", c.ndf);
  c.n_blocks = j.value("n_blocks", c.n_blocks);
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.pool_size = j.value("pool_size", c.pool_size);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  if (j.contains("checkpoint_dir")) c.checkpoint_dir = j["checkpoint_dir"].get<std::string>();
  c.validate();
  return c;
}

struct TrainStep {
  int step = 0;
  int epoch = 0;
  double lr = 0.0;
  double gen_adv_g = 0.0;  // generator adversarial loss, X -> Y direction
  double gen_adv_f = 0.0;  // Y -> X direction
  double cycle = 0.0;      // unweighted L_cyc
  double disc_y = 0.0;
  double disc_x = 0.0;
  bool skipped = false;
};

struct TrainLog {
  std::vector<TrainStep> steps;
  std::vector<int> epoch_starts;  // step index at which each epoch began
  std::vector<std::string> events;

  void write_csv(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "step,epoch,lr,gen_adv_g,gen_adv_f,cycle,disc_y,disc_x,skipped\n";
    char buf[256];
    for (const auto& s : steps) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%d\n", s.step, s.epoch, s.lr, s.gen_adv_g,
                    s.gen_adv_f, s.cycle, s.disc_y, s.disc_x, s.skipped ? 1 : 0);
      out << buf;
    }
  }
};

/// G: low -> high density (X -> Y), F: high -> low, D_X and D_Y judge each domain.
struct TranslatorModel {
  std::string key;
  TranslatorConfig config;
  ResnetGenerator G{nullptr}, F{nullptr};
  PatchDiscriminator D_X{nullptr}, D_Y{nullptr};
  int epochs_trained = 0;
  int steps_trained = 0;

  TranslatorModel() = default;
  TranslatorModel(std::string model_key, const TranslatorConfig& cfg) : key(std::move(model_key)), config(cfg) {
    config.validate();
    torch::manual_seed(config.seed);
    G = ResnetGenerator(1, config.ngf, config.n_blocks);
    F = ResnetGenerator(1, config.ngf, config.n_blocks);
    D_X = PatchDiscriminator(1, config.ndf);
    D_Y = PatchDiscriminator(1, config.ndf);
    for (nn::Module* m : {static_cast<nn::Module*>(G.get()), static_cast<nn::Module*>(F.get()),
                          static_cast<nn::Module*>(D_X.get()), static_cast<nn::Module*>(D_Y.get())})
      init_weights(*m);
  }
};

// ---- tensors <-> images -----------------------------------------------------

/// [0, 1] image -> [1, 1, H, W] tensor in [-1, 1].
inline torch::Tensor to_tensor(const Image& image) {
  auto t = torch::from_blob(const_cast<float*>(image.pixels.data()), {1, 1, image.height, image.width}, torch::kFloat32)
               .clone();
  return t.mul_(2.0).sub_(1.0);
}

inline Image to_image(const torch::Tensor& t, int bit_depth = 16) {
  auto c = t.detach().to(torch::kFloat32).contiguous().add(1.0).mul(0.5).clamp(0.0, 1.0);
  Image out(static_cast<int>(c.size(-2)), static_cast<int>(c.size(-1)));
  std::memcpy(out.pixels.data(), c.data_ptr<float>(), out.pixels.size() * sizeof(float));
  out.bit_depth = bit_depth;
  quantize16(out);
  return out;
}

// ---- losses on tensors ------------------------------------------------------

/// Tensor form of adversarial_loss on discriminator logits.
inline torch::Tensor gan_value(const torch::Tensor& real_logits, const torch::Tensor& fake_logits) {
  const auto pr = torch::sigmoid(real_logits).clamp(kProbabilityEps, 1.0 - kProbabilityEps);
  const auto pf = torch::sigmoid(fake_logits).clamp(kProbabilityEps, 1.0 - kProbabilityEps);
  return torch::log(pr).mean() + torch::log(1.0 - pf).mean();
}

inline torch::Tensor cycle_loss(const torch::Tensor& x, const torch::Tensor& x_rec, const torch::Tensor& y,
                                const torch::Tensor& y_rec) {
  if (!x.sizes().equals(x_rec.sizes()) || !y.sizes().equals(y_rec.sizes()))
    throw InvalidInput("cycle_loss: dimension mismatch");
  return (x_rec - x).abs().mean() + (y_rec - y).abs().mean();
}

/// Loss the discriminator minimizes for one domain.
inline torch::Tensor discriminator_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits,
                                        GanMode mode) {
  if (mode == GanMode::LSGAN)
    return 0.5 * ((real_logits - 1.0).pow(2).mean() + fake_logits.pow(2).mean());
  return 0.5 * (torch::binary_cross_entropy_with_logits(real_logits, torch::ones_like(real_logits)) +
                torch::binary_cross_entropy_with_logits(fake_logits, torch::zeros_like(fake_logits)));
}

/// Loss the generator minimizes against one discriminator (non-saturating for BCE).
inline torch::Tensor generator_adv_loss(const torch::Tensor& fake_logits, GanMode mode) {
  if (mode == GanMode::LSGAN) return (fake_logits - 1.0).pow(2).mean();
  return torch::binary_cross_entropy_with_logits(fake_logits, torch::ones_like(fake_logits));
}

struct ObjectiveTerms {
  torch::Tensor adv_g;  // L_GAN(G, D_Y, X, Y)
  torch::Tensor adv_f;  // L_GAN(F, D_X, Y, X)
  torch::Tensor cyc;    // L_cyc(G, F)
  torch::Tensor total;  // adv_g + adv_f + lambda * cyc
};

/// Minimax value L(G, F, D_X, D_Y) on one batch, differentiable in all four
/// networks: generators descend it, discriminators ascend it.
template <class Gen, class Fwd, class DiscX, class DiscY>
ObjectiveTerms full_objective(Gen& G, Fwd& F, DiscX& D_X, DiscY& D_Y, const torch::Tensor& x, const torch::Tensor& y,
                              double lambda) {
  const auto fake_y = G->forward(x);
  const auto fake_x = F->forward(y);
  ObjectiveTerms t;
  t.adv_g = gan_value(D_Y->forward(y), D_Y->forward(fake_y));
  t.adv_f = gan_value(D_X->forward(x), D_X->forward(fake_x));
  t.cyc = cycle_loss(x, F->forward(fake_y), y, G->forward(fake_x));
  t.total = t.adv_g + t.adv_f + lambda * t.cyc;
  return t;
}

// ---- training ---------------------------------------------------------------

/// History buffer of generated images fed to the discriminators.
class ImagePool {
 public:
  ImagePool(int size, std::uint64_t seed) : size_(size), rng_(seed) {}

  torch::Tensor query(const torch::Tensor& batch) {
    if (size_ == 0) return batch;
    std::vector<torch::Tensor> out;
    for (int64_t i = 0; i < batch.size(0); ++i) {
      auto img = batch[i].unsqueeze(0).detach().clone();
      if (static_cast<int>(images_.size()) < size_) {
        images_.push_back(img);
        out.push_back(img);
      } else if (std::uniform_real_distribution<double>(0, 1)(rng_) > 0.5) {
        const auto k = std::uniform_int_distribution<std::size_t>(0, images_.size() - 1)(rng_);
        out.push_back(images_[k]);
        images_[k] = img;
      } else {
        out.push_back(img);
      }
    }
    return torch::cat(out, 0);
  }

 private:
  int size_;
  std::mt19937_64 rng_;
  std::vector<torch::Tensor> images_;
};

inline void require_healthy(const Manifest& m, const char* role) {
  for (const auto& r : m.records)
    if (r.health != Health::NORMAL || !r.annotations.empty())
      throw InvalidInput(std::string("translator training rejects annotated record ") + r.id + " in the " + role +
                         " set");
}

inline void save_checkpoint(const TranslatorModel& model, const std::filesystem::path& path);

struct TrainResult {
  TranslatorModel model;
  TrainLog log;
};

/// CycleGAN training between unpaired healthy low-density (`source`) and
/// high-density (`target`) sets. Each epoch visits max(|X|, |Y|) samples: X in
/// a seeded permutation, Y drawn at random. Images must already have the
/// configured dims. `on_step` (optional) sees every logged step.
inline TrainResult train_cyclegan(const Manifest& source, const Manifest& target, TranslatorConfig config,
                                  std::string key = "model",
                                  const std::function<void(const TrainStep&)>& on_step = nullptr) {
  config.validate();
  require_healthy(source, "source");
  require_healthy(target, "target");
  if (source.records.empty() || target.records.empty()) throw InvalidInput("translator training needs both domains");
  auto to_tensors = [&](const Manifest& m) {
    std::vector<torch::Tensor> out;
    for (const auto& r : m.records) {
      if (r.image.height != config.height || r.image.width != config.width)
        throw InvalidInput("record " + r.id + " is " + std::to_string(r.image.height) + "x" +
                           std::to_string(r.image.width) + ", translator expects " + std::to_string(config.height) +
                           "x" + std::to_string(config.width));
      out.push_back(to_tensor(r.image));
    }
    return out;
  };
  const auto xs = to_tensors(source);
  const auto ys = to_tensors(target);

  TrainResult res{TranslatorModel(key, config), {}};
  auto& m = res.model;
  auto& log = res.log;
  std::vector<torch::Tensor> gen_params, disc_params;
  for (auto& p : m.G->parameters()) gen_params.push_back(p);
  for (auto& p : m.F->parameters()) gen_params.push_back(p);
  for (auto& p : m.D_X->parameters()) disc_params.push_back(p);
  for (auto& p : m.D_Y->parameters()) disc_params.push_back(p);
  auto adam = torch::optim::AdamOptions(config.lr).betas({config.beta1, config.beta2});
  torch::optim::Adam opt_g(gen_params, adam);
  torch::optim::Adam opt_d(disc_params, adam);
  ImagePool pool_x(config.pool_size, mix_seed(config.seed, 11)), pool_y(config.pool_size, mix_seed(config.seed, 12));
  std::mt19937_64 rng(mix_seed(config.seed, 13));

  const int per_epoch = static_cast<int>((std::max(xs.size(), ys.size()) + config.batch_size - 1) / config.batch_size);
  const int total = config.max_steps > 0 ? config.max_steps : config.epochs * per_epoch;
  const int decay_from = static_cast<int>(std::floor(config.decay_start * total));
  auto set_lr = [](torch::optim::Optimizer& o, double lr) {
    for (auto& g : o.param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr);
  };

  std::vector<std::size_t> order(xs.size());
  int step = 0;
  for (int epoch = 0; step < total; ++epoch) {
    log.epoch_starts.push_back(step);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int b = 0; b < per_epoch && step < total; ++b, ++step) {
      std::vector<torch::Tensor> xb, yb;
      for (int k = 0; k < config.batch_size; ++k) {
        xb.push_back(xs[order[(static_cast<std::size_t>(b) * config.batch_size + k) % xs.size()]]);
        yb.push_back(ys[std::uniform_int_distribution<std::size_t>(0, ys.size() - 1)(rng)]);
      }
      const auto x = torch::cat(xb, 0), y = torch::cat(yb, 0);
      const double factor = step < decay_from ? 1.0 : 1.0 - double(step - decay_from) / double(total - decay_from + 1);
      const double lr = config.lr * factor;
      set_lr(opt_g, lr);
      set_lr(opt_d, lr);

      TrainStep s;
      s.step = step;
      s.epoch = epoch;
      s.lr = lr;

      // Generators, with discriminators frozen.
      for (auto& p : disc_params) p.set_requires_grad(false);
      opt_g.zero_grad();
      const auto fake_y = m.G->forward(x);
      const auto fake_x = m.F->forward(y);
      const auto adv_g = generator_adv_loss(m.D_Y->forward(fake_y), config.gan_mode);
      const auto adv_f = generator_adv_loss(m.D_X->forward(fake_x), config.gan_mode);
      const auto cyc = cycle_loss(x, m.F->forward(fake_y), y, m.G->forward(fake_x));
      auto loss_g = adv_g + adv_f + config.lambda_cyc * cyc;
      if (config.lambda_identity > 0)
        loss_g = loss_g + config.lambda_cyc * config.lambda_identity *
                              ((m.G->forward(y) - y).abs().mean() + (m.F->forward(x) - x).abs().mean());
      for (auto& p : disc_params) p.set_requires_grad(true);
      if (!std::isfinite(loss_g.item<double>())) {
        s.skipped = true;
        log.events.push_back("step " + std::to_string(step) + ": non-finite generator loss, step skipped");
        log.steps.push_back(s);
        if (on_step) on_step(s);
        continue;
      }
      loss_g.backward();
      opt_g.step();

      // Discriminators on real vs pooled fakes.
      opt_d.zero_grad();
      const auto loss_dy = discriminator_loss(m.D_Y->forward(y), m.D_Y->forward(pool_y.query(fake_y.detach())),
                                              config.gan_mode);
      const auto loss_dx = discriminator_loss(m.D_X->forward(x), m.D_X->forward(pool_x.query(fake_x.detach())),
                                              config.gan_mode);
      const auto loss_d = loss_dy + loss_dx;
      if (!std::isfinite(loss_d.item<double>())) {
        s.skipped = true;
        log.events.push_back("step " + std::to_string(step) + ": non-finite discriminator loss, step skipped");
      } else {
        loss_d.backward();
        opt_d.step();
      }
      s.gen_adv_g = adv_g.item<double>();
      s.gen_adv_f = adv_f.item<double>();
      s.cycle = cyc.item<double>();
      s.disc_y = loss_dy.item<double>();
      s.disc_x = loss_dx.item<double>();
      log.steps.push_back(s);
      if (on_step) on_step(s);
    }
    m.epochs_trained = epoch + 1;
    m.steps_trained = step;
    if (config.checkpoint_every > 0 && !config.checkpoint_dir.empty() && (epoch + 1) % config.checkpoint_every == 0)
      save_checkpoint(m, config.checkpoint_dir / (key + "_epoch" + std::to_string(epoch + 1) + ".pt"));
  }
  m.steps_trained = step;
  return res;
}

// ---- inference --------------------------------------------------------------

/// Low -> high density through G. Geometry is unchanged, so annotations are
/// carried over verbatim.
inline MammogramRecord translate(const TranslatorModel& model, const MammogramRecord& record) {
  if (record.image.height != model.config.height || record.image.width != model.config.width)
    throw InvalidInput("translate: record " + record.id + " dims do not match model " + model.key);
  torch::NoGradGuard guard;
  auto G = model.G;
  return synthetic_record(record, model.key, to_image(G->forward(to_tensor(record.image)), record.image.bit_depth));
}

// ---- checkpoints ------------------------------------------------------------

inline json checkpoint_meta(const TranslatorModel& m) {
  return {{"format", "densesynth-cyclegan-1"},
          {"key", m.key},
          {"epochs_trained", m.epochs_trained},
          {"steps_trained", m.steps_trained},
          {"seed", m.config.seed},
          {"config", translator_config_to_json(m.config)}};
}

inline void save_checkpoint(const TranslatorModel& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  torch::serialize::OutputArchive root;
  auto nested = [&](const char* name, const nn::Module& net) {
    torch::serialize::OutputArchive a;
    net.save(a);
    root.write(name, a);
  };
  nested("G", *model.G);
  nested("F", *model.F);
  nested("D_X", *model.D_X);
  nested("D_Y", *model.D_Y);
  root.write("meta", c10::IValue(checkpoint_meta(model).dump()));
  const auto tmp = path.string() + ".tmp";
  root.save_to(tmp);
  std::filesystem::rename(tmp, path);
}

inline TranslatorModel load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InvalidInput("no checkpoint at " + path.string());
  torch::serialize::InputArchive root;
  root.load_from(path.string());
  c10::IValue meta_value;
  if (!root.try_read("meta", meta_value) || !meta_value.isString())
    throw InvalidInput("checkpoint " + path.string() + " has no metadata");
  const auto meta = json::parse(meta_value.toStringRef());
  if (meta.value("format", "") != "densesynth-cyclegan-1")
    throw InvalidInput("unsupported checkpoint format in " + path.string());
  TranslatorModel m(meta.at("key").get<std::string>(), translator_config_from_json(meta.at("config")));
  m.epochs_trained = meta.value("epochs_trained", 0);
  m.steps_trained = meta.value("steps_trained", 0);
  auto nested = [&](const char* name, nn::Module& net) {
    torch::serialize::InputArchive a;
    root.read(name, a);
    net.load(a);
  };
  nested("G", *m.G);
  nested("F", *m.F);
  nested("D_X", *m.D_X);
  nested("D_Y", *m.D_Y);
  return m;
}

}  // namespace densesynth::translator
