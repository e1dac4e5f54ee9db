#pragma once

#include <algorithm>

#include <torch/torch.h>

namespace densesynth::translator {

namespace nn = torch::nn;

inline nn::InstanceNorm2d instance_norm(int64_t c) { return nn::InstanceNorm2d(nn::InstanceNorm2dOptions(c)); }

struct ResnetBlockImpl : nn::Module {
  nn::Sequential body;

  explicit ResnetBlockImpl(int64_t dim) {
    body = register_module(
        "body", nn::Sequential(nn::ReflectionPad2d(1), nn::Conv2d(nn::Conv2dOptions(dim, dim, 3)), instance_norm(dim),
                               nn::ReLU(true), nn::ReflectionPad2d(1), nn::Conv2d(nn::Conv2dOptions(dim, dim, 3)),
                               instance_norm(dim)));
  }

  torch::Tensor forward(const torch::Tensor& x) { return x + body->forward(x); }
};
TORCH_MODULE(ResnetBlock);

/// c7s1-k, two stride-2 downsamplings, `n_blocks` residual blocks, two
/// transposed-conv upsamplings, c7s1 to one channel with tanh.
/// Height and width must be divisible by 4.
struct ResnetGeneratorImpl : nn::Module {
  nn::Sequential net;

  ResnetGeneratorImpl(int64_t channels, int64_t ngf, int64_t n_blocks) {
    net = nn::Sequential(nn::ReflectionPad2d(3), nn::Conv2d(nn::Conv2dOptions(channels, ngf, 7)), instance_norm(ngf),
                         nn::ReLU(true));
    int64_t c = ngf;
    for (int i = 0; i < 2; ++i, c *= 2) {
      net->push_back(nn::Conv2d(nn::Conv2dOptions(c, c * 2, 3).stride(2).padding(1)));
      net->push_back(instance_norm(c * 2));
      net->push_back(nn::ReLU(true));
    }
    for (int64_t b = 0; b < n_blocks; ++b) net->push_back(ResnetBlock(c));
    for (int i = 0; i < 2; ++i, c /= 2) {
      net->push_back(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(c, c / 2, 3).stride(2).padding(1).output_padding(1)));
      net->push_back(instance_norm(c / 2));
      net->push_back(nn::ReLU(true));
    }
    net->push_back(nn::ReflectionPad2d(3));
    net->push_back(nn::Conv2d(nn::Conv2dOptions(ngf, channels, 7)));
    net->push_back(nn::Tanh());
    register_module("net", net);
  }

  torch::Tensor forward(const torch::Tensor& x) { return net->forward(x); }
};
TORCH_MODULE(ResnetGenerator);

/// 70x70 PatchGAN: three stride-2 4x4 convolutions then two stride-1 ones.
/// Emits one raw logit per patch.
struct PatchDiscriminatorImpl : nn::Module {
  nn::Sequential net;

  PatchDiscriminatorImpl(int64_t channels, int64_t ndf, int64_t n_layers = 3) {
    auto conv = [](int64_t in, int64_t out, int64_t stride) {
      return nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(stride).padding(1));
    };
    auto lrelu = [] { return nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2).inplace(true)); };
    net = nn::Sequential(conv(channels, ndf, 2), lrelu());
    int64_t mult = 1;
    for (int64_t n = 1; n <= n_layers; ++n) {
      const int64_t prev = mult;
      mult = std::min<int64_t>(int64_t{1} << n, 8);
      net->push_back(conv(ndf * prev, ndf * mult, n < n_layers ? 2 : 1));
      net->push_back(instance_norm(ndf * mult));
      net->push_back(lrelu());
    }
    net->push_back(conv(ndf * mult, 1, 1));
    register_module("net", net);
  }

  torch::Tensor forward(const torch::Tensor& x) { return net->forward(x); }
};
TORCH_MODULE(PatchDiscriminator);

/// N(0, 0.02) weights, zero biases, for every convolution.
inline void init_weights(nn::Module& m) {
  torch::NoGradGuard guard;
  for (auto& p : m.named_parameters()) {
    if (p.key().ends_with("weight") && p.value().dim() == 4)
      p.value().normal_(0.0, 0.02);
    else if (p.key().ends_with("bias"))
      p.value().zero_();
  }
}

}  // namespace densesynth::translator
