// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "aftunet/codec.hpp"

#include "aftunet/errors.hpp"
#include "aftunet/ops.hpp"

namespace aft {

void CodecConfig::validate() const {
  if (blocks < 1) throw ConfigError("blocks must be >= 1, got " + std::to_string(blocks));
  if (static_cast<int>(channels.size()) != blocks) {
    throw ConfigError("channels must list one width per block (" + std::to_string(blocks) +
                      "), got " + std::to_string(channels.size()));
  }
  for (int c : channels) {
    if (c <= 0) throw ConfigError("channels must be > 0, got " + std::to_string(c));
  }
  if (classes < 2) throw ConfigError("classes must be >= 2, got " + std::to_string(classes));
  if (kernel < 1 || kernel % 2 == 0) {
    throw ConfigError("kernel must be odd and >= 1, got " + std::to_string(kernel));
  }
  if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
}

void check_spatial_divisibility(std::int64_t height, std::int64_t width, const CodecConfig& cfg) {
  const std::int64_t f = cfg.downsample_factor();
  if (height % f == 0 && width % f == 0) return;
  const auto pad = [f](std::int64_t n) { return (f - n % f) % f; };
  throw ShapeError("input " + std::to_string(height) + "x" + std::to_string(width) +
                   " not divisible by " + std::to_string(f) + "; pad height by " +
                   std::to_string(pad(height)) + " and width by " + std::to_string(pad(width)));
}

ConvNormRelu::ConvNormRelu(ParameterStore& store, const std::string& name, int cin, int cout,
                           int kernel)
    : weight(store.add(name + ".weight", {cout, cin, kernel, kernel})),
      gamma(store.add(name + ".norm.gamma", {cout})),
      beta(store.add(name + ".norm.beta", {cout})) {}

void ConvNormRelu::init(std::mt19937_64& rng) {
  init::kaiming_normal(weight, weight.dim(1) * weight.dim(2) * weight.dim(3), rng);
  init::fill(gamma, 1.0);
  init::fill(beta, 0.0);
}

Tensor ConvNormRelu::forward(const Tensor& x) const {
  const int pad = static_cast<int>(weight.dim(2) / 2);
  return ops::relu(ops::instance_norm(ops::conv2d(x, weight, Tensor(), pad), gamma, beta));
}

Encoder::Encoder(const CodecConfig& cfg, ParameterStore& store, const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  int cin = cfg.in_channels;
  for (int b = 0; b < cfg.blocks; ++b) {
    const int c = cfg.channels[static_cast<std::size_t>(b)];
    const std::string name = prefix + ".block" + std::to_string(b + 1);
    convs_.emplace_back(store, name + ".conv1", cin, c, cfg.kernel);
    convs_.emplace_back(store, name + ".conv2", c, c, cfg.kernel);
    cin = c;
  }
}

void Encoder::init(std::mt19937_64& rng) {
  for (auto& c : convs_) c.init(rng);
}

EncoderOutput Encoder::forward(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != cfg_.in_channels) {
    throw ShapeError("encoder expects [N, " + std::to_string(cfg_.in_channels) +
                     ", H, W], got " + shape_str(x.shape()));
  }
  check_spatial_divisibility(x.dim(2), x.dim(3), cfg_);
  EncoderOutput out;
  Tensor h = x;
  for (int b = 0; b < cfg_.blocks; ++b) {
    if (b > 0) {
      out.skips.push_back(h);
      h = ops::maxpool2(h);
    }
    h = convs_[static_cast<std::size_t>(2 * b)].forward(h);
    h = convs_[static_cast<std::size_t>(2 * b + 1)].forward(h);
  }
  out.features = h;
  return out;
}

Decoder::Decoder(const CodecConfig& cfg, ParameterStore& store, const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  for (int b = cfg.blocks - 1; b >= 1; --b) {
    const int below = cfg.channels[static_cast<std::size_t>(b)];
    const int c = cfg.channels[static_cast<std::size_t>(b - 1)];
    const std::string name = prefix + ".up" + std::to_string(b);
    convs_.emplace_back(store, name + ".conv1", below + c, c, cfg.kernel);
    convs_.emplace_back(store, name + ".conv2", c, c, cfg.kernel);
  }
  head_weight_ = store.add(prefix + ".head.weight", {cfg.classes, cfg.channels.front(), 1, 1});
  head_bias_ = store.add(prefix + ".head.bias", {cfg.classes});
}

void Decoder::init(std::mt19937_64& rng) {
  for (auto& c : convs_) c.init(rng);
  init::xavier_uniform(head_weight_, head_weight_.dim(1), head_weight_.dim(0), rng);
  init::fill(head_bias_, 0.0);
}

Tensor Decoder::forward(const Tensor& z, const std::vector<Tensor>& skips) const {
  if (static_cast<int>(skips.size()) != cfg_.blocks - 1) {
    throw ShapeError("decoder expects " + std::to_string(cfg_.blocks - 1) + " skip levels, got " +
                     std::to_string(skips.size()));
  }
  Tensor h = z;
  std::size_t k = 0;
  for (int b = cfg_.blocks - 1; b >= 1; --b) {
    h = ops::upsample2(h);
    const Tensor& skip = skips[static_cast<std::size_t>(b - 1)];
    if (skip.rank() != 4 || skip.dim(0) != h.dim(0) || skip.dim(2) != h.dim(2) ||
        skip.dim(3) != h.dim(3)) {
      throw ShapeError("skip level " + std::to_string(b) + " has shape " +
                       shape_str(skip.shape()) + ", upsampled features " + shape_str(h.shape()));
    }
    h = ops::concat({h, skip}, 1);
    h = convs_[k++].forward(h);
    h = convs_[k++].forward(h);
  }
  return ops::conv2d(h, head_weight_, head_bias_, 0);
}

}  // namespace aft
