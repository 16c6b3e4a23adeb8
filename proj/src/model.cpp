// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "aftunet/model.hpp"

#include <random>

#include "aftunet/errors.hpp"
#include "aftunet/slice_group.hpp"

namespace aft {

void ModelConfig::validate() const {
  codec.validate();
  validate_group_shape(neighbors, frequency);
  if (heads < 1 || codec.latent_channels() % heads != 0) {
    throw ConfigError("heads (" + std::to_string(heads) + ") must divide the last channel width (" +
                      std::to_string(codec.latent_channels()) + ")");
  }
  if (layers < 0) throw ConfigError("layers must be >= 0");
  const int f = codec.downsample_factor();
  if (height < 1 || width < 1 || height % f != 0 || width % f != 0) {
    throw ConfigError("height/width (" + std::to_string(height) + "x" + std::to_string(width) +
                      ") must be positive multiples of " + std::to_string(f));
  }
}

TransformerConfig ModelConfig::transformer() const {
  TransformerConfig t;
  t.layers = layers;
  t.heads = heads;
  t.channels = codec.latent_channels();
  t.height = height / codec.downsample_factor();
  t.width = width / codec.downsample_factor();
  t.neighbors = neighbors;
  t.shared_merge_fc = shared_merge_fc;
  return t;
}

namespace {

const ModelConfig& validated(const ModelConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

AftUnet::AftUnet(const ModelConfig& cfg)
    : cfg_(validated(cfg)),
      encoder_(cfg.codec, store_),
      transformer_(cfg.transformer(), store_),
      decoder_(cfg.codec, store_) {}

void AftUnet::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  encoder_.init(rng);
  transformer_.init(rng);
  decoder_.init(rng);
  // parameters live on the f32 grid so checkpoints are exact
  for (auto& p : store_.params()) {
    for (double& x : p.tensor.mutable_data()) x = static_cast<float>(x);
  }
}

Tensor AftUnet::forward(const Tensor& x, AttentionCounters* counters) const {
  const Shape want{cfg_.neighbors, cfg_.codec.in_channels, cfg_.height, cfg_.width};
  if (x.shape() != want) {
    throw ShapeError("model expects slice group " + shape_str(want) + ", got " +
                     shape_str(x.shape()));
  }
  EncoderOutput enc = encoder_.forward(x);
  const Tensor fused = transformer_.forward(enc.features, counters);
  return decoder_.forward(fused, enc.skips);
}

}  // namespace aft
