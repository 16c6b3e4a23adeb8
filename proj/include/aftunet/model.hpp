// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "aftunet/axial_fusion.hpp"
#include "aftunet/codec.hpp"
#include "aftunet/parameter.hpp"

namespace aft {

struct ModelConfig {
  CodecConfig codec;
  int layers = 6;      // L
  int heads = 8;       // A
  int neighbors = 8;   // N_A
  int frequency = 1;   // N_f
  int height = 64;     // padded input H
  int width = 64;      // padded input W
  bool shared_merge_fc = false;

  /// Throws ConfigError naming the field and the violated constraint.
  void validate() const;
  TransformerConfig transformer() const;
};

/// CNN encoder -> axial fusion transformer -> CNN decoder.
class AftUnet {
 public:
  explicit AftUnet(const ModelConfig& cfg);
  AftUnet(const AftUnet&) = delete;
  AftUnet& operator=(const AftUnet&) = delete;

  /// Deterministic initialization of every parameter from `seed`. Values
  /// are rounded to single precision.
  void init(std::uint64_t seed);

  /// x: slice group [N_A, C, H, W] -> logits [N_A, C_cls, H, W].
  Tensor forward(const Tensor& x, AttentionCounters* counters = nullptr) const;

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  const Encoder& encoder() const { return encoder_; }
  const Decoder& decoder() const { return decoder_; }
  const AxialFusionTransformer& transformer() const { return transformer_; }

 private:
  ModelConfig cfg_;
  ParameterStore store_;
  Encoder encoder_;
  AxialFusionTransformer transformer_;
  Decoder decoder_;
};

}  // namespace aft
