// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Slice-wise U-Net encoder/decoder. Both operate on slice-major batches
// [N_A, C, H, W]; the same weights are applied to every slice.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "aftunet/parameter.hpp"
#include "aftunet/tensor.hpp"

namespace aft {

struct CodecConfig {
  int blocks = 5;  // B
  std::vector<int> channels{16, 32, 64, 128, 256};
  int classes = 2;
  int kernel = 3;
  int in_channels = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  int latent_channels() const { return channels.back(); }
  /// Spatial reduction between input and latent grid (one pool between
  /// consecutive blocks).
  int downsample_factor() const { return 1 << (blocks - 1); }
};

/// conv(k x k, no bias) -> instance norm -> ReLU.
struct ConvNormRelu {
  Tensor weight, gamma, beta;

  ConvNormRelu() = default;
  ConvNormRelu(ParameterStore& store, const std::string& name, int cin, int cout, int kernel);
  void init(std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
};

struct EncoderOutput {
  Tensor features;             // level B, [N_A, C_L, H_L, W_L]
  std::vector<Tensor> skips;   // levels 1..B-1 (pre-pool), index 0 = level 1
};

class Encoder {
 public:
  Encoder() = default;
  Encoder(const CodecConfig& cfg, ParameterStore& store, const std::string& prefix = "encoder");
  void init(std::mt19937_64& rng);
  EncoderOutput forward(const Tensor& x) const;

 private:
  CodecConfig cfg_;
  std::vector<ConvNormRelu> convs_;  // two per block
};

class Decoder {
 public:
  Decoder() = default;
  Decoder(const CodecConfig& cfg, ParameterStore& store, const std::string& prefix = "decoder");
  void init(std::mt19937_64& rng);
  /// Logits [N_A, C_cls, H, W]; no softmax.
  Tensor forward(const Tensor& z, const std::vector<Tensor>& skips) const;

 private:
  CodecConfig cfg_;
  std::vector<ConvNormRelu> convs_;  // two per upsampling stage, deepest first
  Tensor head_weight_, head_bias_;
};

/// Checks H and W against the encoder's downsample factor; the message names
/// the padding needed.
void check_spatial_divisibility(std::int64_t height, std::int64_t width, const CodecConfig& cfg);

}  // namespace aft
