// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Axial fusion transformer. Tokens are kept as [N_A, P, C_L] with
// P = H_L * W_L and p = W_L * h + w. Each block runs
//
//   z' = z  + FC_inter(inter_attention(QKV_axial(LN(z))))
//   z''= z' + FC_intra(intra_attention(QKV_slice(LN(z'))))
//   out= z''+ MLP(LN(z''))

#pragma once

#include <random>
#include <string>
#include <vector>

#include "aftunet/attention.hpp"
#include "aftunet/parameter.hpp"
#include "aftunet/tensor.hpp"

namespace aft {

struct TransformerConfig {
  int layers = 6;     // L
  int heads = 8;      // A
  int channels = 256; // C_L
  int height = 4;     // H_L
  int width = 4;      // W_L
  int neighbors = 8;  // N_A
  int mlp_ratio = 4;
  /// One head-merge projection shared by both attention passes instead of
  /// one per pass.
  bool shared_merge_fc = false;

  void validate() const;
  int positions() const { return height * width; }
  int head_width() const { return channels / heads; }
};

/// [N, C, H, W] feature maps -> [N, H*W, C] tokens and back.
Tensor to_tokens(const Tensor& maps);
Tensor from_tokens(const Tensor& tokens, std::int64_t height, std::int64_t width);

/// Elementwise g + e; both [N, P, C].
Tensor add_positional(const Tensor& g, const Tensor& e);

struct Qkv {
  Tensor q, k, v;  // [N, P, C_L], head a in channel block a
};

/// LayerNorm and one Q/K/V weight set; the three matrices are C_L x C_L,
/// i.e. A stacked C_h x C_L head projections, without bias.
struct QkvProjection {
  Tensor ln_gamma, ln_beta, wq, wk, wv;

  QkvProjection() = default;
  QkvProjection(ParameterStore& store, const std::string& name, int channels);
  void init(std::mt19937_64& rng);
  Qkv forward(const Tensor& z) const;
};

/// Rows [a*C_h, (a+1)*C_h) of a stacked projection applied to LN'd tokens.
Qkv qkv_project_head(const Tensor& z, const QkvProjection& p, int head, int heads);

struct Linear {
  Tensor weight, bias;

  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, int in, int out);
  void init(std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
};

/// FC(concat of head outputs) + residual. `u` already holds the heads
/// concatenated along channels.
Tensor head_merge(const Tensor& u, const Tensor& z_prev, const Linear& fc);

struct Mlp {
  Tensor ln_gamma, ln_beta;
  Linear fc1, fc2;

  Mlp() = default;
  Mlp(ParameterStore& store, const std::string& name, int channels, int hidden);
  void init(std::mt19937_64& rng);
};

/// MLP(LN(z)) + z.
Tensor mlp_residual(const Tensor& z, const Mlp& mlp);

class AftBlock {
 public:
  AftBlock() = default;
  AftBlock(const TransformerConfig& cfg, ParameterStore& store, const std::string& name);
  void init(std::mt19937_64& rng);
  Tensor forward(const Tensor& z, AttentionCounters* counters = nullptr) const;

  QkvProjection axial, slice;
  Linear merge_inter, merge_intra;  // merge_intra unused when shared
  Mlp mlp;

 private:
  int heads_ = 1;
  bool shared_ = false;
};

class AxialFusionTransformer {
 public:
  AxialFusionTransformer() = default;
  AxialFusionTransformer(const TransformerConfig& cfg, ParameterStore& store,
                         const std::string& prefix = "transformer");
  void init(std::mt19937_64& rng);
  /// g: level-B feature maps [N_A, C_L, H_L, W_L]; returns the same shape.
  /// Throws NumericError naming the first block with non-finite output.
  Tensor forward(const Tensor& g, AttentionCounters* counters = nullptr) const;

  const TransformerConfig& config() const { return cfg_; }
  const Tensor& positional() const { return pos_; }
  const std::vector<AftBlock>& blocks() const { return blocks_; }

 private:
  TransformerConfig cfg_;
  Tensor pos_;  // [N_A, P, C_L]
  std::vector<AftBlock> blocks_;
};

}  // namespace aft
