// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "aftunet/axial_fusion.hpp"

#include <cmath>

#include "aftunet/errors.hpp"
#include "aftunet/ops.hpp"

namespace aft {

void TransformerConfig::validate() const {
  if (layers < 0) throw ConfigError("layers must be >= 0, got " + std::to_string(layers));
  if (heads < 1) throw ConfigError("heads must be >= 1, got " + std::to_string(heads));
  if (channels < 1 || channels % heads != 0) {
    throw ConfigError("latent channels (" + std::to_string(channels) +
                      ") must be a positive multiple of heads (" + std::to_string(heads) + ")");
  }
  if (height < 1 || width < 1) throw ConfigError("latent grid must be at least 1x1");
  if (neighbors < 1) throw ConfigError("n_a must be >= 1");
  if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be >= 1");
}

Tensor to_tokens(const Tensor& maps) {
  if (maps.rank() != 4) throw ShapeError("to_tokens expects [N, C, H, W], got " + shape_str(maps.shape()));
  const Tensor t = ops::permute(maps, {0, 2, 3, 1});
  return ops::reshape(t, {maps.dim(0), maps.dim(2) * maps.dim(3), maps.dim(1)});
}

Tensor from_tokens(const Tensor& tokens, std::int64_t height, std::int64_t width) {
  if (tokens.rank() != 3 || tokens.dim(1) != height * width) {
    throw ShapeError("from_tokens: " + shape_str(tokens.shape()) + " is not a " +
                     std::to_string(height) + "x" + std::to_string(width) + " token grid");
  }
  const Tensor t = ops::reshape(tokens, {tokens.dim(0), height, width, tokens.dim(2)});
  return ops::permute(t, {0, 3, 1, 2});
}

Tensor add_positional(const Tensor& g, const Tensor& e) { return ops::add(g, e); }

QkvProjection::QkvProjection(ParameterStore& store, const std::string& name, int channels)
    : ln_gamma(store.add(name + ".norm.gamma", {channels})),
      ln_beta(store.add(name + ".norm.beta", {channels})),
      wq(store.add(name + ".wq", {channels, channels})),
      wk(store.add(name + ".wk", {channels, channels})),
      wv(store.add(name + ".wv", {channels, channels})) {}

void QkvProjection::init(std::mt19937_64& rng) {
  init::fill(ln_gamma, 1.0);
  init::fill(ln_beta, 0.0);
  const std::int64_t c = wq.dim(0);
  for (Tensor* w : {&wq, &wk, &wv}) init::xavier_uniform(*w, c, c, rng);
}

Qkv QkvProjection::forward(const Tensor& z) const {
  const Tensor x = ops::layer_norm(z, ln_gamma, ln_beta);
  return {ops::linear(x, wq, Tensor()), ops::linear(x, wk, Tensor()), ops::linear(x, wv, Tensor())};
}

Qkv qkv_project_head(const Tensor& z, const QkvProjection& p, int head, int heads) {
  const std::int64_t c = p.wq.dim(0);
  if (heads < 1 || c % heads != 0 || head < 0 || head >= heads) {
    throw ConfigError("invalid head " + std::to_string(head) + " of " + std::to_string(heads));
  }
  const std::int64_t ch = c / heads;
  const Tensor x = ops::layer_norm(z, p.ln_gamma, p.ln_beta);
  auto rows = [&](const Tensor& w) { return ops::narrow(w, 0, head * ch, ch); };
  return {ops::linear(x, rows(p.wq), Tensor()), ops::linear(x, rows(p.wk), Tensor()),
          ops::linear(x, rows(p.wv), Tensor())};
}

Linear::Linear(ParameterStore& store, const std::string& name, int in, int out)
    : weight(store.add(name + ".weight", {out, in})), bias(store.add(name + ".bias", {out})) {}

void Linear::init(std::mt19937_64& rng) {
  init::xavier_uniform(weight, weight.dim(1), weight.dim(0), rng);
  init::fill(bias, 0.0);
}

Tensor Linear::forward(const Tensor& x) const { return ops::linear(x, weight, bias); }

Tensor head_merge(const Tensor& u, const Tensor& z_prev, const Linear& fc) {
  return ops::add(fc.forward(u), z_prev);
}

Mlp::Mlp(ParameterStore& store, const std::string& name, int channels, int hidden)
    : ln_gamma(store.add(name + ".norm.gamma", {channels})),
      ln_beta(store.add(name + ".norm.beta", {channels})),
      fc1(store, name + ".fc1", channels, hidden),
      fc2(store, name + ".fc2", hidden, channels) {}

void Mlp::init(std::mt19937_64& rng) {
  init::fill(ln_gamma, 1.0);
  init::fill(ln_beta, 0.0);
  fc1.init(rng);
  fc2.init(rng);
}

Tensor mlp_residual(const Tensor& z, const Mlp& mlp) {
  const Tensor h = ops::relu(mlp.fc1.forward(ops::layer_norm(z, mlp.ln_gamma, mlp.ln_beta)));
  return ops::add(mlp.fc2.forward(h), z);
}

AftBlock::AftBlock(const TransformerConfig& cfg, ParameterStore& store, const std::string& name)
    : axial(store, name + ".axial", cfg.channels),
      slice(store, name + ".slice", cfg.channels),
      merge_inter(store, name + (cfg.shared_merge_fc ? ".merge" : ".merge_inter"), cfg.channels,
                  cfg.channels),
      mlp(store, name + ".mlp", cfg.channels, cfg.mlp_ratio * cfg.channels),
      heads_(cfg.heads),
      shared_(cfg.shared_merge_fc) {
  if (!shared_) merge_intra = Linear(store, name + ".merge_intra", cfg.channels, cfg.channels);
}

void AftBlock::init(std::mt19937_64& rng) {
  axial.init(rng);
  slice.init(rng);
  merge_inter.init(rng);
  if (!shared_) merge_intra.init(rng);
  mlp.init(rng);
}

Tensor AftBlock::forward(const Tensor& z, AttentionCounters* counters) const {
  const Qkv a = axial.forward(z);
  const Tensor z1 = head_merge(attention_inter(a.q, a.k, a.v, heads_, counters), z, merge_inter);
  const Qkv s = slice.forward(z1);
  const Tensor z2 = head_merge(attention_intra(s.q, s.k, s.v, heads_, counters), z1,
                               shared_ ? merge_inter : merge_intra);
  return mlp_residual(z2, mlp);
}

AxialFusionTransformer::AxialFusionTransformer(const TransformerConfig& cfg, ParameterStore& store,
                                               const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  pos_ = store.add(prefix + ".pos_embedding", {cfg.neighbors, cfg.positions(), cfg.channels});
  for (int l = 0; l < cfg.layers; ++l) {
    blocks_.emplace_back(cfg, store, prefix + ".block" + std::to_string(l + 1));
  }
}

void AxialFusionTransformer::init(std::mt19937_64& rng) {
  init::normal(pos_, 0.02, rng);
  for (auto& b : blocks_) b.init(rng);
}

Tensor AxialFusionTransformer::forward(const Tensor& g, AttentionCounters* counters) const {
  const Shape want{cfg_.neighbors, cfg_.channels, cfg_.height, cfg_.width};
  if (g.shape() != want) {
    throw ShapeError("transformer expects feature group " + shape_str(want) + ", got " +
                     shape_str(g.shape()));
  }
  Tensor z = add_positional(to_tokens(g), pos_);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    z = blocks_[l].forward(z, counters);
    for (double x : z.data()) {
      if (!std::isfinite(x)) {
        throw NumericError("non-finite activation after transformer block " +
                           std::to_string(l + 1));
      }
    }
  }
  return from_tokens(z, cfg_.height, cfg_.width);
}

}  // namespace aft
