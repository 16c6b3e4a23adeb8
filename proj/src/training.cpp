// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "aftunet/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "aftunet/errors.hpp"
#include "aftunet/losses.hpp"
#include "aftunet/slice_group.hpp"
#include "aftunet/tensor_file.hpp"

namespace aft {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1, got " + std::to_string(epochs));
  if (phase1_epochs < 0 || phase1_epochs > epochs) {
    throw ConfigError("phase1_epochs must lie in [0, epochs], got " + std::to_string(phase1_epochs));
  }
  if (!(lr_phase1 > 0.0)) throw ConfigError("lr_phase1 must be > 0");
  if (!(lr_phase2 > 0.0)) throw ConfigError("lr_phase2 must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(elastic_amplitude >= 0.0)) throw ConfigError("elastic_amplitude must be >= 0");
  if (!(elastic_sigma > 0.0)) throw ConfigError("elastic_sigma must be > 0");
}

double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) {
    throw ConfigError("epoch " + std::to_string(epoch) + " outside [0, " +
                      std::to_string(cfg.epochs) + ")");
  }
  return epoch < cfg.phase1_epochs ? cfg.lr_phase1 : cfg.lr_phase2;
}

void adam_step(ParameterStore& params, AdamState& state, double lr, const TrainConfig& cfg) {
  auto& ps = params.params();
  for (const auto& p : ps) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + p.name);
    }
  }
  if (state.m.empty()) {
    for (const auto& p : ps) {
      state.m.emplace_back(static_cast<std::size_t>(p.tensor.numel()), 0.0);
      state.v.emplace_back(static_cast<std::size_t>(p.tensor.numel()), 0.0);
    }
  }
  if (state.m.size() != ps.size()) throw ShapeError("optimizer state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < ps.size(); ++k) {
    auto theta = ps[k].tensor.mutable_data();
    const auto grad = ps[k].tensor.grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i] + cfg.weight_decay * theta[i];
      m[i] = static_cast<float>(cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g);
      v[i] = static_cast<float>(cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g);
      const double step = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
      theta[i] = static_cast<float>(theta[i] - step);
    }
  }
}

Scan fit_to_model(const Scan& scan, const ModelConfig& cfg) {
  return {pad_to(scan.image, cfg.height, cfg.width), pad_to(scan.labels, cfg.height, cfg.width)};
}

Trainer::Trainer(AftUnet& model, TrainConfig cfg) : model_(model), cfg_(std::move(cfg)) {
  cfg_.validate();
}

void Trainer::restore(int epoch, AdamState state) {
  if (epoch < 0) throw FormatError("negative epoch in checkpoint");
  epoch_ = epoch;
  state_ = std::move(state);
}

namespace {

std::mt19937_64 epoch_rng(std::uint64_t seed, int epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x7a11u};
  return std::mt19937_64(seq);
}

void check_scan(const Scan& s, const ModelConfig& cfg, std::size_t index) {
  if (s.image.height != cfg.height || s.image.width != cfg.width ||
      s.image.channels != cfg.codec.in_channels || !same_grid(s.image, s.labels)) {
    throw ShapeError("scan " + std::to_string(index) + " is " + std::to_string(s.image.height) +
                     "x" + std::to_string(s.image.width) + " with " +
                     std::to_string(s.image.channels) + " channels; model expects " +
                     std::to_string(cfg.height) + "x" + std::to_string(cfg.width));
  }
}

}  // namespace

double Trainer::train_epoch(const std::vector<Scan>& scans) {
  if (scans.empty()) throw ShapeError("training set is empty");
  const ModelConfig& mc = model_.config();
  for (std::size_t i = 0; i < scans.size(); ++i) check_scan(scans[i], mc, i);
  const double lr = lr_at(epoch_, cfg_);
  std::mt19937_64 rng = epoch_rng(cfg_.seed, epoch_);
  std::vector<std::size_t> order(scans.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  double total = 0.0;
  for (std::size_t i : order) {
    const Scan* scan = &scans[i];
    Scan warped;
    if (cfg_.elastic) {
      warped = elastic_augment(scan->image, scan->labels, cfg_.elastic_amplitude,
                               cfg_.elastic_sigma, rng());
      scan = &warped;
    }
    const int d = std::uniform_int_distribution<int>(0, scan->image.depth - 1)(rng);
    const SliceGroup g = sample_slice_group(scan->image, scan->labels, d, mc.neighbors, mc.frequency);
    model_.parameters().zero_grad();
    const Tensor loss = combined_loss(model_.forward(g.slices), g.labels);
    if (!std::isfinite(loss.item())) {
      throw NumericError("non-finite loss on scan " + std::to_string(i) + " at epoch " +
                         std::to_string(epoch_));
    }
    loss.backward();
    adam_step(model_.parameters(), state_, lr, cfg_);
    total += loss.item();
  }
  ++epoch_;
  return total / static_cast<double>(scans.size());
}

double probe_loss(const AftUnet& model, const std::vector<Scan>& scans, int per_scan) {
  if (scans.empty() || per_scan < 1) throw ShapeError("probe needs scans and per_scan >= 1");
  const ModelConfig& mc = model.config();
  NoGradGuard no_grad;
  double total = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < scans.size(); ++i) {
    check_scan(scans[i], mc, i);
    const int depth = scans[i].image.depth;
    for (int k = 0; k < per_scan; ++k) {
      const int d = std::min(depth - 1, static_cast<int>((k + 0.5) * depth / per_scan));
      const SliceGroup g =
          sample_slice_group(scans[i].image, scans[i].labels, d, mc.neighbors, mc.frequency);
      total += combined_loss(model.forward(g.slices), g.labels).item();
      ++count;
    }
  }
  return total / count;
}

namespace {

constexpr float kConfigVersion = 1.0f;
constexpr std::size_t kConfigHeader = 12;

const char* const kConfigFields[kConfigHeader] = {
    "version", "in_channels", "classes", "blocks", "kernel",    "layers",
    "heads",   "n_a",         "n_f",     "height", "width", "shared_merge_fc"};

}  // namespace

std::vector<float> encode_model_config(const ModelConfig& cfg) {
  std::vector<float> v{kConfigVersion,
                       static_cast<float>(cfg.codec.in_channels),
                       static_cast<float>(cfg.codec.classes),
                       static_cast<float>(cfg.codec.blocks),
                       static_cast<float>(cfg.codec.kernel),
                       static_cast<float>(cfg.layers),
                       static_cast<float>(cfg.heads),
                       static_cast<float>(cfg.neighbors),
                       static_cast<float>(cfg.frequency),
                       static_cast<float>(cfg.height),
                       static_cast<float>(cfg.width),
                       cfg.shared_merge_fc ? 1.0f : 0.0f};
  for (int c : cfg.codec.channels) v.push_back(static_cast<float>(c));
  return v;
}

ModelConfig decode_model_config(const std::vector<float>& v) {
  if (v.size() < kConfigHeader || v[0] != kConfigVersion) {
    throw FormatError("unsupported model config record");
  }
  auto as_int = [&](std::size_t i) { return static_cast<int>(v[i]); };
  ModelConfig cfg;
  cfg.codec.in_channels = as_int(1);
  cfg.codec.classes = as_int(2);
  cfg.codec.blocks = as_int(3);
  cfg.codec.kernel = as_int(4);
  cfg.layers = as_int(5);
  cfg.heads = as_int(6);
  cfg.neighbors = as_int(7);
  cfg.frequency = as_int(8);
  cfg.height = as_int(9);
  cfg.width = as_int(10);
  cfg.shared_merge_fc = v[11] != 0.0f;
  if (v.size() != kConfigHeader + static_cast<std::size_t>(std::max(cfg.codec.blocks, 0))) {
    throw FormatError("model config record has " + std::to_string(v.size()) + " values");
  }
  cfg.codec.channels.clear();
  for (std::size_t i = kConfigHeader; i < v.size(); ++i) cfg.codec.channels.push_back(as_int(i));
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("stored model config is invalid: ") + e.what());
  }
  return cfg;
}

void save_checkpoint(const std::filesystem::path& path, const AftUnet& model,
                     const Trainer* trainer) {
  std::vector<NamedTensor> entries;
  const auto cfg = encode_model_config(model.config());
  entries.push_back({"meta.config", {static_cast<std::int64_t>(cfg.size())}, cfg});
  for (const auto& p : model.parameters().params()) entries.push_back(to_named(p.name, p.tensor));
  if (trainer) {
    const AdamState& s = trainer->optimizer();
    entries.push_back({"meta.epoch", {1}, {static_cast<float>(trainer->epoch())}});
    entries.push_back({"adam.step", {1}, {static_cast<float>(s.step)}});
    const auto& ps = model.parameters().params();
    for (std::size_t k = 0; k < s.m.size(); ++k) {
      entries.push_back({"adam.m." + ps[k].name, ps[k].tensor.shape(),
                         std::vector<float>(s.m[k].begin(), s.m[k].end())});
      entries.push_back({"adam.v." + ps[k].name, ps[k].tensor.shape(),
                         std::vector<float>(s.v[k].begin(), s.v[k].end())});
    }
  }
  write_tensor_file(path, entries);
}

namespace {

std::map<std::string, const NamedTensor*> index_entries(const std::vector<NamedTensor>& entries) {
  std::map<std::string, const NamedTensor*> out;
  for (const auto& e : entries) {
    if (!out.emplace(e.name, &e).second) throw FormatError("duplicate checkpoint entry " + e.name);
  }
  return out;
}

const NamedTensor& require(const std::map<std::string, const NamedTensor*>& idx,
                           const std::string& name, const Shape& shape) {
  auto it = idx.find(name);
  if (it == idx.end()) throw FormatError("checkpoint lacks entry " + name);
  if (it->second->shape != shape) {
    throw FormatError("checkpoint entry " + name + " has shape " + shape_str(it->second->shape) +
                      ", expected " + shape_str(shape));
  }
  return *it->second;
}

}  // namespace

ModelConfig read_checkpoint_config(const std::filesystem::path& path) {
  for (const auto& e : read_tensor_file(path)) {
    if (e.name == "meta.config") return decode_model_config(e.values);
  }
  throw FormatError("checkpoint lacks entry meta.config");
}

void load_checkpoint(const std::filesystem::path& path, AftUnet& model, Trainer* trainer) {
  const auto entries = read_tensor_file(path);
  const auto idx = index_entries(entries);
  auto cfg_it = idx.find("meta.config");
  if (cfg_it == idx.end()) throw FormatError("checkpoint lacks entry meta.config");
  const auto stored = cfg_it->second->values;
  const auto expected = encode_model_config(model.config());
  if (stored != expected) {
    std::string diff;
    for (std::size_t i = 0; i < std::max(stored.size(), expected.size()); ++i) {
      const bool differs = i >= stored.size() || i >= expected.size() || stored[i] != expected[i];
      if (!differs) continue;
      const std::string field =
          i < kConfigHeader ? kConfigFields[i] : "channels[" + std::to_string(i - kConfigHeader) + "]";
      diff += (diff.empty() ? "" : ", ") + field;
      if (i >= kConfigHeader && stored.size() != expected.size()) break;
    }
    throw ConfigMismatchError("checkpoint config mismatch in " + diff);
  }

  auto& ps = model.parameters().params();
  std::vector<std::vector<double>> values;
  for (const auto& p : ps) {
    const auto& e = require(idx, p.name, p.tensor.shape());
    values.emplace_back(e.values.begin(), e.values.end());
  }
  AdamState state;
  int epoch = 0;
  if (trainer) {
    epoch = static_cast<int>(require(idx, "meta.epoch", {1}).values[0]);
    state.step = static_cast<std::int64_t>(require(idx, "adam.step", {1}).values[0]);
    if (state.step > 0) {
      for (const auto& p : ps) {
        const auto& m = require(idx, "adam.m." + p.name, p.tensor.shape()).values;
        const auto& v = require(idx, "adam.v." + p.name, p.tensor.shape()).values;
        state.m.emplace_back(m.begin(), m.end());
        state.v.emplace_back(v.begin(), v.end());
      }
    }
  }
  for (std::size_t k = 0; k < ps.size(); ++k) {
    std::copy(values[k].begin(), values[k].end(), ps[k].tensor.mutable_data().begin());
  }
  if (trainer) trainer->restore(epoch, std::move(state));
}

}  // namespace aft
