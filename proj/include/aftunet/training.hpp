// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "aftunet/model.hpp"
#include "aftunet/parameter.hpp"
#include "aftunet/synth.hpp"

namespace aft {

struct TrainConfig {
  int epochs = 550;
  int phase1_epochs = 500;
  double lr_phase1 = 1e-4;
  double lr_phase2 = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  bool elastic = false;
  double elastic_amplitude = 2.0;
  double elastic_sigma = 4.0;

  void validate() const;
};

/// lr_phase1 for epoch < phase1_epochs, lr_phase2 after. Throws ConfigError
/// outside [0, epochs).
double lr_at(int epoch, const TrainConfig& cfg);

struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<double>> m, v;  // one per parameter, store order
};

/// One Adam update with bias correction and weight decay added to the
/// gradient. Parameters and moments are rounded to f32 afterwards. Throws
/// NumericError naming the first parameter with a non-finite gradient,
/// before anything is modified.
void adam_step(ParameterStore& params, AdamState& state, double lr, const TrainConfig& cfg);

/// Pads the scan in-plane to the model input size.
Scan fit_to_model(const Scan& scan, const ModelConfig& cfg);

class Trainer {
 public:
  Trainer(AftUnet& model, TrainConfig cfg);

  /// One optimizer step per scan on a randomly centred group, scans in a
  /// shuffled order. Randomness is derived from (seed, epoch) only, so a
  /// restored trainer continues the same trajectory. Returns the mean loss.
  double train_epoch(const std::vector<Scan>& scans);

  int epoch() const { return epoch_; }
  std::int64_t steps() const { return state_.step; }
  const AdamState& optimizer() const { return state_; }
  const TrainConfig& config() const { return cfg_; }
  AftUnet& model() { return model_; }
  const AftUnet& model() const { return model_; }

  /// Used by checkpoint loading.
  void restore(int epoch, AdamState state);

 private:
  AftUnet& model_;
  TrainConfig cfg_;
  AdamState state_;
  int epoch_ = 0;
};

/// Mean combined loss, without gradients, over `per_scan` evenly spaced
/// centre slices of every scan.
double probe_loss(const AftUnet& model, const std::vector<Scan>& scans, int per_scan = 8);

/// Model architecture as stored in checkpoints.
std::vector<float> encode_model_config(const ModelConfig& cfg);
ModelConfig decode_model_config(const std::vector<float>& values);

/// Parameters, architecture and (when `trainer` is given) epoch and Adam
/// moments, as an AFTC tensor file.
void save_checkpoint(const std::filesystem::path& path, const AftUnet& model,
                     const Trainer* trainer = nullptr);
/// Throws ConfigMismatchError when the stored architecture differs from the
/// model's, FormatError for malformed contents.
void load_checkpoint(const std::filesystem::path& path, AftUnet& model, Trainer* trainer = nullptr);
ModelConfig read_checkpoint_config(const std::filesystem::path& path);

}  // namespace aft
