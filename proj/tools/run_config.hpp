// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat key=value run configuration shared by the subcommands. One key per
// line, "#" starts a comment. Keys mirror the RunConfig fields; see
// config_keys() for the full list.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "aftunet/model.hpp"
#include "aftunet/training.hpp"

namespace aft::cli {

struct RunConfig {
  std::string data;
  std::string out = "run";
  TrainConfig train;
  ModelConfig model;
  int blocks = 0;        // 0: one block per entry of `channels`
  double window_lo = 0.0;
  double window_hi = 1.0;
  int checkpoint_every = 0;  // 0: final checkpoint only
  int probe_slices = 0;      // > 0: log the fixed-probe loss every epoch
  std::vector<std::string> class_names;

  RunConfig();

  /// Throws ConfigError naming the field and the violated constraint. A
  /// height or width of 0 means "derive from the data".
  void validate() const;
  /// model with `blocks` resolved.
  ModelConfig model_config() const;
};

const std::vector<std::string>& config_keys();

/// Throws ConfigError for unknown keys and unparsable values.
void set_field(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_field(const RunConfig& cfg, const std::string& key);

/// "key=value" as given to --set.
void apply_override(RunConfig& cfg, const std::string& assignment);

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Every key in config_keys() order; parses back to the same config.
std::string format_config(const RunConfig& cfg);

}  // namespace aft::cli
