// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "aftunet/losses.hpp"
#include "aftunet/model.hpp"
#include "aftunet/synth.hpp"
#include "aftunet/volume.hpp"

namespace aft {

/// Runs the model on the group of every centre slice and assembles the
/// middle maps. `v` must be preprocessed and no larger in-plane than the
/// model input; it is zero-padded for the forward pass and the prediction
/// is cropped back. When `groups` is non-null it receives the raw logits.
LabelVolume predict_volume(const AftUnet& model, const Volume& v,
                           std::vector<SegmentationGroup>* groups = nullptr);

struct EvalReport {
  std::vector<std::string> class_names;  // foreground classes 1..C-1
  std::vector<double> class_dsc;         // averaged over scans
  std::vector<std::vector<double>> scan_dsc;  // [scan][class-1]
  double mean_dsc = 0.0;                 // mean over foreground classes
};

EvalReport evaluate_predictions(const std::vector<LabelVolume>& predictions,
                                const std::vector<LabelVolume>& truths, int classes,
                                std::vector<std::string> class_names = {});

EvalReport evaluate(const AftUnet& model, const std::vector<Scan>& scans,
                    std::vector<std::string> class_names = {});

/// Fixed-width table: one row per class with DSC in percent to two
/// decimals, then the mean.
std::string format_table(const EvalReport& report);
/// key=value lines: dsc.<class>=<fraction>, dsc.mean, scans.
std::string format_metrics(const EvalReport& report);

}  // namespace aft
