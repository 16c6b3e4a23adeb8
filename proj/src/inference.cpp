// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "aftunet/inference.hpp"

#include <iomanip>
#include <sstream>

#include "aftunet/errors.hpp"
#include "aftunet/slice_group.hpp"

namespace aft {

LabelVolume predict_volume(const AftUnet& model, const Volume& v,
                           std::vector<SegmentationGroup>* groups) {
  const ModelConfig& cfg = model.config();
  if (v.channels != cfg.codec.in_channels) {
    throw ShapeError("volume has " + std::to_string(v.channels) + " channels, model expects " +
                     std::to_string(cfg.codec.in_channels));
  }
  if (v.height > cfg.height || v.width > cfg.width) {
    throw ShapeError("volume " + std::to_string(v.height) + "x" + std::to_string(v.width) +
                     " exceeds model input " + std::to_string(cfg.height) + "x" +
                     std::to_string(cfg.width));
  }
  const Volume padded = pad_to(v, cfg.height, cfg.width);
  NoGradGuard no_grad;
  std::vector<SegmentationGroup> out;
  out.reserve(static_cast<std::size_t>(v.depth));
  for (const SliceGroup& g : iter_groups(padded, cfg.neighbors, cfg.frequency)) {
    out.push_back({g.center, model.forward(g.slices)});
  }
  LabelVolume labels = crop(assemble(out), v.height, v.width);
  labels.spacing = v.spacing;
  if (groups) *groups = std::move(out);
  return labels;
}

EvalReport evaluate_predictions(const std::vector<LabelVolume>& predictions,
                                const std::vector<LabelVolume>& truths, int classes,
                                std::vector<std::string> class_names) {
  if (predictions.empty()) throw ShapeError("evaluation needs at least one scan");
  if (predictions.size() != truths.size()) throw ShapeError("prediction/label count mismatch");
  if (classes < 2) throw ConfigError("classes must be >= 2");
  EvalReport r;
  if (class_names.empty()) {
    for (int c = 1; c < classes; ++c) class_names.push_back("class" + std::to_string(c));
  }
  if (static_cast<int>(class_names.size()) != classes - 1) {
    throw ConfigError("expected " + std::to_string(classes - 1) + " class names");
  }
  r.class_names = std::move(class_names);
  r.class_dsc.assign(static_cast<std::size_t>(classes - 1), 0.0);
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    if (predictions[s].voxels.size() != truths[s].voxels.size()) {
      throw ShapeError("scan " + std::to_string(s) + ": prediction and label grids differ");
    }
    std::vector<double> row;
    for (int c = 1; c < classes; ++c) {
      row.push_back(class_dsc(predictions[s].voxels, truths[s].voxels, static_cast<std::uint8_t>(c)));
      r.class_dsc[static_cast<std::size_t>(c - 1)] += row.back() / static_cast<double>(predictions.size());
    }
    r.scan_dsc.push_back(std::move(row));
  }
  for (double d : r.class_dsc) r.mean_dsc += d / static_cast<double>(r.class_dsc.size());
  return r;
}

EvalReport evaluate(const AftUnet& model, const std::vector<Scan>& scans,
                    std::vector<std::string> class_names) {
  if (scans.empty()) throw ShapeError("evaluation needs at least one scan");
  std::vector<LabelVolume> preds, truths;
  for (const Scan& s : scans) {
    preds.push_back(predict_volume(model, s.image));
    truths.push_back(s.labels);
  }
  return evaluate_predictions(preds, truths, model.config().codec.classes, std::move(class_names));
}

std::string format_table(const EvalReport& report) {
  std::size_t width = 5;
  for (const auto& n : report.class_names) width = std::max(width, n.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "class" << "  DSC(%)\n";
  os << std::fixed << std::setprecision(2);
  for (std::size_t i = 0; i < report.class_names.size(); ++i) {
    os << std::setw(static_cast<int>(width)) << report.class_names[i] << "  " << std::right
       << std::setw(6) << 100.0 * report.class_dsc[i] << std::left << '\n';
  }
  os << std::setw(static_cast<int>(width)) << "mean" << "  " << std::right << std::setw(6)
     << 100.0 * report.mean_dsc << '\n';
  return os.str();
}

std::string format_metrics(const EvalReport& report) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < report.class_names.size(); ++i) {
    os << "dsc." << report.class_names[i] << '=' << report.class_dsc[i] << '\n';
  }
  os << "dsc.mean=" << report.mean_dsc << '\n';
  os << "scans=" << report.scan_dsc.size() << '\n';
  return os.str();
}

}  // namespace aft
