// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0
//
// A dataset directory holds AFTV image/label pairs plus manifest.txt, one
// scan per line:
//
//   <id> image=<file> labels=<file> dims=<H>x<W>x<D>
//
// File names are relative to the directory. "#" lines are comments.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "aftunet/model.hpp"
#include "aftunet/synth.hpp"

namespace aft::cli {

inline constexpr const char* kManifestName = "manifest.txt";

struct ManifestEntry {
  std::string id;
  std::string image;
  std::string labels;
  int height = 0, width = 0, depth = 0;
};

std::string format_manifest(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> parse_manifest(const std::string& text);

/// Reads every scan listed in `dir`/manifest.txt and checks the listed dims.
std::vector<Scan> load_dataset(const std::filesystem::path& dir);

/// Resamples to the target spacing and applies the intensity window.
Volume preprocess_image(const Volume& v, double window_lo, double window_hi);
Scan preprocess_scan(const Scan& s, double window_lo, double window_hi);

/// Smallest height/width that holds every scan and is a multiple of the
/// encoder's downsampling factor.
void derive_input_size(ModelConfig& cfg, const std::vector<Scan>& scans);

}  // namespace aft::cli
