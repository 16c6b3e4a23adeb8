// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "aftunet/volume.hpp"

namespace aft {

struct Scan {
  Volume image;
  LabelVolume labels;
};

struct SynthDims {
  int height = 64;
  int width = 64;
  int depth = 32;
};

/// Deterministic phantom scans. Each scan holds one ellipsoid per
/// foreground class with its own intensity band plus Gaussian noise. Class 1
/// is always a thin tube elongated along the axial axis. Ellipsoids do not
/// overlap; placement gives up after a bounded number of retries.
std::vector<Scan> synth_dataset(int n_scans, SynthDims dims, int n_classes, std::uint64_t seed);

/// Scan `index` of the dataset; synth_dataset(n, ...)[i] == synth_scan(i, ...).
Scan synth_scan(int index, SynthDims dims, int n_classes, std::uint64_t seed);

/// Per-slice smooth random warp. `amplitude` is the peak displacement in
/// pixels, `smoothness` the Gaussian sigma of the field in pixels.
/// Intensities are resampled bilinearly, labels by nearest neighbour.
Scan elastic_augment(const Volume& v, const LabelVolume& l, double amplitude, double smoothness,
                     std::uint64_t seed);

}  // namespace aft
