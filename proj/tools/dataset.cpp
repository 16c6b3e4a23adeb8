// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "aftunet/errors.hpp"

namespace aft::cli {

namespace {

std::string dims_string(int h, int w, int d) {
  return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(d);
}

void parse_dims(const std::string& text, ManifestEntry& e, int line) {
  char x1 = 0, x2 = 0;
  std::istringstream is(text);
  if (!(is >> e.height >> x1 >> e.width >> x2 >> e.depth) || x1 != 'x' || x2 != 'x' ||
      is.peek() != std::char_traits<char>::eof() || e.height < 1 || e.width < 1 || e.depth < 1) {
    throw FormatError("manifest line " + std::to_string(line) + ": bad dims '" + text + "'");
  }
}

int round_up(int n, int f) { return (n + f - 1) / f * f; }

}  // namespace

std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::ostringstream os;
  os << "# id image labels dims(HxWxD)\n";
  for (const auto& e : entries) {
    os << e.id << " image=" << e.image << " labels=" << e.labels
       << " dims=" << dims_string(e.height, e.width, e.depth) << "\n";
  }
  return os.str();
}

std::vector<ManifestEntry> parse_manifest(const std::string& text) {
  std::vector<ManifestEntry> out;
  std::istringstream is(text);
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    ManifestEntry e;
    std::string token;
    bool has_dims = false;
    fields >> e.id;
    while (fields >> token) {
      const auto eq = token.find('=');
      const std::string key = token.substr(0, eq);
      const std::string value = eq == std::string::npos ? "" : token.substr(eq + 1);
      if (key == "image") {
        e.image = value;
      } else if (key == "labels") {
        e.labels = value;
      } else if (key == "dims") {
        parse_dims(value, e, number);
        has_dims = true;
      } else {
        throw FormatError("manifest line " + std::to_string(number) + ": unknown field '" + token + "'");
      }
    }
    if (e.id.empty()) continue;
    if (e.image.empty() || e.labels.empty() || !has_dims) {
      throw FormatError("manifest line " + std::to_string(number) + ": needs image=, labels= and dims=");
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Scan> load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / kManifestName;
  std::ifstream is(manifest_path);
  if (!is) throw FormatError("cannot open " + manifest_path.string());
  std::ostringstream text;
  text << is.rdbuf();
  const auto entries = parse_manifest(text.str());
  if (entries.empty()) throw FormatError(manifest_path.string() + " lists no scans");
  std::vector<Scan> scans;
  for (const auto& e : entries) {
    Scan s{read_volume(dir / e.image), read_labels(dir / e.labels)};
    if (s.image.height != e.height || s.image.width != e.width || s.image.depth != e.depth) {
      throw FormatError(e.image + " is " + dims_string(s.image.height, s.image.width, s.image.depth) +
                        ", manifest says " + dims_string(e.height, e.width, e.depth));
    }
    if (!same_grid(s.image, s.labels)) {
      throw FormatError(e.labels + " does not match the grid of " + e.image);
    }
    scans.push_back(std::move(s));
  }
  return scans;
}

Volume preprocess_image(const Volume& v, double window_lo, double window_hi) {
  Volume out = v.spacing == kTargetSpacing ? v : resample(v, kTargetSpacing);
  normalize_window(out, static_cast<float>(window_lo), static_cast<float>(window_hi));
  return out;
}

Scan preprocess_scan(const Scan& s, double window_lo, double window_hi) {
  Scan out{preprocess_image(s.image, window_lo, window_hi), {}};
  out.labels = s.labels.spacing == kTargetSpacing
                   ? s.labels
                   : resample_to_grid(s.labels, kTargetSpacing, out.image.height, out.image.width,
                                      out.image.depth);
  return out;
}

void derive_input_size(ModelConfig& cfg, const std::vector<Scan>& scans) {
  const int f = cfg.codec.downsample_factor();
  int h = 0, w = 0;
  for (const auto& s : scans) {
    h = std::max(h, s.image.height);
    w = std::max(w, s.image.width);
  }
  if (cfg.height == 0) cfg.height = round_up(h, f);
  if (cfg.width == 0) cfg.width = round_up(w, f);
}

}  // namespace aft::cli
