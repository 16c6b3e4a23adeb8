// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "aftunet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "aftunet/errors.hpp"
#include "aftunet/ops.hpp"

namespace aft {

namespace {

using detail::Node;

struct Layout {
  std::int64_t n, classes, plane;

  std::size_t at(std::int64_t s, std::int64_t c, std::int64_t i) const {
    return static_cast<std::size_t>((s * classes + c) * plane + i);
  }
};

Layout check(const Tensor& logits, std::span<const std::uint8_t> labels, const char* op) {
  if (logits.rank() != 4) {
    throw ShapeError(std::string(op) + ": logits must be [N, C, H, W], got " +
                     shape_str(logits.shape()));
  }
  const Layout l{logits.dim(0), logits.dim(1), logits.dim(2) * logits.dim(3)};
  if (static_cast<std::int64_t>(labels.size()) != l.n * l.plane) {
    throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) +
                     " labels for logits " + shape_str(logits.shape()));
  }
  for (auto y : labels) {
    if (y >= l.classes) {
      throw ShapeError(std::string(op) + ": label " + std::to_string(y) + " >= class count " +
                       std::to_string(l.classes));
    }
  }
  return l;
}

// Softmax over the class axis.
std::vector<double> class_softmax(std::span<const double> z, const Layout& l) {
  std::vector<double> p(z.size());
  for (std::int64_t s = 0; s < l.n; ++s) {
    for (std::int64_t i = 0; i < l.plane; ++i) {
      double mx = -INFINITY;
      for (std::int64_t c = 0; c < l.classes; ++c) mx = std::max(mx, z[l.at(s, c, i)]);
      double total = 0.0;
      for (std::int64_t c = 0; c < l.classes; ++c) total += p[l.at(s, c, i)] = std::exp(z[l.at(s, c, i)] - mx);
      for (std::int64_t c = 0; c < l.classes; ++c) p[l.at(s, c, i)] /= total;
    }
  }
  return p;
}

}  // namespace

Tensor dice_loss(const Tensor& logits, std::span<const std::uint8_t> labels, double smooth) {
  const Layout l = check(logits, labels, "dice_loss");
  auto prob = std::make_shared<std::vector<double>>(class_softmax(logits.data(), l));
  const std::int64_t fg = l.classes - 1;
  std::vector<double> inter(static_cast<std::size_t>(l.classes), 0.0),
      denom(static_cast<std::size_t>(l.classes), 0.0);
  for (std::int64_t s = 0; s < l.n; ++s) {
    for (std::int64_t i = 0; i < l.plane; ++i) {
      const int y = labels[static_cast<std::size_t>(s * l.plane + i)];
      for (std::int64_t c = 1; c < l.classes; ++c) {
        const double p = (*prob)[l.at(s, c, i)];
        denom[static_cast<std::size_t>(c)] += p;
        if (y == c) {
          inter[static_cast<std::size_t>(c)] += p;
          denom[static_cast<std::size_t>(c)] += 1.0;
        }
      }
    }
  }
  double mean_dice = 0.0;
  for (std::int64_t c = 1; c < l.classes; ++c) {
    mean_dice += (2.0 * inter[static_cast<std::size_t>(c)] + smooth) /
                 (denom[static_cast<std::size_t>(c)] + smooth) / static_cast<double>(fg);
  }
  std::vector<std::uint8_t> y(labels.begin(), labels.end());
  return make_result({}, {1.0 - mean_dice}, {logits},
                     [prob, l, fg, smooth, inter, denom, y = std::move(y)](Node& o) {
    const double g = o.grad[0];
    auto& dz = o.inputs[0]->ensure_grad();
    // d loss / d p_c at voxel i, then through the class softmax
    std::vector<double> coef_hit(static_cast<std::size_t>(l.classes), 0.0),
        coef_miss(static_cast<std::size_t>(l.classes), 0.0);
    for (std::int64_t c = 1; c < l.classes; ++c) {
      const double den = denom[static_cast<std::size_t>(c)] + smooth;
      const double num = 2.0 * inter[static_cast<std::size_t>(c)] + smooth;
      coef_miss[static_cast<std::size_t>(c)] = g * num / (den * den) / static_cast<double>(fg);
      coef_hit[static_cast<std::size_t>(c)] =
          coef_miss[static_cast<std::size_t>(c)] - g * 2.0 / den / static_cast<double>(fg);
    }
    std::vector<double> dp(static_cast<std::size_t>(l.classes));
    for (std::int64_t s = 0; s < l.n; ++s) {
      for (std::int64_t i = 0; i < l.plane; ++i) {
        const int yi = y[static_cast<std::size_t>(s * l.plane + i)];
        double dot = 0.0;
        for (std::int64_t c = 0; c < l.classes; ++c) {
          dp[static_cast<std::size_t>(c)] =
              c == 0 ? 0.0 : (yi == c ? coef_hit : coef_miss)[static_cast<std::size_t>(c)];
          dot += dp[static_cast<std::size_t>(c)] * (*prob)[l.at(s, c, i)];
        }
        for (std::int64_t c = 0; c < l.classes; ++c) {
          dz[l.at(s, c, i)] += (*prob)[l.at(s, c, i)] * (dp[static_cast<std::size_t>(c)] - dot);
        }
      }
    }
  });
}

Tensor ce_loss(const Tensor& logits, std::span<const std::uint8_t> labels) {
  const Layout l = check(logits, labels, "ce_loss");
  const auto z = logits.data();
  auto prob = std::make_shared<std::vector<double>>(z.size());
  double total = 0.0;
  for (std::int64_t s = 0; s < l.n; ++s) {
    for (std::int64_t i = 0; i < l.plane; ++i) {
      double mx = -INFINITY;
      for (std::int64_t c = 0; c < l.classes; ++c) mx = std::max(mx, z[l.at(s, c, i)]);
      double sum = 0.0;
      for (std::int64_t c = 0; c < l.classes; ++c) sum += std::exp(z[l.at(s, c, i)] - mx);
      const double lse = mx + std::log(sum);
      for (std::int64_t c = 0; c < l.classes; ++c) (*prob)[l.at(s, c, i)] = std::exp(z[l.at(s, c, i)] - lse);
      total += lse - z[l.at(s, labels[static_cast<std::size_t>(s * l.plane + i)], i)];
    }
  }
  const double count = static_cast<double>(l.n * l.plane);
  std::vector<std::uint8_t> y(labels.begin(), labels.end());
  return make_result({}, {total / count}, {logits}, [prob, l, count, y = std::move(y)](Node& o) {
    const double g = o.grad[0] / count;
    auto& dz = o.inputs[0]->ensure_grad();
    for (std::int64_t s = 0; s < l.n; ++s) {
      for (std::int64_t i = 0; i < l.plane; ++i) {
        const int yi = y[static_cast<std::size_t>(s * l.plane + i)];
        for (std::int64_t c = 0; c < l.classes; ++c) {
          dz[l.at(s, c, i)] += g * ((*prob)[l.at(s, c, i)] - (c == yi ? 1.0 : 0.0));
        }
      }
    }
  });
}

Tensor combined_loss(const Tensor& logits, std::span<const std::uint8_t> labels) {
  return ops::add(dice_loss(logits, labels), ce_loss(logits, labels));
}

double dsc(std::span<const std::uint8_t> pred_mask, std::span<const std::uint8_t> true_mask) {
  if (pred_mask.size() != true_mask.size()) {
    throw ShapeError("dsc: mask sizes differ (" + std::to_string(pred_mask.size()) + " vs " +
                     std::to_string(true_mask.size()) + ")");
  }
  std::int64_t both = 0, p = 0, g = 0;
  for (std::size_t i = 0; i < pred_mask.size(); ++i) {
    const bool a = pred_mask[i] != 0, b = true_mask[i] != 0;
    p += a;
    g += b;
    both += a && b;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

double class_dsc(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth,
                 std::uint8_t cls) {
  if (pred.size() != truth.size()) throw ShapeError("class_dsc: volume sizes differ");
  std::vector<std::uint8_t> a(pred.size()), b(truth.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    a[i] = pred[i] == cls;
    b[i] = truth[i] == cls;
  }
  return dsc(a, b);
}

std::vector<std::uint8_t> argmax_slice(const Tensor& logits, std::int64_t slice) {
  if (logits.rank() != 4 || slice < 0 || slice >= logits.dim(0)) {
    throw ShapeError("argmax_slice: slice " + std::to_string(slice) + " of " +
                     shape_str(logits.shape()));
  }
  const Layout l{logits.dim(0), logits.dim(1), logits.dim(2) * logits.dim(3)};
  const auto z = logits.data();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(l.plane));
  for (std::int64_t i = 0; i < l.plane; ++i) {
    std::int64_t best = 0;
    for (std::int64_t c = 1; c < l.classes; ++c) {
      if (z[l.at(slice, c, i)] > z[l.at(slice, best, i)]) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(best);
  }
  return out;
}

LabelVolume assemble(const std::vector<SegmentationGroup>& groups) {
  if (groups.empty()) throw ShapeError("assemble: no groups");
  const Tensor& first = groups.front().logits;
  if (first.rank() != 4) throw ShapeError("assemble: logits must be [N_A, C, H, W]");
  const int h = static_cast<int>(first.dim(2)), w = static_cast<int>(first.dim(3));
  LabelVolume out(h, w, static_cast<int>(groups.size()));
  for (std::size_t d = 0; d < groups.size(); ++d) {
    const SegmentationGroup& g = groups[d];
    if (g.center != static_cast<int>(d)) {
      throw ShapeError("assemble: missing group for centre slice " + std::to_string(d));
    }
    if (g.logits.rank() != 4 || g.logits.dim(2) != h || g.logits.dim(3) != w) {
      throw ShapeError("assemble: group " + std::to_string(d) + " has logits " +
                       shape_str(g.logits.shape()));
    }
    const auto slice = argmax_slice(g.logits, g.logits.dim(0) / 2);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        out.at(y, x, static_cast<int>(d)) = slice[static_cast<std::size_t>(y * w + x)];
      }
    }
  }
  return out;
}

}  // namespace aft
