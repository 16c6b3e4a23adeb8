// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "aftunet/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "aftunet/errors.hpp"

namespace aft::ops {

namespace {

using detail::Node;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

bool wants(const Node& out, std::size_t i) { return out.inputs[i]->requires_grad; }
std::vector<double>& grad_of(Node& out, std::size_t i) { return out.inputs[i]->ensure_grad(); }
const std::vector<double>& value_of(const Node& out, std::size_t i) {
  return out.inputs[i]->value;
}

// Batch view of an image tensor: [C,H,W] is treated as N=1.
struct ImageDims {
  std::int64_t n, c, h, w;
};

ImageDims image_dims(const Tensor& t, const char* op) {
  if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2)};
  if (t.rank() == 4) return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
  throw ShapeError(std::string(op) + ": expected [C,H,W] or [N,C,H,W], got " +
                   shape_str(t.shape()));
}

Shape image_shape(const Tensor& like, std::int64_t c, std::int64_t h, std::int64_t w) {
  if (like.rank() == 3) return {c, h, w};
  return {like.dim(0), c, h, w};
}

void require_vector(const Tensor& t, std::int64_t n, const char* op, const char* what) {
  if (t.rank() != 1 || t.dim(0) != n) {
    throw ShapeError(std::string(op) + ": " + what + " must have shape [" + std::to_string(n) +
                     "], got " + shape_str(t.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& o) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants(o, k)) continue;
      auto& g = grad_of(o, k);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& o) {
    if (wants(o, 0)) {
      auto& g = grad_of(o, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (wants(o, 1)) {
      auto& g = grad_of(o, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& o) {
    const auto& av = value_of(o, 0);
    const auto& bv = value_of(o, 1);
    if (wants(o, 0)) {
      auto& g = grad_of(o, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * bv[i];
    }
    if (wants(o, 1)) {
      auto& g = grad_of(o, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& x : out) x *= factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](Node& o) {
    auto& g = grad_of(o, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * o.grad[i];
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& x : out) x = x > 0.0 ? x : 0.0;
  return make_result(a.shape(), std::move(out), {a}, [](Node& o) {
    auto& g = grad_of(o, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (o.value[i] > 0.0) g[i] += o.grad[i];
    }
  });
}

Tensor sum(const Tensor& a) {
  auto d = a.data();
  double s = std::accumulate(d.begin(), d.end(), 0.0);
  return make_result({}, {s}, {a}, [](Node& o) {
    auto& g = grad_of(o, 0);
    for (auto& x : g) x += o.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), {a}, [](Node& o) {
    auto& g = grad_of(o, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor permute(const Tensor& a, const std::vector<int>& perm) {
  const int r = a.rank();
  if (static_cast<int>(perm.size()) != r) {
    throw ShapeError("permute: permutation rank does not match " + shape_str(a.shape()));
  }
  std::vector<bool> seen(static_cast<std::size_t>(r), false);
  for (int p : perm) {
    if (p < 0 || p >= r || seen[static_cast<std::size_t>(p)]) {
      throw ShapeError("permute: invalid permutation");
    }
    seen[static_cast<std::size_t>(p)] = true;
  }
  const Shape& in_shape = a.shape();
  std::vector<std::int64_t> in_strides(static_cast<std::size_t>(r), 1);
  for (int i = r - 2; i >= 0; --i) {
    in_strides[static_cast<std::size_t>(i)] =
        in_strides[static_cast<std::size_t>(i + 1)] * in_shape[static_cast<std::size_t>(i + 1)];
  }
  Shape out_shape(static_cast<std::size_t>(r));
  std::vector<std::int64_t> src_strides(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    out_shape[static_cast<std::size_t>(i)] = in_shape[static_cast<std::size_t>(perm[i])];
    src_strides[static_cast<std::size_t>(i)] = in_strides[static_cast<std::size_t>(perm[i])];
  }
  // src_index[i] = input offset of output element i.
  const std::int64_t n = a.numel();
  std::vector<std::int64_t> src_index(static_cast<std::size_t>(n));
  std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
  std::int64_t off = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    src_index[static_cast<std::size_t>(i)] = off;
    for (int ax = r - 1; ax >= 0; --ax) {
      auto axu = static_cast<std::size_t>(ax);
      ++idx[axu];
      off += src_strides[axu];
      if (idx[axu] < out_shape[axu]) break;
      off -= src_strides[axu] * idx[axu];
      idx[axu] = 0;
    }
  }
  auto src = a.data();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = src[static_cast<std::size_t>(src_index[i])];
  }
  return make_result(std::move(out_shape), std::move(out), {a},
                     [src_index = std::move(src_index)](Node& o) {
                       auto& g = grad_of(o, 0);
                       for (std::size_t i = 0; i < src_index.size(); ++i) {
                         g[static_cast<std::size_t>(src_index[i])] += o.grad[i];
                       }
                     });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const int r = parts[0].rank();
  const int ax = axis < 0 ? axis + r : axis;
  if (ax < 0 || ax >= r) throw ShapeError("concat: axis out of range");
  Shape out_shape = parts[0].shape();
  out_shape[static_cast<std::size_t>(ax)] = 0;
  for (const auto& p : parts) {
    if (p.rank() != r) throw ShapeError("concat: rank mismatch");
    for (int i = 0; i < r; ++i) {
      if (i != ax && p.dim(i) != parts[0].dim(i)) {
        throw ShapeError("concat: extent mismatch " + shape_str(p.shape()) + " vs " +
                         shape_str(parts[0].shape()));
      }
    }
    out_shape[static_cast<std::size_t>(ax)] += p.dim(ax);
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= out_shape[static_cast<std::size_t>(i)];
  for (int i = ax + 1; i < r; ++i) inner *= out_shape[static_cast<std::size_t>(i)];
  const std::int64_t out_row = out_shape[static_cast<std::size_t>(ax)] * inner;

  std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));
  std::vector<std::int64_t> offsets;
  std::int64_t running = 0;
  for (const auto& p : parts) {
    offsets.push_back(running);
    const std::int64_t row = p.dim(ax) * inner;
    auto src = p.data();
    for (std::int64_t o = 0; o < outer; ++o) {
      std::copy_n(src.begin() + o * row, row, out.begin() + o * out_row + running);
    }
    running += row;
  }

  return make_result(
      std::move(out_shape), std::move(out), std::span<const Tensor>(parts),
      [offsets = std::move(offsets), outer, out_row](Node& o) {
        for (std::size_t k = 0; k < o.inputs.size(); ++k) {
          if (!wants(o, k)) continue;
          auto& g = grad_of(o, k);
          const std::int64_t row = static_cast<std::int64_t>(g.size()) / outer;
          for (std::int64_t r2 = 0; r2 < outer; ++r2) {
            const double* src = o.grad.data() + r2 * out_row + offsets[k];
            double* dst = g.data() + r2 * row;
            for (std::int64_t i = 0; i < row; ++i) dst[i] += src[i];
          }
        }
      });
}

Tensor narrow(const Tensor& a, int axis, std::int64_t start, std::int64_t length) {
  const int r = a.rank();
  const int ax = axis < 0 ? axis + r : axis;
  if (ax < 0 || ax >= r) throw ShapeError("narrow: axis out of range");
  if (start < 0 || length < 0 || start + length > a.dim(ax)) {
    throw ShapeError("narrow: range out of bounds for " + shape_str(a.shape()));
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= a.dim(i);
  for (int i = ax + 1; i < r; ++i) inner *= a.dim(i);
  const std::int64_t in_row = a.dim(ax) * inner;
  const std::int64_t out_row = length * inner;
  Shape out_shape = a.shape();
  out_shape[static_cast<std::size_t>(ax)] = length;
  std::vector<double> out(static_cast<std::size_t>(outer * out_row));
  auto src = a.data();
  for (std::int64_t o = 0; o < outer; ++o) {
    std::copy_n(src.begin() + o * in_row + start * inner, out_row, out.begin() + o * out_row);
  }
  return make_result(std::move(out_shape), std::move(out), {a},
                     [outer, in_row, out_row, offset = start * inner](Node& o) {
                       auto& g = grad_of(o, 0);
                       for (std::int64_t r2 = 0; r2 < outer; ++r2) {
                         for (std::int64_t i = 0; i < out_row; ++i) {
                           g[static_cast<std::size_t>(r2 * in_row + offset + i)] +=
                               o.grad[static_cast<std::size_t>(r2 * out_row + i)];
                         }
                       }
                     });
}

namespace {

struct ConvGeom {
  std::int64_t cin, h, w, k, pad, ho, wo;
  std::int64_t rows() const { return cin * k * k; }
  std::int64_t cols() const { return ho * wo; }
};

void im2col(const double* x, const ConvGeom& g, double* col) {
  for (std::int64_t c = 0; c < g.cin; ++c) {
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        double* dst = col + ((c * g.k + ky) * g.k + kx) * g.cols();
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy + ky - g.pad;
          double* drow = dst + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill_n(drow, g.wo, 0.0);
            continue;
          }
          const double* srow = x + (c * g.h + iy) * g.w;
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const std::int64_t ix = ox + kx - g.pad;
            drow[ox] = (ix >= 0 && ix < g.w) ? srow[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvGeom& g, double* dx) {
  for (std::int64_t c = 0; c < g.cin; ++c) {
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        const double* src = col + ((c * g.k + ky) * g.k + kx) * g.cols();
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy + ky - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          double* drow = dx + (c * g.h + iy) * g.w;
          const double* srow = src + oy * g.wo;
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const std::int64_t ix = ox + kx - g.pad;
            if (ix >= 0 && ix < g.w) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int padding) {
  const auto d = image_dims(input, "conv2d");
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
    throw ShapeError("conv2d: weight must be [Cout,Cin,k,k], got " + shape_str(weight.shape()));
  }
  if (weight.dim(1) != d.c) {
    throw ShapeError("conv2d: input has " + std::to_string(d.c) + " channels but weight expects " +
                     std::to_string(weight.dim(1)));
  }
  const std::int64_t cout = weight.dim(0);
  const std::int64_t k = weight.dim(2);
  if (k % 2 == 0) throw ShapeError("conv2d: kernel size must be odd");
  if (padding < 0) throw ShapeError("conv2d: negative padding");
  const bool has_bias = bias.defined();
  if (has_bias) require_vector(bias, cout, "conv2d", "bias");

  ConvGeom g{d.c, d.h, d.w, k, padding, d.h + 2 * padding - k + 1, d.w + 2 * padding - k + 1};
  if (g.ho <= 0 || g.wo <= 0) throw ShapeError("conv2d: kernel larger than padded input");

  const bool direct = (k == 1 && padding == 0);
  std::vector<double> out(static_cast<std::size_t>(d.n * cout * g.cols()));
  std::vector<double> col(direct ? 0 : static_cast<std::size_t>(g.rows() * g.cols()));
  CMapMat wmat(weight.data().data(), cout, g.rows());
  for (std::int64_t n = 0; n < d.n; ++n) {
    const double* x = input.data().data() + n * d.c * d.h * d.w;
    const double* colp = x;
    if (!direct) {
      im2col(x, g, col.data());
      colp = col.data();
    }
    MapMat y(out.data() + n * cout * g.cols(), cout, g.cols());
    y.noalias() = wmat * CMapMat(colp, g.rows(), g.cols());
    if (has_bias) {
      auto b = bias.data();
      for (std::int64_t co = 0; co < cout; ++co) y.row(co).array() += b[static_cast<std::size_t>(co)];
    }
  }

  auto backward = [g, d, cout, direct, has_bias](Node& o) {
    const auto& xv = value_of(o, 0);
    const auto& wv = value_of(o, 1);
    CMapMat wmat(wv.data(), cout, g.rows());
    std::vector<double> col(direct ? 0 : static_cast<std::size_t>(g.rows() * g.cols()));
    std::vector<double> dcol(static_cast<std::size_t>(g.rows() * g.cols()));
    for (std::int64_t n = 0; n < d.n; ++n) {
      CMapMat dy(o.grad.data() + n * cout * g.cols(), cout, g.cols());
      const double* x = xv.data() + n * d.c * d.h * d.w;
      if (wants(o, 1)) {
        const double* colp = x;
        if (!direct) {
          im2col(x, g, col.data());
          colp = col.data();
        }
        MapMat dw(grad_of(o, 1).data(), cout, g.rows());
        dw.noalias() += dy * CMapMat(colp, g.rows(), g.cols()).transpose();
      }
      if (has_bias && wants(o, 2)) {
        auto& gb = grad_of(o, 2);
        for (std::int64_t co = 0; co < cout; ++co) gb[static_cast<std::size_t>(co)] += dy.row(co).sum();
      }
      if (wants(o, 0)) {
        double* dx = grad_of(o, 0).data() + n * d.c * d.h * d.w;
        if (direct) {
          MapMat dxm(dx, g.rows(), g.cols());
          dxm.noalias() += wmat.transpose() * dy;
        } else {
          MapMat dc(dcol.data(), g.rows(), g.cols());
          dc.noalias() = wmat.transpose() * dy;
          col2im_add(dcol.data(), g, dx);
        }
      }
    }
  };
  Shape out_shape = image_shape(input, cout, g.ho, g.wo);
  if (has_bias) return make_result(std::move(out_shape), std::move(out), {input, weight, bias}, backward);
  return make_result(std::move(out_shape), std::move(out), {input, weight}, backward);
}

Tensor maxpool2(const Tensor& input) {
  if (input.rank() < 2) throw ShapeError("maxpool2: need at least 2 axes");
  const std::int64_t h = input.dim(-2), w = input.dim(-1);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2: spatial extents must be even, got " + shape_str(input.shape()));
  }
  const std::int64_t planes = input.numel() / (h * w);
  const std::int64_t ho = h / 2, wo = w / 2;
  Shape out_shape = input.shape();
  out_shape[out_shape.size() - 2] = ho;
  out_shape[out_shape.size() - 1] = wo;
  std::vector<double> out(static_cast<std::size_t>(planes * ho * wo));
  std::vector<std::int64_t> argmax(out.size());
  auto x = input.data();
  for (std::int64_t p = 0; p < planes; ++p) {
    for (std::int64_t oy = 0; oy < ho; ++oy) {
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        std::int64_t best = p * h * w + (2 * oy) * w + 2 * ox;
        for (std::int64_t dy = 0; dy < 2; ++dy) {
          for (std::int64_t dx = 0; dx < 2; ++dx) {
            const std::int64_t idx = p * h * w + (2 * oy + dy) * w + (2 * ox + dx);
            if (x[static_cast<std::size_t>(idx)] > x[static_cast<std::size_t>(best)]) best = idx;
          }
        }
        const auto o = static_cast<std::size_t>((p * ho + oy) * wo + ox);
        out[o] = x[static_cast<std::size_t>(best)];
        argmax[o] = best;
      }
    }
  }
  return make_result(std::move(out_shape), std::move(out), {input},
                     [argmax = std::move(argmax)](Node& o) {
                       auto& g = grad_of(o, 0);
                       for (std::size_t i = 0; i < argmax.size(); ++i) {
                         g[static_cast<std::size_t>(argmax[i])] += o.grad[i];
                       }
                     });
}

Tensor upsample2(const Tensor& input) {
  if (input.rank() < 2) throw ShapeError("upsample2: need at least 2 axes");
  const std::int64_t h = input.dim(-2), w = input.dim(-1);
  const std::int64_t planes = input.numel() / std::max<std::int64_t>(1, h * w);
  const std::int64_t ho = 2 * h, wo = 2 * w;
  Shape out_shape = input.shape();
  out_shape[out_shape.size() - 2] = ho;
  out_shape[out_shape.size() - 1] = wo;
  std::vector<double> out(static_cast<std::size_t>(planes * ho * wo));
  auto x = input.data();
  for (std::int64_t p = 0; p < planes; ++p) {
    for (std::int64_t oy = 0; oy < ho; ++oy) {
      const double* srow = x.data() + (p * h + oy / 2) * w;
      double* drow = out.data() + (p * ho + oy) * wo;
      for (std::int64_t ox = 0; ox < wo; ++ox) drow[ox] = srow[ox / 2];
    }
  }
  return make_result(std::move(out_shape), std::move(out), {input}, [planes, h, w](Node& o) {
    auto& g = grad_of(o, 0);
    const std::int64_t ho = 2 * h, wo = 2 * w;
    for (std::int64_t p = 0; p < planes; ++p) {
      for (std::int64_t oy = 0; oy < ho; ++oy) {
        const double* srow = o.grad.data() + (p * ho + oy) * wo;
        double* drow = g.data() + (p * h + oy / 2) * w;
        for (std::int64_t ox = 0; ox < wo; ++ox) drow[ox / 2] += srow[ox];
      }
    }
  });
}

namespace {

// Shared normalize-then-affine kernel. `groups` rows of `len` contiguous
// values; the affine parameter for row r is param[r % period] when
// `per_row` is set, otherwise param[i] for the i-th element of a row.
struct NormLayout {
  std::int64_t groups, len, period;
  bool per_row;
};

Tensor normalize_affine(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps,
                        NormLayout lay) {
  auto x = input.data();
  auto ga = gamma.data();
  auto be = beta.data();
  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(static_cast<std::size_t>(lay.groups));
  const double n = static_cast<double>(lay.len);
  for (std::int64_t r = 0; r < lay.groups; ++r) {
    const double* xr = x.data() + r * lay.len;
    double mu = 0.0;
    for (std::int64_t i = 0; i < lay.len; ++i) mu += xr[i];
    mu /= n;
    double var = 0.0;
    for (std::int64_t i = 0; i < lay.len; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(r)] = is;
    for (std::int64_t i = 0; i < lay.len; ++i) {
      const auto k = static_cast<std::size_t>(r * lay.len + i);
      xhat[k] = (xr[i] - mu) * is;
      const auto pi = static_cast<std::size_t>(lay.per_row ? r % lay.period : i);
      out[k] = ga[pi] * xhat[k] + be[pi];
    }
  }
  return make_result(
      input.shape(), std::move(out), {input, gamma, beta},
      [lay, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& o) {
        const auto& ga = value_of(o, 1);
        const double n = static_cast<double>(lay.len);
        std::vector<double> dxhat(static_cast<std::size_t>(lay.len));
        for (std::int64_t r = 0; r < lay.groups; ++r) {
          double s1 = 0.0, s2 = 0.0;
          for (std::int64_t i = 0; i < lay.len; ++i) {
            const auto k = static_cast<std::size_t>(r * lay.len + i);
            const auto pi = static_cast<std::size_t>(lay.per_row ? r % lay.period : i);
            const double dy = o.grad[k];
            if (wants(o, 1)) grad_of(o, 1)[pi] += dy * xhat[k];
            if (wants(o, 2)) grad_of(o, 2)[pi] += dy;
            dxhat[static_cast<std::size_t>(i)] = dy * ga[pi];
            s1 += dxhat[static_cast<std::size_t>(i)];
            s2 += dxhat[static_cast<std::size_t>(i)] * xhat[k];
          }
          if (!wants(o, 0)) continue;
          auto& gx = grad_of(o, 0);
          const double is = inv_std[static_cast<std::size_t>(r)];
          for (std::int64_t i = 0; i < lay.len; ++i) {
            const auto k = static_cast<std::size_t>(r * lay.len + i);
            gx[k] += is / n * (n * dxhat[static_cast<std::size_t>(i)] - s1 - xhat[k] * s2);
          }
        }
      });
}

}  // namespace

Tensor instance_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps) {
  const auto d = image_dims(input, "instance_norm");
  require_vector(gamma, d.c, "instance_norm", "gamma");
  require_vector(beta, d.c, "instance_norm", "beta");
  if (d.h * d.w < 2) throw ShapeError("instance_norm: needs at least 2 spatial positions");
  return normalize_affine(input, gamma, beta, eps, {d.n * d.c, d.h * d.w, d.c, true});
}

Tensor layer_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps) {
  if (input.rank() < 1) throw ShapeError("layer_norm: scalar input");
  const std::int64_t c = input.dim(-1);
  require_vector(gamma, c, "layer_norm", "gamma");
  require_vector(beta, c, "layer_norm", "beta");
  return normalize_affine(input, gamma, beta, eps, {input.numel() / c, c, c, false});
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() < 1 || weight.rank() != 2 || input.dim(-1) != weight.dim(1)) {
    throw ShapeError("linear: input " + shape_str(input.shape()) + " incompatible with weight " +
                     shape_str(weight.shape()));
  }
  const std::int64_t cin = weight.dim(1), cout = weight.dim(0);
  const std::int64_t rows = input.numel() / cin;
  const bool has_bias = bias.defined();
  if (has_bias) require_vector(bias, cout, "linear", "bias");
  std::vector<double> out(static_cast<std::size_t>(rows * cout));
  MapMat y(out.data(), rows, cout);
  y.noalias() = CMapMat(input.data().data(), rows, cin) *
                CMapMat(weight.data().data(), cout, cin).transpose();
  if (has_bias) {
    Eigen::Map<const Eigen::RowVectorXd> b(bias.data().data(), cout);
    y.rowwise() += b;
  }
  Shape out_shape = input.shape();
  out_shape.back() = cout;
  auto backward = [rows, cin, cout, has_bias](Node& o) {
    CMapMat dy(o.grad.data(), rows, cout);
    if (wants(o, 0)) {
      MapMat dx(grad_of(o, 0).data(), rows, cin);
      dx.noalias() += dy * CMapMat(value_of(o, 1).data(), cout, cin);
    }
    if (wants(o, 1)) {
      MapMat dw(grad_of(o, 1).data(), cout, cin);
      dw.noalias() += dy.transpose() * CMapMat(value_of(o, 0).data(), rows, cin);
    }
    if (has_bias && wants(o, 2)) {
      Eigen::Map<Eigen::RowVectorXd> db(grad_of(o, 2).data(), cout);
      db += dy.colwise().sum();
    }
  };
  if (has_bias) return make_result(std::move(out_shape), std::move(out), {input, weight, bias}, backward);
  return make_result(std::move(out_shape), std::move(out), {input, weight}, backward);
}

Tensor softmax(const Tensor& input) {
  if (input.rank() < 1) throw ShapeError("softmax: scalar input");
  const std::int64_t n = input.dim(-1);
  const std::int64_t rows = n == 0 ? 0 : input.numel() / n;
  auto x = input.data();
  std::vector<double> out(x.size());
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * n;
    double* yr = out.data() + r * n;
    const double m = *std::max_element(xr, xr + n);
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i) s += (yr[i] = std::exp(xr[i] - m));
    for (std::int64_t i = 0; i < n; ++i) yr[i] /= s;
  }
  return make_result(input.shape(), std::move(out), {input}, [rows, n](Node& o) {
    auto& g = grad_of(o, 0);
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* y = o.value.data() + r * n;
      const double* dy = o.grad.data() + r * n;
      double dot = 0.0;
      for (std::int64_t i = 0; i < n; ++i) dot += y[i] * dy[i];
      for (std::int64_t i = 0; i < n; ++i) g[static_cast<std::size_t>(r * n + i)] += y[i] * (dy[i] - dot);
    }
  });
}

}  // namespace aft::ops
