// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "aftunet/attention.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "aftunet/errors.hpp"

namespace aft {

namespace {

using detail::Node;

// Token t of group g, element s: t = base(g) + s * stride.
struct Grouping {
  std::int64_t groups, size, stride, group_step;

  std::int64_t token(std::int64_t g, std::int64_t s) const { return g * group_step + s * stride; }
};

Grouping grouping(AttentionKind kind, std::int64_t n, std::int64_t p) {
  switch (kind) {
    case AttentionKind::kFull:
      return {1, n * p, 1, 0};
    case AttentionKind::kIntra:
      return {n, p, 1, p};
    case AttentionKind::kInter:
      return {p, n, p, 1};
  }
  throw ConfigError("unknown attention kind");
}

struct Dims {
  std::int64_t n, p, c, heads, ch;
};

Dims check_inputs(const Tensor& q, const Tensor& k, const Tensor* v, int heads) {
  if (q.rank() != 3) throw ShapeError("attention expects [N, P, C], got " + shape_str(q.shape()));
  if (k.shape() != q.shape() || (v && v->shape() != q.shape())) {
    throw ShapeError("attention q/k/v shapes differ: " + shape_str(q.shape()) + ", " +
                     shape_str(k.shape()) + (v ? ", " + shape_str(v->shape()) : ""));
  }
  const std::int64_t c = q.dim(2);
  if (heads < 1 || c % heads != 0) {
    throw ShapeError("channel width " + std::to_string(c) + " not divisible by " +
                     std::to_string(heads) + " heads");
  }
  return {q.dim(0), q.dim(1), c, heads, c / heads};
}

// alpha[a][g][i][j] for all heads and groups.
std::vector<double> compute_weights(std::span<const double> q, std::span<const double> k,
                                    const Dims& d, const Grouping& gr) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(d.ch));
  const std::int64_t s = gr.size;
  std::vector<double> alpha(static_cast<std::size_t>(d.heads * gr.groups * s * s));
  for (std::int64_t a = 0; a < d.heads; ++a) {
    for (std::int64_t g = 0; g < gr.groups; ++g) {
      double* block = alpha.data() + (a * gr.groups + g) * s * s;
      for (std::int64_t i = 0; i < s; ++i) {
        const double* qi = q.data() + gr.token(g, i) * d.c + a * d.ch;
        double* row = block + i * s;
        double mx = -INFINITY;
        for (std::int64_t j = 0; j < s; ++j) {
          const double* kj = k.data() + gr.token(g, j) * d.c + a * d.ch;
          double dot = 0.0;
          for (std::int64_t c = 0; c < d.ch; ++c) dot += qi[c] * kj[c];
          row[j] = dot * scale;
          mx = std::max(mx, row[j]);
        }
        double total = 0.0;
        for (std::int64_t j = 0; j < s; ++j) total += row[j] = std::exp(row[j] - mx);
        for (std::int64_t j = 0; j < s; ++j) row[j] /= total;
      }
    }
  }
  return alpha;
}

}  // namespace

const char* attention_kind_name(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::kFull:
      return "full";
    case AttentionKind::kIntra:
      return "intra";
    case AttentionKind::kInter:
      return "inter";
  }
  return "?";
}

Tensor attention_weights(const Tensor& q, const Tensor& k, int heads, AttentionKind kind) {
  const Dims d = check_inputs(q, k, nullptr, heads);
  const Grouping gr = grouping(kind, d.n, d.p);
  return Tensor::from_data({d.heads, gr.groups, gr.size, gr.size},
                           compute_weights(q.data(), k.data(), d, gr));
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, AttentionKind kind,
                 AttentionCounters* counters) {
  const Dims d = check_inputs(q, k, &v, heads);
  const Grouping gr = grouping(kind, d.n, d.p);
  const std::int64_t s = gr.size;
  auto alpha = std::make_shared<std::vector<double>>(compute_weights(q.data(), k.data(), d, gr));
  if (counters) {
    ++counters->calls;
    counters->dot_products += d.heads * gr.groups * s * s;
    counters->map_elements += static_cast<std::int64_t>(alpha->size());
  }

  std::vector<double> out(q.data().size(), 0.0);
  const double* vv = v.data().data();
  for (std::int64_t a = 0; a < d.heads; ++a) {
    for (std::int64_t g = 0; g < gr.groups; ++g) {
      const double* block = alpha->data() + (a * gr.groups + g) * s * s;
      for (std::int64_t i = 0; i < s; ++i) {
        double* oi = out.data() + gr.token(g, i) * d.c + a * d.ch;
        for (std::int64_t j = 0; j < s; ++j) {
          const double w = block[i * s + j];
          const double* vj = vv + gr.token(g, j) * d.c + a * d.ch;
          for (std::int64_t c = 0; c < d.ch; ++c) oi[c] += w * vj[c];
        }
      }
    }
  }

  return make_result(q.shape(), std::move(out), {q, k, v}, [alpha, d, gr](Node& o) {
    const std::int64_t s = gr.size;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d.ch));
    const auto& qv = o.inputs[0]->value;
    const auto& kv = o.inputs[1]->value;
    const auto& vv = o.inputs[2]->value;
    const bool need_q = o.inputs[0]->requires_grad, need_k = o.inputs[1]->requires_grad,
               need_v = o.inputs[2]->requires_grad;
    double* dq = need_q ? o.inputs[0]->ensure_grad().data() : nullptr;
    double* dk = need_k ? o.inputs[1]->ensure_grad().data() : nullptr;
    double* dv = need_v ? o.inputs[2]->ensure_grad().data() : nullptr;
    std::vector<double> ds(static_cast<std::size_t>(s));
    for (std::int64_t a = 0; a < d.heads; ++a) {
      for (std::int64_t g = 0; g < gr.groups; ++g) {
        const double* block = alpha->data() + (a * gr.groups + g) * s * s;
        for (std::int64_t i = 0; i < s; ++i) {
          const double* go = o.grad.data() + gr.token(g, i) * d.c + a * d.ch;
          const double* row = block + i * s;
          double weighted = 0.0;
          for (std::int64_t j = 0; j < s; ++j) {
            const std::int64_t tj = gr.token(g, j) * d.c + a * d.ch;
            double dalpha = 0.0;
            for (std::int64_t c = 0; c < d.ch; ++c) dalpha += go[c] * vv[tj + c];
            ds[j] = dalpha;
            weighted += row[j] * dalpha;
            if (dv) {
              for (std::int64_t c = 0; c < d.ch; ++c) dv[tj + c] += row[j] * go[c];
            }
          }
          if (!dq && !dk) continue;
          const std::int64_t ti = gr.token(g, i) * d.c + a * d.ch;
          for (std::int64_t j = 0; j < s; ++j) {
            const double dlogit = row[j] * (ds[j] - weighted) * scale;
            if (dlogit == 0.0) continue;
            const std::int64_t tj = gr.token(g, j) * d.c + a * d.ch;
            for (std::int64_t c = 0; c < d.ch; ++c) {
              if (dq) dq[ti + c] += dlogit * kv[tj + c];
              if (dk) dk[tj + c] += dlogit * qv[ti + c];
            }
          }
        }
      }
    }
  });
}

}  // namespace aft
