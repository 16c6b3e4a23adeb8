// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "aftunet/bench.hpp"

#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "aftunet/attention.hpp"
#include "aftunet/errors.hpp"

namespace aft {

std::string Grid::str() const {
  return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(neighbors);
}

Grid parse_grid(const std::string& text) {
  Grid g;
  char x1 = 0, x2 = 0;
  std::istringstream is(text);
  if (!(is >> g.height >> x1 >> g.width >> x2 >> g.neighbors) || x1 != 'x' || x2 != 'x' ||
      is.peek() != std::char_traits<char>::eof()) {
    throw ConfigError("grid must look like HxWxN, got '" + text + "'");
  }
  if (g.height < 1 || g.width < 1 || g.neighbors < 1) {
    throw ConfigError("grid extents must be positive, got '" + text + "'");
  }
  return g;
}

AttnCostReport count_comparisons(Grid grid) {
  if (grid.height < 1 || grid.width < 1 || grid.neighbors < 1) {
    throw ConfigError("grid extents must be positive");
  }
  NoGradGuard no_grad;
  const Tensor t = Tensor::zeros({grid.neighbors, grid.positions(), 1});
  AttentionCounters full, fact;
  attention_full3d(t, t, t, 1, &full);
  attention_inter(t, t, t, 1, &fact);
  attention_intra(t, t, t, 1, &fact);

  AttnCostReport r;
  r.grid = grid;
  const std::int64_t queries = grid.tokens();
  r.comparisons_per_query_full = full.dot_products / queries;
  r.comparisons_per_query_factorized = fact.dot_products / queries;
  r.map_elements_full = full.map_elements;
  r.map_elements_factorized = fact.map_elements;
  r.reduction_ratio = static_cast<double>(r.comparisons_per_query_full) /
                      static_cast<double>(r.comparisons_per_query_factorized);

  const std::int64_t want_full = grid.tokens();
  const std::int64_t want_fact = grid.positions() + grid.neighbors;
  if (full.dot_products % queries != 0 || fact.dot_products % queries != 0 ||
      r.comparisons_per_query_full != want_full || r.comparisons_per_query_factorized != want_fact) {
    throw std::logic_error("comparison counter mismatch on grid " + grid.str() + ": full " +
                           std::to_string(r.comparisons_per_query_full) + " (expected " +
                           std::to_string(want_full) + "), factorized " +
                           std::to_string(r.comparisons_per_query_factorized) + " (expected " +
                           std::to_string(want_fact) + ")");
  }
  return r;
}

AttentionMemory attention_memory(Grid grid, int heads, int bytes_per_scalar) {
  if (heads < 1 || bytes_per_scalar < 1) throw ConfigError("heads and scalar size must be positive");
  AttentionMemory m;
  const std::int64_t n = grid.tokens();
  m.full_bytes = static_cast<std::int64_t>(heads) * n * n * bytes_per_scalar;
  m.factorized_bytes =
      static_cast<std::int64_t>(heads) * n * (grid.positions() + grid.neighbors) * bytes_per_scalar;
  m.ratio = static_cast<double>(m.full_bytes) / static_cast<double>(m.factorized_bytes);
  return m;
}

std::string format_cost_table(const std::vector<AttnCostReport>& reports, int heads,
                              int bytes_per_scalar) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "grid" << std::right << std::setw(12) << "cmp_full"
     << std::setw(12) << "cmp_fact" << std::setw(9) << "ratio" << std::setw(16) << "mem_full_B"
     << std::setw(16) << "mem_fact_B" << '\n';
  for (const auto& r : reports) {
    const AttentionMemory m = attention_memory(r.grid, heads, bytes_per_scalar);
    os << std::left << std::setw(12) << r.grid.str() << std::right << std::setw(12)
       << r.comparisons_per_query_full << std::setw(12) << r.comparisons_per_query_factorized
       << std::setw(9) << std::fixed << std::setprecision(2) << r.reduction_ratio << std::setw(16)
       << m.full_bytes << std::setw(16) << m.factorized_bytes << '\n';
  }
  os << "memory: analytic attention-map sizes, heads=" << heads
     << ", bytes_per_scalar=" << bytes_per_scalar << '\n';
  return os.str();
}

std::string format_cost_metrics(const AttnCostReport& r, const AttentionMemory& m) {
  std::ostringstream os;
  os << "grid=" << r.grid.str() << '\n'
     << "comparisons_per_query_full=" << r.comparisons_per_query_full << '\n'
     << "comparisons_per_query_factorized=" << r.comparisons_per_query_factorized << '\n'
     << "attention_map_elements_full=" << r.map_elements_full << '\n'
     << "attention_map_elements_factorized=" << r.map_elements_factorized << '\n'
     << "reduction_ratio=" << std::setprecision(17) << r.reduction_ratio << '\n'
     << "memory_bytes_full=" << m.full_bytes << '\n'
     << "memory_bytes_factorized=" << m.factorized_bytes << '\n';
  return os.str();
}

std::vector<ModuleProfile> profile_model(const ModelConfig& cfg) {
  AftUnet model(cfg);
  const auto counts = model.parameters().count_by_prefix(1);
  auto count_of = [&](const std::string& k) {
    auto it = counts.find(k);
    return it == counts.end() ? std::int64_t{0} : it->second;
  };
  const std::int64_t n = cfg.neighbors;
  std::int64_t enc_act = 0, dec_act = 0;
  for (int b = 0; b < cfg.codec.blocks; ++b) {
    const std::int64_t hw = static_cast<std::int64_t>(cfg.height >> b) * (cfg.width >> b);
    const std::int64_t c = cfg.codec.channels[static_cast<std::size_t>(b)];
    enc_act += 2 * n * c * hw;  // two conv blocks per level
    if (b < cfg.codec.blocks - 1) dec_act += 2 * n * c * hw;
  }
  dec_act += n * cfg.codec.classes * cfg.height * cfg.width;
  const TransformerConfig t = cfg.transformer();
  const Grid g{t.height, t.width, t.neighbors};
  const std::int64_t tokens = g.tokens();
  // per block: qkv twice, two merges, MLP hidden and output, plus weight maps
  const std::int64_t per_block = tokens * t.channels * (3 * 2 + 2 + t.mlp_ratio + 1) +
                                 static_cast<std::int64_t>(t.heads) * tokens * (g.positions() + g.neighbors);
  std::vector<ModuleProfile> rows{
      {"encoder", count_of("encoder"), enc_act},
      {"transformer", count_of("transformer"), per_block * t.layers},
      {"decoder", count_of("decoder"), dec_act},
  };
  std::int64_t p = 0, a = 0;
  for (const auto& r : rows) p += r.parameters, a += r.activations;
  rows.push_back({"total", p, a});
  return rows;
}

std::string format_profile(const std::vector<ModuleProfile>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(14) << "module" << std::right << std::setw(14) << "parameters"
     << std::setw(16) << "activations" << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(14) << r.name << std::right << std::setw(14) << r.parameters
       << std::setw(16) << r.activations << '\n';
  }
  return os.str();
}

}  // namespace aft
