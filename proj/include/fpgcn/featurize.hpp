#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fpgcn/embed.hpp"
#include "fpgcn/graphs.hpp"
#include "fpgcn/matrix.hpp"

namespace fpgcn {

// Row layout: [ statement embedding (d) | node kind one-hot (11) | violation flag ].
using FeatureMatrix = Matrix;

inline constexpr std::size_t feature_width(std::size_t embedding_dim) {
  return embedding_dim + kNodeKindCount + 1;
}

inline std::vector<double> node_type_onehot(NodeKind kind) {
  std::vector<double> out(kNodeKindCount, 0.0);
  out.at(static_cast<std::size_t>(kind)) = 1.0;
  return out;
}

inline FeatureMatrix assemble_features(const Cpg &g, const EmbeddingTable &table) {
  const std::size_t d = table.dim;
  FeatureMatrix x(g.nodes.size(), feature_width(d));
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const CpgNode &node = g.nodes[i];
    auto row = x.row(i);
    const std::vector<double> text = embed_statement(tokenize(node.text), table);
    std::copy(text.begin(), text.end(), row.begin());
    row[d + static_cast<std::size_t>(node.kind)] = 1.0;
    row[d + kNodeKindCount] = node.is_violation ? 1.0 : 0.0;
  }
  return x;
}

// Undirected pair (lo, hi) with lo < hi.
using UndirectedEdge = std::pair<std::size_t, std::size_t>;

struct GraphExample {
  FeatureMatrix features;
  std::vector<UndirectedEdge> adjacency;
  std::optional<bool> label; // true: the report is a false positive
  std::string case_id;

  std::size_t node_count() const noexcept { return features.rows(); }
};

// All four edge kinds flattened to one undirected, deduplicated edge list.
// Self-loops are left to the GCN normalization.
inline std::vector<UndirectedEdge> undirected_adjacency(const Cpg &g) {
  std::set<UndirectedEdge> pairs;
  for (const CpgEdge &e : g.edges)
    if (e.src != e.dst)
      pairs.emplace(std::min(e.src, e.dst), std::max(e.src, e.dst));
  return {pairs.begin(), pairs.end()};
}

inline GraphExample to_example(const Cpg &g, const EmbeddingTable &table,
                               std::optional<bool> label, std::string case_id) {
  return GraphExample{assemble_features(g, table), undirected_adjacency(g), label,
                      std::move(case_id)};
}

} // namespace fpgcn
