#pragma once

// Reference computations used only by tests. Each one takes a different
// route from the library code it checks.

#include <cstdint>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "catprobe/cat_metric.hpp"
#include "catprobe/matrix.hpp"
#include "catprobe/uast.hpp"

namespace catprobe::testing {

inline constexpr std::uint64_t kInf = std::numeric_limits<std::uint64_t>::max() / 4;

// Edges rebuilt from parent pointers and leaf order, without UAst helpers.
inline std::vector<std::pair<NodeId, NodeId>> oracle_edges(const UAst& uast, bool with_adjacency = true) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t v = 0; v < uast.nodes.size(); ++v)
    if (uast.nodes[v].parent != kNoParent) edges.emplace_back(uast.nodes[v].parent, static_cast<NodeId>(v));
  if (with_adjacency)
    for (std::size_t i = 0; i + 1 < uast.leaf_order.size(); ++i)
      edges.emplace_back(uast.leaf_order[i], uast.leaf_order[i + 1]);
  return edges;
}

// Floyd-Warshall over all nodes, then restricted to the leaves.
inline std::vector<std::vector<std::uint64_t>> floyd_warshall_leaves(const UAst& uast, bool with_adjacency = true) {
  const auto n = uast.nodes.size();
  std::vector<std::vector<std::uint64_t>> dist(n, std::vector<std::uint64_t>(n, kInf));
  for (std::size_t v = 0; v < n; ++v) dist[v][v] = 0;
  for (const auto& [a, b] : oracle_edges(uast, with_adjacency)) {
    dist[a][b] = 1;
    dist[b][a] = 1;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (dist[i][k] + dist[k][j] < dist[i][j]) dist[i][j] = dist[i][k] + dist[k][j];
  const auto m = uast.leaf_order.size();
  std::vector<std::vector<std::uint64_t>> out(m, std::vector<std::uint64_t>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i][j] = dist[uast.leaf_order[i]][uast.leaf_order[j]];
  return out;
}

// Matched and union counts by set algebra: |hot ∩ near| and |hot ∪ near|.
inline PairCounts brute_force_counts(const AttentionMatrix& a, const DistanceMatrix& d, float theta_a,
                                     std::uint32_t theta_d, bool include_diagonal) {
  std::set<std::pair<std::size_t, std::size_t>> hot, near;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (!include_diagonal && i == j) continue;
      if (a(i, j) > theta_a) hot.insert({i, j});
      if (d(i, j) < theta_d) near.insert({i, j});
    }
  std::set<std::pair<std::size_t, std::size_t>> both_sets = hot;
  both_sets.insert(near.begin(), near.end());
  std::uint64_t both = 0;
  for (const auto& cell : hot) both += near.count(cell);
  return {both, both_sets.size()};
}

}  // namespace catprobe::testing
