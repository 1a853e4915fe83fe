#include "catprobe/distance.hpp"

#include <limits>
#include <ostream>

#include "catprobe/codec.hpp"
#include "catprobe/csv.hpp"
#include "catprobe/errors.hpp"

namespace catprobe {
namespace {

constexpr std::uint32_t kUnreached = std::numeric_limits<std::uint32_t>::max();

// Undirected U-AST in CSR form.
struct Graph {
  std::vector<std::size_t> offsets;
  std::vector<NodeId> targets;
};

Graph build_graph(const UAst& uast) {
  const auto edges = uast.undirected_edges();
  Graph g;
  g.offsets.assign(uast.nodes.size() + 1, 0);
  for (const auto& [a, b] : edges) {
    ++g.offsets[a + 1];
    ++g.offsets[b + 1];
  }
  for (std::size_t i = 1; i < g.offsets.size(); ++i) g.offsets[i] += g.offsets[i - 1];
  g.targets.resize(g.offsets.back());
  std::vector<std::size_t> fill(g.offsets.begin(), g.offsets.end() - 1);
  for (const auto& [a, b] : edges) {
    g.targets[fill[a]++] = b;
    g.targets[fill[b]++] = a;
  }
  return g;
}

// Reusable BFS state; `dist` is restored to kUnreached after every run.
struct BfsScratch {
  std::vector<std::uint32_t> dist;
  std::vector<NodeId> queue;

  explicit BfsScratch(std::size_t nodes) : dist(nodes, kUnreached) { queue.reserve(nodes); }
};

void bfs_row(const Graph& g, const std::vector<NodeId>& leaves, std::size_t source, BfsScratch& scratch,
             std::span<std::uint32_t> row) {
  auto& dist = scratch.dist;
  auto& queue = scratch.queue;
  queue.clear();
  dist[leaves[source]] = 0;
  queue.push_back(leaves[source]);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const NodeId u = queue[head];
    for (std::size_t e = g.offsets[u]; e < g.offsets[u + 1]; ++e) {
      const NodeId v = g.targets[e];
      if (dist[v] != kUnreached) continue;
      dist[v] = dist[u] + 1;
      queue.push_back(v);
    }
  }
  for (std::size_t j = 0; j < leaves.size(); ++j) row[j] = dist[leaves[j]];
  for (NodeId v : queue) dist[v] = kUnreached;
}

void check_connected(const DistanceMatrix& d) {
  for (auto cell : d.cells())
    if (cell == kUnreached) throw Error("U-AST is not connected");
}

}  // namespace

DistanceMatrix distance_matrix_serial(const UAst& uast) {
  const Graph g = build_graph(uast);
  const auto& leaves = uast.leaf_order;
  DistanceMatrix d(leaves.size());
  BfsScratch scratch(uast.nodes.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) bfs_row(g, leaves, i, scratch, d.row(i));
  check_connected(d);
  return d;
}

DistanceMatrix distance_matrix(const UAst& uast) {
  const Graph g = build_graph(uast);
  const auto& leaves = uast.leaf_order;
  const auto n = static_cast<std::ptrdiff_t>(leaves.size());
  DistanceMatrix d(leaves.size());
#pragma omp parallel if (n > 32)
  {
    BfsScratch scratch(uast.nodes.size());
#pragma omp for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < n; ++i)
      bfs_row(g, leaves, static_cast<std::size_t>(i), scratch, d.row(static_cast<std::size_t>(i)));
  }
  check_connected(d);
  return d;
}

void write_distance_csv(std::ostream& out, const DistanceMatrix& d, std::span<const std::string> labels) {
  csv::write_matrix(out, d, labels);
}

std::string encode_distance_block(const DistanceMatrix& d) {
  return codec::base64_encode(codec::pack_u32le(d.cells()));
}

DistanceMatrix decode_distance_block(std::string_view b64, std::size_t n) {
  auto cells = codec::unpack_u32le(codec::base64_decode(b64));
  if (cells.size() != n * n)
    throw ShapeError("distance block holds " + std::to_string(cells.size()) + " cells, expected " +
                     std::to_string(n * n));
  return DistanceMatrix(n, std::move(cells));
}

}  // namespace catprobe
