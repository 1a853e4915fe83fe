#include <gtest/gtest.h>

#include <sstream>

#include "catprobe/distance.hpp"
#include "catprobe/errors.hpp"
#include "support/oracles.hpp"
#include "support/snippets.hpp"

namespace catprobe {
namespace {

// Adds a node under `parent` and returns its id.
NodeId add_node(UAst& u, NodeId parent, std::string kind, ByteSpan span) {
  const auto id = static_cast<NodeId>(u.nodes.size());
  u.nodes.push_back({id, std::move(kind), span, parent, {}, true});
  if (parent != kNoParent) u.nodes[parent].children.push_back(id);
  return id;
}

void link_leaves(UAst& u) {
  u.leaf_order.clear();
  u.adjacency_edges.clear();
  for (const auto& n : u.nodes)
    if (n.is_leaf()) u.leaf_order.push_back(n.id);
  for (std::size_t i = 1; i < u.leaf_order.size(); ++i) u.adjacency_edges.emplace_back(u.leaf_order[i - 1], u.leaf_order[i]);
}

// Spine of n internal nodes, each holding one leaf and the next spine node.
UAst chain_tree(std::size_t n) {
  UAst u;
  NodeId spine = add_node(u, kNoParent, "spine", {0, static_cast<std::uint32_t>(n)});
  for (std::size_t i = 0; i < n; ++i) {
    add_node(u, spine, "leaf", {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i + 1)});
    if (i + 1 < n) spine = add_node(u, spine, "spine", {static_cast<std::uint32_t>(i + 1), static_cast<std::uint32_t>(n)});
  }
  link_leaves(u);
  return u;
}

void expect_matches_oracle(const UAst& uast, const DistanceMatrix& d) {
  const auto fw = testing::floyd_warshall_leaves(uast);
  ASSERT_EQ(d.size(), fw.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.size(); ++j) ASSERT_EQ(d(i, j), fw[i][j]) << "cell " << i << "," << j;
}

TEST(DistanceMatrix, SingleLeaf) {
  UAst u;
  add_node(u, kNoParent, "x", {0, 1});
  link_leaves(u);
  const auto d = distance_matrix(u);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d(0, 0), 0u);
}

TEST(DistanceMatrix, ThreeSiblingsUnderOneRoot) {
  UAst u;
  const auto root = add_node(u, kNoParent, "root", {0, 3});
  for (std::uint32_t i = 0; i < 3; ++i) add_node(u, root, "leaf", {i, i + 1});
  link_leaves(u);
  const DistanceMatrix expected(3, {0, 1, 2, 1, 0, 1, 2, 1, 0});
  EXPECT_EQ(distance_matrix(u), expected);
  EXPECT_EQ(distance_matrix_serial(u), expected);
}

TEST(DistanceMatrix, ChainTreesReduceToIndexGap) {
  for (std::size_t n = 1; n <= 6; ++n) {
    const auto u = chain_tree(n);
    const auto d = distance_matrix(u);
    expect_matches_oracle(u, d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(d(i, j), i > j ? i - j : j - i);
  }
}

std::vector<std::pair<SourceUnit, UAst>> parsed_snippets() {
  std::vector<std::pair<SourceUnit, UAst>> out;
  for (const auto& s : testing::small_snippets()) {
    auto unit = make_source_unit("s", s.language, s.code);
    auto uast = parse_source(unit);
    out.emplace_back(std::move(unit), std::move(uast));
  }
  auto unit = make_source_unit("buf", Language::python, testing::kBufferSnippet);
  auto uast = parse_source(unit);
  out.emplace_back(std::move(unit), std::move(uast));
  return out;
}

TEST(DistanceMatrix, AgreesWithFloydWarshallOnSnippets) {
  for (const auto& [unit, uast] : parsed_snippets()) {
    SCOPED_TRACE(unit.code);
    expect_matches_oracle(uast, distance_matrix(uast));
  }
}

TEST(DistanceMatrix, MetricInvariants) {
  for (const auto& [unit, uast] : parsed_snippets()) {
    SCOPED_TRACE(unit.code);
    const auto d = distance_matrix(uast);
    const auto n = d.size();
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(d(i, i), 0u);
      if (i + 1 < n) EXPECT_EQ(d(i, i + 1), 1u);
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_EQ(d(i, j), d(j, i));
        if (i != j) EXPECT_GE(d(i, j), 1u);
        for (std::size_t k = 0; k < n; ++k) EXPECT_LE(d(i, k), d(i, j) + d(j, k));
      }
    }
  }
}

TEST(DistanceMatrix, AdjacencyEdgesNeverLengthenPaths) {
  for (const auto& [unit, uast] : parsed_snippets()) {
    const auto with = distance_matrix(uast);
    const auto tree_only = testing::floyd_warshall_leaves(uast, false);
    for (std::size_t i = 0; i < with.size(); ++i)
      for (std::size_t j = 0; j < with.size(); ++j) EXPECT_LE(with(i, j), tree_only[i][j]);
  }
}

TEST(DistanceMatrix, ParallelMatchesSerialOnLargerInput) {
  std::string code = "def f(a):\n";
  for (int i = 0; i < 60; ++i) code += "    a = g(a, " + std::to_string(i) + ") + a.b[i]\n";
  const auto unit = make_source_unit("big", Language::python, code);
  const auto uast = parse_source(unit);
  ASSERT_GT(uast.leaf_count(), 500u);
  EXPECT_EQ(distance_matrix(uast), distance_matrix_serial(uast));
}

TEST(DistanceExport, CsvHasHeaderAndQuotedLabels) {
  const DistanceMatrix d(2, {0, 1, 1, 0});
  const std::vector<std::string> labels{"a,b", "\"q\""};
  std::ostringstream out;
  write_distance_csv(out, d, labels);
  EXPECT_EQ(out.str(), "token,\"a,b\",\"\"\"q\"\"\"\n\"a,b\",0,1\n\"\"\"q\"\"\",1,0\n");
}

TEST(DistanceExport, BlockRoundTrip) {
  const DistanceMatrix d(3, {0, 1, 2, 1, 0, 70000, 2, 70000, 0});
  EXPECT_EQ(decode_distance_block(encode_distance_block(d), 3), d);
  EXPECT_THROW(decode_distance_block(encode_distance_block(d), 2), ShapeError);
}

}  // namespace
}  // namespace catprobe
