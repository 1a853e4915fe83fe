#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "catprobe/source.hpp"

namespace catprobe {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoParent = static_cast<NodeId>(-1);

// Half-open byte range [start, end) into SourceUnit::code.
struct ByteSpan {
  std::uint32_t start = 0;
  std::uint32_t end = 0;

  std::uint32_t size() const { return end - start; }
  bool empty() const { return end <= start; }
  friend bool operator==(const ByteSpan&, const ByteSpan&) = default;
};

struct UAstNode {
  NodeId id = 0;
  std::string kind;
  ByteSpan span;
  NodeId parent = kNoParent;
  std::vector<NodeId> children;
  bool named = false;

  bool is_leaf() const { return children.empty(); }
  friend bool operator==(const UAstNode&, const UAstNode&) = default;
};

// Parse tree plus one undirected edge between every pair of consecutive
// leaves in source order. Node ids are preorder positions, so
// nodes[id].id == id and the root is node 0.
struct UAst {
  Language language = Language::python;
  std::vector<UAstNode> nodes;
  std::vector<NodeId> leaf_order;
  std::vector<std::pair<NodeId, NodeId>> adjacency_edges;

  std::size_t leaf_count() const { return leaf_order.size(); }

  // Parent-child edges followed by the adjacency edges.
  std::vector<std::pair<NodeId, NodeId>> undirected_edges() const;

  friend bool operator==(const UAst&, const UAst&) = default;
};

struct LeafToken {
  std::size_t index = 0;
  std::string text;
  std::string type_label;
  ByteSpan span;
  NodeId node_id = 0;
};

struct ParseOptions {
  // Keep samples whose tree has ERROR/MISSING nodes; error nodes then behave
  // like any other node.
  bool allow_errors = false;
  // Drop comment leaves from leaf_order (they stay in the tree).
  bool exclude_comments = false;
};

// Throws UnsupportedLanguage or SyntaxError. A tree without any non-empty
// leaf is rejected as SyntaxError.
UAst parse_source(const SourceUnit& unit, const ParseOptions& options = {});

std::vector<LeafToken> leaf_tokens(const UAst& uast, const SourceUnit& unit);

// Runtime and grammar versions compiled into this build, keyed by
// component name ("tree-sitter", "tree-sitter-python", ...).
const std::map<std::string, std::string>& grammar_versions();

}  // namespace catprobe
