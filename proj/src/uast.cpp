#include "catprobe/uast.hpp"

#include <tree_sitter/api.h>

#include <memory>
#include <string>

#include "catprobe/errors.hpp"

extern "C" {
const TSLanguage* tree_sitter_go();
const TSLanguage* tree_sitter_java();
const TSLanguage* tree_sitter_javascript();
const TSLanguage* tree_sitter_python();
}

namespace catprobe {
namespace {

struct ParserDeleter {
  void operator()(TSParser* p) const { ts_parser_delete(p); }
};
struct TreeDeleter {
  void operator()(TSTree* t) const { ts_tree_delete(t); }
};

const TSLanguage* grammar_for(Language lang) {
  switch (lang) {
    case Language::go: return tree_sitter_go();
    case Language::java: return tree_sitter_java();
    case Language::javascript: return tree_sitter_javascript();
    case Language::python: return tree_sitter_python();
  }
  throw UnsupportedLanguage("no grammar for language");
}

bool is_comment_kind(std::string_view kind) {
  return kind == "comment" || kind == "line_comment" || kind == "block_comment" || kind == "html_comment";
}

// Bytes the grammars treat as separators: ASCII whitespace plus the BOM,
// ZERO WIDTH SPACE and WORD JOINER that tree-sitter-python lists as extras.
bool is_ignorable_gap(std::string_view gap) {
  std::size_t i = 0;
  while (i < gap.size()) {
    const char c = gap[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      ++i;
      continue;
    }
    const auto rest = gap.substr(i);
    if (rest.starts_with("\xEF\xBB\xBF") || rest.starts_with("\xE2\x80\x8B") || rest.starts_with("\xE2\x81\xA0")) {
      i += 3;
      continue;
    }
    return false;
  }
  return true;
}

// A node whose children leave non-separator bytes of its own span
// uncovered (e.g. Python string_content around escape sequences) is treated
// as a single leaf, so that every token byte belongs to some leaf.
bool children_cover(TSNode node, std::string_view code) {
  std::uint32_t cursor = ts_node_start_byte(node);
  const std::uint32_t count = ts_node_child_count(node);
  for (std::uint32_t i = 0; i < count; ++i) {
    TSNode child = ts_node_child(node, i);
    const std::uint32_t start = ts_node_start_byte(child);
    if (start > cursor && !is_ignorable_gap(code.substr(cursor, start - cursor))) return false;
    cursor = std::max(cursor, ts_node_end_byte(child));
  }
  const std::uint32_t end = ts_node_end_byte(node);
  return end <= cursor || is_ignorable_gap(code.substr(cursor, end - cursor));
}

std::string describe_error(TSNode root) {
  TSTreeCursor cursor = ts_tree_cursor_new(root);
  std::string what = "parse tree contains errors (no visible error node; likely a missing terminator at end of input)";
  for (;;) {
    TSNode node = ts_tree_cursor_current_node(&cursor);
    if (ts_node_is_error(node) || ts_node_is_missing(node)) {
      const TSPoint p = ts_node_start_point(node);
      what = std::string(ts_node_is_missing(node) ? "missing " : "error node ") + ts_node_type(node) + " at line " +
             std::to_string(p.row + 1) + ", column " + std::to_string(p.column + 1);
      break;
    }
    if (ts_node_has_error(node) && ts_tree_cursor_goto_first_child(&cursor)) continue;
    bool advanced = false;
    while (!(advanced = ts_tree_cursor_goto_next_sibling(&cursor))) {
      if (!ts_tree_cursor_goto_parent(&cursor)) break;
    }
    if (!advanced) break;
  }
  ts_tree_cursor_delete(&cursor);
  return what;
}

}  // namespace

std::vector<std::pair<NodeId, NodeId>> UAst::undirected_edges() const {
  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(nodes.size() + adjacency_edges.size());
  for (const auto& node : nodes)
    if (node.parent != kNoParent) edges.emplace_back(node.parent, node.id);
  edges.insert(edges.end(), adjacency_edges.begin(), adjacency_edges.end());
  return edges;
}

UAst parse_source(const SourceUnit& unit, const ParseOptions& options) {
  std::unique_ptr<TSParser, ParserDeleter> parser(ts_parser_new());
  if (!ts_parser_set_language(parser.get(), grammar_for(unit.language)))
    throw UnsupportedLanguage("grammar ABI mismatch for " + std::string(to_string(unit.language)));

  std::unique_ptr<TSTree, TreeDeleter> tree(
      ts_parser_parse_string(parser.get(), nullptr, unit.code.data(), static_cast<std::uint32_t>(unit.code.size())));
  if (!tree) throw SyntaxError(unit.id + ": parser produced no tree");

  const TSNode root = ts_tree_root_node(tree.get());
  if (ts_node_has_error(root) && !options.allow_errors) throw SyntaxError(unit.id + ": " + describe_error(root));

  UAst uast;
  uast.language = unit.language;

  // Iterative preorder walk; ids are assigned in visit order.
  struct Frame {
    TSNode node;
    NodeId parent;
  };
  std::vector<Frame> stack{{root, kNoParent}};
  while (!stack.empty()) {
    const Frame frame = stack.back();
    stack.pop_back();

    const auto id = static_cast<NodeId>(uast.nodes.size());
    UAstNode node;
    node.id = id;
    node.kind = ts_node_type(frame.node);
    node.span = {ts_node_start_byte(frame.node), ts_node_end_byte(frame.node)};
    node.parent = frame.parent;
    node.named = ts_node_is_named(frame.node);
    uast.nodes.push_back(std::move(node));
    if (frame.parent != kNoParent) uast.nodes[frame.parent].children.push_back(id);

    const std::uint32_t count = ts_node_child_count(frame.node);
    if (count == 0 || !children_cover(frame.node, unit.code)) continue;
    for (std::uint32_t i = count; i-- > 0;) stack.push_back({ts_node_child(frame.node, i), id});
  }

  for (const auto& node : uast.nodes) {
    if (!node.is_leaf() || node.span.empty()) continue;
    if (options.exclude_comments && is_comment_kind(node.kind)) continue;
    uast.leaf_order.push_back(node.id);
  }
  if (uast.leaf_order.empty()) throw SyntaxError(unit.id + ": no tokens");

  for (std::size_t i = 1; i < uast.leaf_order.size(); ++i)
    uast.adjacency_edges.emplace_back(uast.leaf_order[i - 1], uast.leaf_order[i]);
  return uast;
}

std::vector<LeafToken> leaf_tokens(const UAst& uast, const SourceUnit& unit) {
  std::vector<LeafToken> tokens;
  tokens.reserve(uast.leaf_order.size());
  for (std::size_t i = 0; i < uast.leaf_order.size(); ++i) {
    const auto& node = uast.nodes.at(uast.leaf_order[i]);
    LeafToken token;
    token.index = i;
    token.span = node.span;
    token.text = unit.code.substr(node.span.start, node.span.size());
    token.type_label = node.kind;
    token.node_id = node.id;
    tokens.push_back(std::move(token));
  }
  return tokens;
}

const std::map<std::string, std::string>& grammar_versions() {
  static const std::map<std::string, std::string> versions{
      {"tree-sitter", CATPROBE_TREE_SITTER_VERSION},
      {"tree-sitter-go", CATPROBE_GRAMMAR_GO_VERSION},
      {"tree-sitter-java", CATPROBE_GRAMMAR_JAVA_VERSION},
      {"tree-sitter-javascript", CATPROBE_GRAMMAR_JAVASCRIPT_VERSION},
      {"tree-sitter-python", CATPROBE_GRAMMAR_PYTHON_VERSION},
  };
  return versions;
}

}  // namespace catprobe
