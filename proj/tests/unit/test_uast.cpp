#include <gtest/gtest.h>

#include <set>

#include "catprobe/errors.hpp"
#include "catprobe/uast.hpp"
#include "support/snippets.hpp"

namespace catprobe {
namespace {

std::vector<std::string> texts(const std::vector<LeafToken>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

std::vector<std::string> types(const std::vector<LeafToken>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens) out.push_back(t.type_label);
  return out;
}

std::vector<LeafToken> tokens_of(Language lang, const std::string& code, const ParseOptions& opt = {}) {
  const auto unit = make_source_unit("t", lang, code);
  return leaf_tokens(parse_source(unit, opt), unit);
}

// Frozen from tree-sitter-python 0.23.6.
TEST(ParseSource, PythonFunctionFixture) {
  const auto tokens = tokens_of(Language::python, "def f():\n    return 1");
  EXPECT_EQ(texts(tokens), (std::vector<std::string>{"def", "f", "(", ")", ":", "return", "1"}));
  EXPECT_EQ(types(tokens), (std::vector<std::string>{"def", "identifier", "(", ")", ":", "return", "integer"}));
}

// Frozen from tree-sitter-java 0.23.5.
TEST(ParseSource, JavaFieldFixture) {
  const auto tokens = tokens_of(Language::java, "public int x;");
  ASSERT_FALSE(tokens.empty());
  EXPECT_EQ(tokens.front().type_label, "public");
  EXPECT_EQ(types(tokens), (std::vector<std::string>{"public", "int", "identifier", ";"}));
}

TEST(ParseSource, EmptySourceIsRejected) {
  EXPECT_THROW(tokens_of(Language::python, ""), SyntaxError);
  EXPECT_THROW(tokens_of(Language::java, "   \n"), SyntaxError);
}

TEST(ParseSource, BrokenCodeIsRejectedUnlessAllowed) {
  const std::string broken = "def f(x:\n  return";
  EXPECT_THROW(tokens_of(Language::python, broken), SyntaxError);
  ParseOptions opt;
  opt.allow_errors = true;
  const auto unit = make_source_unit("b", Language::python, broken);
  const auto uast = parse_source(unit, opt);
  EXPECT_GT(uast.leaf_count(), 0u);
  bool has_error_node = false;
  for (const auto& n : uast.nodes) has_error_node |= n.kind == "ERROR";
  EXPECT_TRUE(has_error_node);
}

TEST(ParseSource, MissingNodesAreNotLeaves) {
  // tree-sitter recovers `f(` by inserting a zero-width ")".
  ParseOptions opt;
  opt.allow_errors = true;
  const auto unit = make_source_unit("m", Language::javascript, "f(a");
  const auto uast = parse_source(unit, opt);
  for (auto id : uast.leaf_order) EXPECT_FALSE(uast.nodes[id].span.empty());
}

TEST(ParseSource, BufferSnippetKeepsMemberAccessTokens) {
  const auto tokens = tokens_of(Language::python, testing::kBufferSnippet);
  const auto t = texts(tokens);
  auto it = std::find(t.begin(), t.end(), "append");
  ASSERT_NE(it, t.end());
  ASSERT_GE(it - t.begin(), 2);
  EXPECT_EQ(*(it - 1), ".");
  EXPECT_EQ(*(it - 2), "tmpbuf");
  EXPECT_EQ(std::count(t.begin(), t.end(), "."), 1);
}

TEST(ParseSource, CommentsKeptByDefault) {
  const auto with = tokens_of(Language::python, "x = 1  # note");
  EXPECT_EQ(with.back().type_label, "comment");
  ParseOptions opt;
  opt.exclude_comments = true;
  const auto without = tokens_of(Language::python, "x = 1  # note", opt);
  EXPECT_EQ(without.size() + 1, with.size());
  EXPECT_NE(without.back().type_label, "comment");
}

TEST(ParseSource, EscapedStringContentStaysCovered) {
  // string_content wraps the escape sequence; the surrounding bytes must
  // still land in a leaf.
  const std::string code = "s = \"a\\nb\"";
  const auto tokens = tokens_of(Language::python, code);
  std::string joined;
  for (const auto& t : tokens) joined += t.text;
  EXPECT_EQ(joined, "s=\"a\\nb\"");
}

TEST(LeafTokens, SingleLeaf) {
  const auto tokens = tokens_of(Language::python, "x");
  ASSERT_EQ(tokens.size(), 1u);
  EXPECT_EQ(tokens[0].index, 0u);
  EXPECT_EQ(tokens[0].type_label, "identifier");
}

std::vector<testing::Snippet> property_corpus() {
  auto all = testing::small_snippets();
  all.push_back({Language::python, testing::kBufferSnippet});
  all.push_back({Language::java,
                 "public class Main {\n  /* block */\n  public static void main(String[] args) {\n"
                 "    System.out.println(\"hi\\n\" + args.length); // done\n  }\n}\n"});
  all.push_back({Language::javascript,
                 "const re = /a+b/g;\nfunction q(x) { return `t ${x} \\u0041`; }\nexport default q;\n"});
  all.push_back({Language::go,
                 "package main\n\nimport \"fmt\"\n\nfunc main() {\n\tfor i := 0; i < 3; i++ {\n"
                 "\t\tfmt.Println(i, 'x', `raw`)\n\t}\n}\n"});
  all.push_back({Language::python, "\xEF\xBB\xBFx = f'{y!r} \\t'  \\\n  + 1\n"});
  return all;
}

TEST(UAstProperties, LeafSpansCoverSourceAndRoundTrip) {
  for (const auto& s : property_corpus()) {
    const auto unit = make_source_unit("p", s.language, s.code);
    const auto uast = parse_source(unit);
    const auto tokens = leaf_tokens(uast, unit);
    std::uint32_t cursor = 0;
    std::string rebuilt;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto& t = tokens[i];
      EXPECT_EQ(t.index, i);
      ASSERT_LT(t.span.start, t.span.end) << s.code;
      ASSERT_GE(t.span.start, cursor) << s.code;
      const auto gap = s.code.substr(cursor, t.span.start - cursor);
      for (unsigned char c : gap) EXPECT_TRUE(std::isspace(c) || c >= 0x80) << "uncovered byte in: " << s.code;
      EXPECT_EQ(t.text, s.code.substr(t.span.start, t.span.size()));
      rebuilt += gap + t.text;
      cursor = t.span.end;
    }
    rebuilt += s.code.substr(cursor);
    EXPECT_EQ(rebuilt, s.code);
  }
}

TEST(UAstProperties, TreeShapeAndEdgeCount) {
  for (const auto& s : property_corpus()) {
    const auto unit = make_source_unit("p", s.language, s.code);
    const auto uast = parse_source(unit);
    std::size_t roots = 0;
    for (const auto& n : uast.nodes) {
      roots += n.parent == kNoParent;
      for (auto c : n.children) EXPECT_EQ(uast.nodes[c].parent, n.id);
    }
    EXPECT_EQ(roots, 1u);
    for (auto id : uast.leaf_order) EXPECT_TRUE(uast.nodes[id].is_leaf());
    ASSERT_EQ(uast.adjacency_edges.size(), uast.leaf_count() - 1);
    for (std::size_t i = 0; i + 1 < uast.leaf_count(); ++i)
      EXPECT_EQ(uast.adjacency_edges[i], std::make_pair(uast.leaf_order[i], uast.leaf_order[i + 1]));
    if (uast.leaf_count() >= 2)
      EXPECT_EQ(uast.undirected_edges().size(), (uast.nodes.size() - 1) + (uast.leaf_count() - 1));

    // Connectivity by union-find over both edge kinds.
    std::vector<std::size_t> parent(uast.nodes.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& [a, b] : uast.undirected_edges()) parent[find(a)] = find(b);
    std::set<std::size_t> components;
    for (std::size_t i = 0; i < parent.size(); ++i) components.insert(find(i));
    EXPECT_EQ(components.size(), 1u);
  }
}

TEST(UAstProperties, Deterministic) {
  for (const auto& s : property_corpus()) {
    const auto unit = make_source_unit("p", s.language, s.code);
    EXPECT_EQ(parse_source(unit), parse_source(unit));
  }
}

TEST(GrammarVersions, AllPinned) {
  const auto& v = grammar_versions();
  for (const char* k : {"tree-sitter", "tree-sitter-go", "tree-sitter-java", "tree-sitter-javascript", "tree-sitter-python"}) {
    ASSERT_TRUE(v.contains(k)) << k;
    EXPECT_FALSE(v.at(k).empty());
  }
}

}  // namespace
}  // namespace catprobe
