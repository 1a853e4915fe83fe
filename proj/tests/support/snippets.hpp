#pragma once

#include <string>
#include <vector>

#include "catprobe/source.hpp"

namespace catprobe::testing {

struct Snippet {
  Language language;
  std::string code;
};

// Small, syntactically clean programs with at most 12 leaf tokens each.
inline const std::vector<Snippet>& small_snippets() {
  static const std::vector<Snippet> all{
      {Language::python, "x = 1"},
      {Language::python, "def f():\n    return 1"},
      {Language::python, "print(a, b)"},
      {Language::python, "if a:\n    b()"},
      {Language::python, "for i in xs:\n    y = i"},
      {Language::python, "import os"},
      {Language::python, "a.b.c(d)"},
      {Language::python, "while x < 3:\n    x += 1"},
      {Language::python, "return_value = [1, 2]"},
      {Language::python, "class A:\n    pass"},
      {Language::python, "x = 'hi' # note"},
      {Language::python, "lambda q: q * 2"},
      {Language::python, "try:\n    f()\nexcept E:\n    g"},
      {Language::python, "tmpbuf.append(i)"},
      {Language::java, "public int x;"},
      {Language::java, "class A {}"},
      {Language::java, "int y = 2;"},
      {Language::java, "class A { int f; }"},
      {Language::java, "import java.util.List;"},
      {Language::java, "class B { void m() {} }"},
      {Language::java, "return_t = a + b;"},
      {Language::java, "String s = \"hi\";"},
      {Language::java, "interface I { }"},
      {Language::java, "a.b(c);"},
      {Language::java, "x = y ? 1 : 2;"},
      {Language::java, "enum E { A, B }"},
      {Language::java, "int[] a = {1};"},
      {Language::java, "while (t) { go(); }"},
      {Language::javascript, "let x = 1;"},
      {Language::javascript, "f(a, b);"},
      {Language::javascript, "const g = () => 2;"},
      {Language::javascript, "if (a) b();"},
      {Language::javascript, "var s = 'str';"},
      {Language::javascript, "x.y.z = w;"},
      {Language::javascript, "function h() {}"},
      {Language::javascript, "return_value += 3;"},
      {Language::javascript, "a = [1, 2];"},
      {Language::javascript, "o = { k: v };"},
      {Language::javascript, "throw err;"},
      {Language::javascript, "i++; // bump"},
      {Language::javascript, "new Foo(bar);"},
      {Language::javascript, "for (;;) {}"},
      {Language::go, "package main\n"},
      {Language::go, "package p\nvar x = 1\n"},
      {Language::go, "package p\nimport \"fmt\"\n"},
      {Language::go, "package p\nfunc f() {}\n"},
      {Language::go, "package p\ntype T int\n"},
      {Language::go, "package p\nconst c = 2\n"},
      {Language::go, "package p\nvar a, b int\n"},
      {Language::go, "package p\nfunc g() { h() }\n"},
      {Language::go, "package p\ntype S struct{}\n"},
      {Language::go, "package p\nvar m map[k]v\n"},
      {Language::go, "package p\nvar s []int\n"},
      {Language::go, "package p // c\n"},
      {Language::go, "package p\nfunc r() int { return 1 }\n"},
      {Language::go, "package p\nvar z = y.F\n"},
  };
  return all;
}

// Loop over a list, append to a buffer, hand the buffer back. The "." in
// tmpbuf.append is the only punctuation type that appears once.
inline constexpr const char* kBufferSnippet =
    "def collect(items):\n"
    "    tmpbuf = []\n"
    "    for item in items:\n"
    "        tmpbuf.append(item)\n"
    "    return tmpbuf\n";

}  // namespace catprobe::testing
