#include <random>

#include <gtest/gtest.h>

#include "vulaste/error.hpp"
#include "vulaste/syntax.hpp"

using namespace vulaste;
using namespace vulaste::syntax;

namespace {

const ParserRegistry& registry() {
  static const ParserRegistry r = ParserRegistry::builtin();
  return r;
}

std::vector<std::string> names(const std::vector<FunctionSlice>& slices) {
  std::vector<std::string> out;
  for (const FunctionSlice& s : slices) out.push_back(s.name);
  return out;
}

std::vector<FunctionSlice> functions(std::string_view src, std::string_view lang) {
  return extract_functions(parse(registry(), src, lang), src, registry().function_kinds(lang));
}

size_t count_kind(const SyntaxTree& t, std::string_view kind) {
  size_t n = 0;
  for (const Node& node : t.nodes()) n += node.kind == kind;
  return n;
}

}  // namespace

TEST(Syntax, EmptySourceIsALoneRoot) {
  const SyntaxTree t = parse(registry(), "", "c");
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.root_node().kind, kinds::kTranslationUnit);
  EXPECT_TRUE(t.root_node().span.empty());
}

TEST(Syntax, MinimalFunctionTree) {
  const std::string src = "int f(){return 0;}";
  const SyntaxTree t = parse(registry(), src, "c");
  const SyntaxTree want = SyntaxTree::from_sexpr(
      "(translation_unit [0, 18]\n"
      "  (function_definition [0, 18]\n"
      "    (primitive_type [0, 3])\n"
      "    name: (identifier [4, 5])\n"
      "    parameters: (parameter_list [5, 7])\n"
      "    body: (compound_statement [7, 18]\n"
      "      (return_statement [8, 17]\n"
      "        (number_literal [15, 16])))))\n");
  EXPECT_EQ(t, want);
  EXPECT_EQ(count_kind(t, kinds::kFunctionDefinition), 1u);
}

TEST(Syntax, UnbalancedBraceYieldsErrorNode) {
  const SyntaxTree t = parse(registry(), "int f() { if (x) {", "c");
  EXPECT_GE(count_kind(t, kinds::kError), 1u);
}

TEST(Syntax, UnsupportedLanguageThrows) {
  try {
    parse(registry(), "def f(): pass", "python");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnsupportedLanguage);
  }
}

TEST(Syntax, SexprRoundTrip) {
  const SyntaxTree t = parse(registry(), "int g(int a) { while (a--) { h(a, \"s\"); } }", "c");
  EXPECT_EQ(SyntaxTree::from_sexpr(t.to_sexpr()), t);
}

TEST(Syntax, NoFunctions) {
  EXPECT_TRUE(functions("int x = 3;", "c").empty());
}

TEST(Syntax, TwoTopLevelFunctionsInOrder) {
  const std::string src = "int a() { return 1; }\nint b(int x) { return x; }\n";
  const auto slices = functions(src, "c");
  EXPECT_EQ(names(slices), (std::vector<std::string>{"a", "b"}));
  for (const FunctionSlice& s : slices) EXPECT_EQ(s.source, src.substr(s.span.begin, s.span.size()));
}

TEST(Syntax, NestedFunctionsEmittedIndependently) {
  const std::string src = "int outer() { int inner() { return 1; } return inner(); }";
  const auto slices = functions(src, "c");
  ASSERT_EQ(names(slices), (std::vector<std::string>{"outer", "inner"}));
  EXPECT_TRUE(slices[0].span.begin <= slices[1].span.begin && slices[1].span.end <= slices[0].span.end);
}

TEST(Syntax, JavaMethodsIncludingLocalAndAnonymousClasses) {
  const std::string src =
      "class A {\n"
      "  void f() { class B { void g() { h(); } } }\n"
      "  void k() { Runnable r = new Runnable() { public void run() { go(); } }; }\n"
      "}\n";
  EXPECT_EQ(names(functions(src, "java")), (std::vector<std::string>{"f", "g", "k", "run"}));
}

TEST(Syntax, GoAndCppFunctions) {
  EXPECT_EQ(names(functions("func add(a int, b int) int {\n  return a + b\n}\n", "go")),
            std::vector<std::string>{"add"});
  EXPECT_EQ(names(functions("struct S { int m() const { return 1; } };\nint S2::n(int x) { return x; }\n",
                            "cpp")),
            (std::vector<std::string>{"m", "n"}));
}

TEST(Syntax, PathThroughIfBlock) {
  const std::string src = "int f(int a){ if (a) { x; } }";
  const size_t at = src.find('x');
  const AstPath path = path_for_offset(parse(registry(), src, "c"), at);
  const std::vector<std::string> want{"translation_unit", "function_definition",
                                      "compound_statement", "if_statement",
                                      "compound_statement", "expression_statement",
                                      "identifier"};
  EXPECT_EQ(path.kinds, want);
}

TEST(Syntax, WhitespaceMapsToEnclosingNode) {
  const std::string src = "int f(int a){ if (a) { x; } }";
  const AstPath path = path_for_offset(parse(registry(), src, "c"), src.find('x') - 1);
  EXPECT_EQ(path.kinds.back(), "compound_statement");
  EXPECT_EQ(path.depth(), 5u);
}

TEST(Syntax, OffsetOutsideRootThrows) {
  const std::string src = "int f(){}";
  try {
    path_for_offset(parse(registry(), src, "c"), src.size());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfRange);
  }
}

TEST(Syntax, PathsFollowParentChildEdges) {
  const std::string src =
      "static int copy(char *d, const char *s, int n) {\n"
      "  for (int i = 0; i < n; i++) { d[i] = s[i] ? s[i] : 0; }\n"
      "  switch (n) { case 1: return -1; default: break; }\n"
      "  return n * sizeof(int);\n}\n";
  const SyntaxTree t = parse(registry(), src, "c");
  for (size_t off = 0; off < src.size(); ++off) {
    const auto chain = t.chain_for_offset(off);
    ASSERT_EQ(chain.front(), t.root());
    for (size_t i = 1; i < chain.size(); ++i) EXPECT_EQ(t.node(chain[i]).parent, chain[i - 1]);
  }
}

TEST(Syntax, TreeConstructionChecksInvariants) {
  std::vector<Node> nodes(2);
  nodes[0] = {"translation_unit", "", {0, 4}, {1}, kNoParent};
  nodes[1] = {"identifier", "", {2, 9}, {}, 0};  // escapes the parent span
  EXPECT_THROW(SyntaxTree(nodes, 0), Error);
}

TEST(Syntax, ParsingIsDeterministicAndTotalOnNoise) {
  std::mt19937_64 rng(2);
  const std::string alphabet = "{}()[];,=+-*/<>!&|?: \nabcx01\"'";
  for (int i = 0; i < 200; ++i) {
    std::string src;
    for (size_t n = rng() % 120; n > 0; --n) src.push_back(alphabet[rng() % alphabet.size()]);
    for (const char* lang : {"c", "java", "go"}) {
      const SyntaxTree a = parse(registry(), src, lang);
      EXPECT_EQ(a, parse(registry(), src, lang));
      EXPECT_EQ(a.root_node().span, (ByteRange{0, src.size()}));
      for (const FunctionSlice& s : functions(src, lang)) {
        EXPECT_EQ(s.source, src.substr(s.span.begin, s.span.size()));
      }
    }
  }
}

TEST(Syntax, DeepNestingDoesNotOverflow) {
  const std::string src = "int f() { x = " + std::string(5000, '(') + "1" + std::string(5000, ')') + "; }";
  const SyntaxTree t = parse(registry(), src, "c");
  EXPECT_GE(count_kind(t, kinds::kError), 1u);
}
