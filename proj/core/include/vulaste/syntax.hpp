#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vulaste/tokenizer.hpp"

namespace vulaste::syntax {

using NodeIndex = uint32_t;
inline constexpr NodeIndex kNoParent = UINT32_MAX;

struct Node {
  std::string kind;
  // Role of this node inside its parent ("name", "body", ...), may be empty.
  std::string field;
  ByteRange span;
  std::vector<NodeIndex> children;
  NodeIndex parent = kNoParent;
};

// Unified-format parse tree. Immutable once built; construction validates
// the structural invariants (single root, consistent links, nested and
// ordered spans).
class SyntaxTree {
 public:
  // Throws Error(kInvalidInput) when the invariants do not hold.
  SyntaxTree(std::vector<Node> nodes, NodeIndex root);

  const Node& node(NodeIndex i) const { return nodes_.at(i); }
  const Node& root_node() const { return nodes_[root_]; }
  NodeIndex root() const { return root_; }
  size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  // Node indices along the root-to-leaf chain whose leaf is the deepest node
  // containing `offset`. Throws Error(kOutOfRange) outside the root span.
  std::vector<NodeIndex> chain_for_offset(size_t offset) const;

  // Pre-order node indices.
  std::vector<NodeIndex> preorder() const;

  // One node per line: `(kind [begin, end] field: (child ...))`.
  std::string to_sexpr() const;
  // Throws Error(kParse) on malformed text.
  static SyntaxTree from_sexpr(std::string_view text);

  friend bool operator==(const SyntaxTree& a, const SyntaxTree& b);

 private:
  std::vector<Node> nodes_;
  NodeIndex root_;
};

struct AstPath {
  // Root kind first, leaf kind last.
  std::vector<std::string> kinds;

  size_t depth() const { return kinds.size(); }
  friend bool operator==(const AstPath&, const AstPath&) = default;
};

struct FunctionSlice {
  std::string name;  // kAnonymousFunction when the tree names none
  ByteRange span;
  std::string source;
};

inline constexpr std::string_view kAnonymousFunction = "<anonymous>";

// Node kinds produced by the built-in reference grammar.
namespace kinds {
inline constexpr std::string_view kTranslationUnit = "translation_unit";
inline constexpr std::string_view kFunctionDefinition = "function_definition";
inline constexpr std::string_view kParameterList = "parameter_list";
inline constexpr std::string_view kCompoundStatement = "compound_statement";
inline constexpr std::string_view kTypeDeclaration = "type_declaration";
inline constexpr std::string_view kDeclarationList = "declaration_list";
inline constexpr std::string_view kDeclaration = "declaration";
inline constexpr std::string_view kInitDeclarator = "init_declarator";
inline constexpr std::string_view kInitializerList = "initializer_list";
inline constexpr std::string_view kAccessSpecifier = "access_specifier";
inline constexpr std::string_view kIfStatement = "if_statement";
inline constexpr std::string_view kElseClause = "else_clause";
inline constexpr std::string_view kWhileStatement = "while_statement";
inline constexpr std::string_view kDoStatement = "do_statement";
inline constexpr std::string_view kForStatement = "for_statement";
inline constexpr std::string_view kSwitchStatement = "switch_statement";
inline constexpr std::string_view kCaseStatement = "case_statement";
inline constexpr std::string_view kReturnStatement = "return_statement";
inline constexpr std::string_view kBreakStatement = "break_statement";
inline constexpr std::string_view kContinueStatement = "continue_statement";
inline constexpr std::string_view kGotoStatement = "goto_statement";
inline constexpr std::string_view kLabeledStatement = "labeled_statement";
inline constexpr std::string_view kTryStatement = "try_statement";
inline constexpr std::string_view kCatchClause = "catch_clause";
inline constexpr std::string_view kFinallyClause = "finally_clause";
inline constexpr std::string_view kThrowStatement = "throw_statement";
inline constexpr std::string_view kExpressionStatement = "expression_statement";
inline constexpr std::string_view kAssignmentExpression = "assignment_expression";
inline constexpr std::string_view kConditionalExpression = "conditional_expression";
inline constexpr std::string_view kBinaryExpression = "binary_expression";
inline constexpr std::string_view kUnaryExpression = "unary_expression";
inline constexpr std::string_view kUpdateExpression = "update_expression";
inline constexpr std::string_view kCastExpression = "cast_expression";
inline constexpr std::string_view kTypeDescriptor = "type_descriptor";
inline constexpr std::string_view kNewExpression = "new_expression";
inline constexpr std::string_view kSizeofExpression = "sizeof_expression";
inline constexpr std::string_view kCallExpression = "call_expression";
inline constexpr std::string_view kArgumentList = "argument_list";
inline constexpr std::string_view kSubscriptExpression = "subscript_expression";
inline constexpr std::string_view kFieldExpression = "field_expression";
inline constexpr std::string_view kParenthesizedExpression = "parenthesized_expression";
inline constexpr std::string_view kCommaExpression = "comma_expression";
inline constexpr std::string_view kIdentifier = "identifier";
inline constexpr std::string_view kPrimitiveType = "primitive_type";
inline constexpr std::string_view kNumberLiteral = "number_literal";
inline constexpr std::string_view kStringLiteral = "string_literal";
inline constexpr std::string_view kCharLiteral = "char_literal";
inline constexpr std::string_view kError = "ERROR";

// Every kind above, in a fixed order.
const std::vector<std::string_view>& all();
}  // namespace kinds

class ParserProvider {
 public:
  virtual ~ParserProvider() = default;
  // Lenient: syntax errors become ERROR nodes, never exceptions. The root
  // span is [0, source.size()).
  virtual SyntaxTree parse(std::string_view source) const = 0;
  virtual std::string name() const = 0;
};

struct ReferenceParserOptions {
  // Go-style automatic statement termination at line ends.
  bool newline_terminates = false;
  // Nesting deeper than this is wrapped in ERROR nodes.
  size_t max_depth = 256;
};

// Recursive-descent parser for a small C-like language: functions, blocks,
// declarations, if/while/for/do/switch/return/try, and C expressions.
class ReferenceParser final : public ParserProvider {
 public:
  explicit ReferenceParser(ReferenceParserOptions options = {})
      : options_(options) {}
  SyntaxTree parse(std::string_view source) const override;
  std::string name() const override { return "reference"; }

 private:
  ReferenceParserOptions options_;
};

// Adapter for an external grammar-based parser. Runs `command <file>` and
// reads the tree from its stdout in the s-expression debug format.
class CommandParser final : public ParserProvider {
 public:
  explicit CommandParser(std::string command) : command_(std::move(command)) {}
  SyntaxTree parse(std::string_view source) const override;
  std::string name() const override { return "command:" + command_; }

 private:
  std::string command_;
};

// Language tag -> provider and the node kinds that count as functions.
class ParserRegistry {
 public:
  void add(std::string language, std::shared_ptr<const ParserProvider> provider,
           std::set<std::string> function_kinds);

  bool supports(std::string_view language) const;
  // Throws Error(kUnsupportedLanguage).
  const ParserProvider& provider(std::string_view language) const;
  const std::set<std::string>& function_kinds(std::string_view language) const;
  std::vector<std::string> languages() const;

  // c, cpp, java and go via the reference parser (go with newline
  // termination). Python needs an external provider.
  static ParserRegistry builtin();

 private:
  struct Entry {
    std::shared_ptr<const ParserProvider> provider;
    std::set<std::string> function_kinds;
  };
  std::map<std::string, Entry, std::less<>> entries_;
};

// Throws Error(kUnsupportedLanguage) for unregistered tags.
SyntaxTree parse(const ParserRegistry& registry, std::string_view source,
                 std::string_view language);

// One slice per node whose kind is in `function_kinds`, in pre-order.
std::vector<FunctionSlice> extract_functions(
    const SyntaxTree& tree, std::string_view source,
    const std::set<std::string>& function_kinds);

// Throws Error(kOutOfRange) when `offset` is outside the root span.
AstPath path_for_offset(const SyntaxTree& tree, size_t offset);

}  // namespace vulaste::syntax
