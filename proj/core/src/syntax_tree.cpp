#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "vulaste/error.hpp"
#include "vulaste/syntax.hpp"

namespace vulaste::syntax {

const std::vector<std::string_view>& kinds::all() {
  static const std::vector<std::string_view> kAll = {
      kTranslationUnit,      kFunctionDefinition,     kParameterList,
      kCompoundStatement,    kTypeDeclaration,        kDeclarationList,
      kDeclaration,          kInitDeclarator,         kInitializerList,
      kAccessSpecifier,      kIfStatement,            kElseClause,
      kWhileStatement,       kDoStatement,            kForStatement,
      kSwitchStatement,      kCaseStatement,          kReturnStatement,
      kBreakStatement,       kContinueStatement,      kGotoStatement,
      kLabeledStatement,     kTryStatement,           kCatchClause,
      kFinallyClause,        kThrowStatement,         kExpressionStatement,
      kAssignmentExpression, kConditionalExpression,  kBinaryExpression,
      kUnaryExpression,      kUpdateExpression,       kCastExpression,
      kTypeDescriptor,
      kNewExpression,        kSizeofExpression,       kCallExpression,
      kArgumentList,         kSubscriptExpression,    kFieldExpression,
      kParenthesizedExpression, kCommaExpression,     kIdentifier,
      kPrimitiveType,        kNumberLiteral,          kStringLiteral,
      kCharLiteral,          kError,
  };
  return kAll;
}

SyntaxTree::SyntaxTree(std::vector<Node> nodes, NodeIndex root)
    : nodes_(std::move(nodes)), root_(root) {
  auto bad = [](const std::string& why) {
    fail(ErrorCode::kInvalidInput, "malformed syntax tree: " + why);
  };
  if (root_ >= nodes_.size()) bad("root index out of range");
  if (nodes_[root_].parent != kNoParent) bad("root has a parent");

  std::vector<bool> seen(nodes_.size(), false);
  std::vector<NodeIndex> stack{root_};
  seen[root_] = true;
  size_t reached = 1;
  while (!stack.empty()) {
    const NodeIndex i = stack.back();
    stack.pop_back();
    const Node& n = nodes_[i];
    if (n.span.begin > n.span.end) bad("inverted span");
    size_t prev_end = n.span.begin;
    for (NodeIndex c : n.children) {
      if (c >= nodes_.size()) bad("child index out of range");
      if (seen[c]) bad("node reachable twice");
      const Node& child = nodes_[c];
      if (child.parent != i) bad("parent/child links disagree");
      if (child.span.begin < n.span.begin || child.span.end > n.span.end) {
        bad("child span escapes its parent");
      }
      if (child.span.begin < prev_end) bad("sibling spans overlap");
      prev_end = child.span.end;
      seen[c] = true;
      ++reached;
      stack.push_back(c);
    }
  }
  if (reached != nodes_.size()) bad("unreachable nodes");
}

std::vector<NodeIndex> SyntaxTree::chain_for_offset(size_t offset) const {
  if (!root_node().span.contains(offset)) {
    fail(ErrorCode::kOutOfRange,
         "offset " + std::to_string(offset) + " is outside the parsed span");
  }
  std::vector<NodeIndex> chain{root_};
  for (;;) {
    const Node& n = nodes_[chain.back()];
    // Children are ordered by span; find the last one starting at or before
    // the offset.
    auto it = std::upper_bound(
        n.children.begin(), n.children.end(), offset,
        [this](size_t off, NodeIndex c) { return off < nodes_[c].span.begin; });
    // Zero-width siblings can share a start offset with the containing child.
    bool descended = false;
    while (it != n.children.begin()) {
      --it;
      const ByteRange& s = nodes_[*it].span;
      if (s.contains(offset)) {
        chain.push_back(*it);
        descended = true;
        break;
      }
      if (!s.empty()) break;
    }
    if (!descended) return chain;
  }
}

std::vector<NodeIndex> SyntaxTree::preorder() const {
  std::vector<NodeIndex> out;
  out.reserve(nodes_.size());
  std::vector<NodeIndex> stack{root_};
  while (!stack.empty()) {
    const NodeIndex i = stack.back();
    stack.pop_back();
    out.push_back(i);
    const auto& ch = nodes_[i].children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

bool operator==(const SyntaxTree& a, const SyntaxTree& b) {
  if (a.nodes_.size() != b.nodes_.size()) return false;
  // Structural comparison, independent of node storage order.
  std::vector<std::pair<NodeIndex, NodeIndex>> stack{{a.root_, b.root_}};
  while (!stack.empty()) {
    auto [i, j] = stack.back();
    stack.pop_back();
    const Node& x = a.nodes_[i];
    const Node& y = b.nodes_[j];
    if (x.kind != y.kind || x.field != y.field || x.span != y.span ||
        x.children.size() != y.children.size()) {
      return false;
    }
    for (size_t k = 0; k < x.children.size(); ++k) {
      stack.emplace_back(x.children[k], y.children[k]);
    }
  }
  return true;
}

std::string SyntaxTree::to_sexpr() const {
  std::ostringstream out;
  struct Frame {
    NodeIndex node;
    size_t depth;
    size_t next_child;
  };
  std::vector<Frame> stack{{root_, 0, 0}};
  auto open = [&](NodeIndex i, size_t depth) {
    const Node& n = nodes_[i];
    if (depth > 0) out << '\n' << std::string(depth * 2, ' ');
    if (!n.field.empty()) out << n.field << ": ";
    out << '(' << n.kind << " [" << n.span.begin << ", " << n.span.end << ']';
  };
  open(root_, 0);
  while (!stack.empty()) {
    Frame& f = stack.back();
    const Node& n = nodes_[f.node];
    if (f.next_child < n.children.size()) {
      const NodeIndex c = n.children[f.next_child++];
      const size_t depth = f.depth + 1;
      open(c, depth);
      stack.push_back({c, depth, 0});
    } else {
      out << ')';
      stack.pop_back();
    }
  }
  out << '\n';
  return out.str();
}

namespace {

class SexprReader {
 public:
  explicit SexprReader(std::string_view text) : text_(text) {}

  SyntaxTree read() {
    std::vector<Node> nodes;
    skip_space();
    read_node(nodes, kNoParent, "", 0);
    skip_space();
    if (pos_ != text_.size()) error("trailing input");
    return SyntaxTree(std::move(nodes), 0);
  }

 private:
  [[noreturn]] void error(const std::string& why) const {
    fail(ErrorCode::kParse,
         "s-expression at byte " + std::to_string(pos_) + ": " + why);
  }

  void skip_space() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  void expect(char c) {
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != c) {
      error(std::string("expected '") + c + "'");
    }
    ++pos_;
  }

  std::string_view word() {
    skip_space();
    const size_t begin = pos_;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c)) || c == '(' ||
          c == ')' || c == '[' || c == ']' || c == ',' || c == ':') {
        break;
      }
      ++pos_;
    }
    if (begin == pos_) error("expected a word");
    return text_.substr(begin, pos_ - begin);
  }

  size_t number() {
    std::string_view w = word();
    size_t value = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), value);
    if (ec != std::errc() || ptr != w.data() + w.size()) error("bad offset");
    return value;
  }

  NodeIndex read_node(std::vector<Node>& nodes, NodeIndex parent,
                      std::string field, size_t depth) {
    if (depth > 10000) error("nesting too deep");
    expect('(');
    const auto index = static_cast<NodeIndex>(nodes.size());
    nodes.emplace_back();
    nodes[index].kind = std::string(word());
    nodes[index].field = std::move(field);
    nodes[index].parent = parent;
    expect('[');
    nodes[index].span.begin = number();
    expect(',');
    nodes[index].span.end = number();
    expect(']');
    for (;;) {
      skip_space();
      if (pos_ >= text_.size()) error("unterminated node");
      if (text_[pos_] == ')') {
        ++pos_;
        return index;
      }
      std::string child_field;
      if (text_[pos_] != '(') {
        child_field = std::string(word());
        expect(':');
      }
      const NodeIndex child =
          read_node(nodes, index, std::move(child_field), depth + 1);
      nodes[index].children.push_back(child);
    }
  }

  std::string_view text_;
  size_t pos_ = 0;
};

}  // namespace

SyntaxTree SyntaxTree::from_sexpr(std::string_view text) {
  SexprReader reader(text);
  try {
    return reader.read();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParse) throw;
    fail(ErrorCode::kParse, e.what());
  }
}

AstPath path_for_offset(const SyntaxTree& tree, size_t offset) {
  AstPath path;
  for (NodeIndex i : tree.chain_for_offset(offset)) {
    path.kinds.push_back(tree.node(i).kind);
  }
  return path;
}

std::vector<FunctionSlice> extract_functions(
    const SyntaxTree& tree, std::string_view source,
    const std::set<std::string>& function_kinds) {
  std::vector<FunctionSlice> out;
  for (NodeIndex i : tree.preorder()) {
    const Node& n = tree.node(i);
    if (!function_kinds.contains(n.kind)) continue;
    if (n.span.end > source.size()) {
      fail(ErrorCode::kInvalidInput, "tree does not match the source bytes");
    }
    FunctionSlice slice;
    slice.name = std::string(kAnonymousFunction);
    for (NodeIndex c : n.children) {
      const Node& child = tree.node(c);
      if (child.field == "name") {
        slice.name = std::string(source.substr(child.span.begin, child.span.size()));
        break;
      }
    }
    slice.span = n.span;
    slice.source = std::string(source.substr(n.span.begin, n.span.size()));
    out.push_back(std::move(slice));
  }
  return out;
}

}  // namespace vulaste::syntax
