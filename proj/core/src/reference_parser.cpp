#include <algorithm>
#include <array>
#include <cctype>
#include <optional>

#include "vulaste/syntax.hpp"

namespace vulaste::syntax {
namespace {

enum class TokKind { kWord, kNumber, kString, kChar, kPunct, kEnd };

struct Tok {
  TokKind kind;
  ByteRange span;
  std::string_view text;
};

constexpr std::array<std::string_view, 25> kMultiCharPunct = {
    ">>=", "<<=", "...", "->", "++", "--", "<<", ">>", "<=",
    ">=",  "==",  "!=",  "&&", "||", "+=", "-=", "*=", "/=",
    "%=",  "&=",  "|=",  "^=", "::", ":=", "=>",
};

bool one_of(std::string_view text, std::initializer_list<std::string_view> set) {
  return std::find(set.begin(), set.end(), text) != set.end();
}

bool is_control_keyword(std::string_view w) {
  return one_of(w, {"if", "else", "while", "for", "do", "switch", "case",
                    "default", "return", "break", "continue", "goto", "try",
                    "catch", "finally", "throw"});
}

bool is_primitive_type(std::string_view w) {
  return one_of(w, {"void", "char", "short", "int", "long", "float", "double",
                    "signed", "unsigned", "bool", "_Bool", "boolean", "byte",
                    "size_t", "ssize_t", "wchar_t", "char16_t", "char32_t",
                    "int8", "int16", "int32", "int64", "uint", "uint8",
                    "uint16", "uint32", "uint64", "float32", "float64",
                    "string", "rune", "auto"});
}

bool is_declaration_start(std::string_view w) {
  return is_primitive_type(w) ||
         one_of(w, {"static", "const", "extern", "register", "volatile",
                    "struct", "union", "enum", "typedef", "inline", "var",
                    "final", "let", "constexpr", "mutable", "thread_local"});
}

// Words that never name a function even when followed by '('.
bool is_reserved_name(std::string_view w) {
  return is_control_keyword(w) || is_primitive_type(w) ||
         one_of(w, {"sizeof", "new", "delete", "func", "typeof", "alignof",
                    "decltype", "synchronized", "operator", "return"});
}

bool is_assignment_op(std::string_view p) {
  return one_of(p, {"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
                    "<<=", ">>=", ":="});
}

int binary_precedence(std::string_view p) {
  if (p == "||") return 1;
  if (p == "&&") return 2;
  if (p == "|") return 3;
  if (p == "^") return 4;
  if (p == "&") return 5;
  if (p == "==" || p == "!=") return 6;
  if (p == "<" || p == ">" || p == "<=" || p == ">=") return 7;
  if (p == "<<" || p == ">>") return 8;
  if (p == "+" || p == "-") return 9;
  if (p == "*" || p == "/" || p == "%") return 10;
  return 0;
}

bool is_word_byte(unsigned char c, bool first) {
  if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
      c == '$' || c >= 0x80) {
    return true;
  }
  return !first && c >= '0' && c <= '9';
}

class Lexer {
 public:
  Lexer(std::string_view src, bool newline_terminates)
      : src_(src), newline_terminates_(newline_terminates) {}

  std::vector<Tok> run() {
    bool line_start = true;
    while (pos_ < src_.size()) {
      const unsigned char c = static_cast<unsigned char>(src_[pos_]);
      if (c == '\n') {
        maybe_terminate(pos_);
        ++pos_;
        line_start = true;
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f') {
        ++pos_;
        continue;
      }
      if (c == '/' && peek(1) == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
        continue;
      }
      if (c == '/' && peek(1) == '*') {
        const size_t close = src_.find("*/", pos_ + 2);
        const size_t end = close == std::string_view::npos ? src_.size() : close + 2;
        const size_t nl = src_.find('\n', pos_);
        if (nl != std::string_view::npos && nl < end) maybe_terminate(nl);
        pos_ = end;
        continue;
      }
      if (c == '#' && line_start) {
        skip_directive();
        continue;
      }
      line_start = false;
      const size_t begin = pos_;
      if (is_word_byte(c, true)) {
        while (pos_ < src_.size() &&
               is_word_byte(static_cast<unsigned char>(src_[pos_]), false)) {
          ++pos_;
        }
        push(TokKind::kWord, begin);
      } else if ((c >= '0' && c <= '9') ||
                 (c == '.' && peek(1) >= '0' && peek(1) <= '9')) {
        lex_number();
        push(TokKind::kNumber, begin);
      } else if (c == '"' || c == '\'') {
        lex_quoted(static_cast<char>(c));
        push(c == '"' ? TokKind::kString : TokKind::kChar, begin);
      } else if (c == '`') {
        const size_t close = src_.find('`', pos_ + 1);
        pos_ = close == std::string_view::npos ? src_.size() : close + 1;
        push(TokKind::kString, begin);
      } else {
        size_t len = 1;
        for (std::string_view p : kMultiCharPunct) {
          if (src_.substr(pos_, p.size()) == p) {
            len = p.size();
            break;
          }
        }
        pos_ += len;
        push(TokKind::kPunct, begin);
      }
    }
    maybe_terminate(src_.size());
    toks_.push_back({TokKind::kEnd, {src_.size(), src_.size()}, {}});
    return std::move(toks_);
  }

 private:
  char peek(size_t k) const {
    return pos_ + k < src_.size() ? src_[pos_ + k] : '\0';
  }

  void push(TokKind kind, size_t begin) {
    toks_.push_back({kind, {begin, pos_}, src_.substr(begin, pos_ - begin)});
  }

  // Go's rule: a line ending in an operand, ')', ']', '}', '++' or '--' ends
  // the statement.
  void maybe_terminate(size_t at) {
    if (!newline_terminates_ || toks_.empty()) return;
    const Tok& last = toks_.back();
    const bool operand = last.kind == TokKind::kWord ||
                         last.kind == TokKind::kNumber ||
                         last.kind == TokKind::kString ||
                         last.kind == TokKind::kChar;
    const bool closer =
        last.kind == TokKind::kPunct &&
        one_of(last.text, {")", "]", "}", "++", "--"});
    if (!(operand || closer)) return;
    if (last.kind == TokKind::kPunct && last.text == ";") return;
    toks_.push_back({TokKind::kPunct, {at, at}, ";"});
  }

  void skip_directive() {
    while (pos_ < src_.size() && src_[pos_] != '\n') {
      if (src_[pos_] == '\\' && peek(1) == '\n') {
        pos_ += 2;
      } else if (src_[pos_] == '\\' && peek(1) == '\r' && peek(2) == '\n') {
        pos_ += 3;
      } else {
        ++pos_;
      }
    }
  }

  void lex_number() {
    while (pos_ < src_.size()) {
      const unsigned char c = static_cast<unsigned char>(src_[pos_]);
      if (std::isalnum(c) || c == '_' || c == '.') {
        ++pos_;
      } else if ((c == '+' || c == '-') && pos_ > 0 &&
                 one_of(src_.substr(pos_ - 1, 1), {"e", "E", "p", "P"})) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  void lex_quoted(char quote) {
    ++pos_;
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '\\') {
        pos_ += 2;
        continue;
      }
      if (c == '\n') return;  // unterminated: stop before the newline
      ++pos_;
      if (c == quote) return;
    }
    pos_ = std::min(pos_, src_.size());
  }

  std::string_view src_;
  bool newline_terminates_;
  size_t pos_ = 0;
  std::vector<Tok> toks_;
};

struct HeadScan {
  size_t stop = 0;            // index of the ';', '{', '}' or end token
  std::string_view stop_text;  // empty for end of input
  bool has_assign = false;
  std::optional<size_t> name;  // identifier naming a function
};

class Parser {
 public:
  Parser(std::string_view src, std::vector<Tok> toks,
         const ReferenceParserOptions& options)
      : src_(src), toks_(std::move(toks)), options_(options) {}

  SyntaxTree run() {
    begin(kinds::kTranslationUnit);
    while (!at_end()) {
      const size_t before = pos_;
      parse_item(/*top_level=*/true);
      ensure_progress(before);
    }
    // Trailing synthetic terminators still belong to the root.
    close_root();
    return SyntaxTree(std::move(nodes_), 0);
  }

 private:
  struct Aux {
    bool has_own = false;
    size_t own_begin = 0;
    size_t own_end = 0;
  };

  // ---- tree building -----------------------------------------------------

  NodeIndex begin(std::string_view kind, std::string_view field = {}) {
    const auto index = static_cast<NodeIndex>(nodes_.size());
    Node n;
    n.kind = std::string(kind);
    n.field = std::string(field);
    if (!stack_.empty()) {
      n.parent = stack_.back();
      nodes_[stack_.back()].children.push_back(index);
    }
    nodes_.push_back(std::move(n));
    aux_.emplace_back();
    stack_.push_back(index);
    return index;
  }

  // Opens `kind` in place of the current node's last child and adopts it.
  void begin_wrapping(std::string_view kind) {
    const NodeIndex parent = stack_.back();
    const NodeIndex child = nodes_[parent].children.back();
    nodes_[parent].children.pop_back();
    const NodeIndex wrapper = begin(kind);
    nodes_[wrapper].children.push_back(child);
    nodes_[child].parent = wrapper;
    // A wrapped operand keeps its field; the wrapper takes over the role.
    nodes_[wrapper].field = std::move(nodes_[child].field);
    nodes_[child].field.clear();
  }

  void end() {
    const NodeIndex i = stack_.back();
    stack_.pop_back();
    Node& n = nodes_[i];
    const Aux& a = aux_[i];
    size_t b = SIZE_MAX;
    size_t e = 0;
    if (a.has_own) {
      b = a.own_begin;
      e = a.own_end;
    }
    if (!n.children.empty()) {
      b = std::min(b, nodes_[n.children.front()].span.begin);
      e = std::max(e, nodes_[n.children.back()].span.end);
    }
    if (b == SIZE_MAX) {
      b = e = last_end_;
    }
    n.span = {b, e};
  }

  void close_root() {
    while (stack_.size() > 1) end();
    nodes_[0].span = {0, src_.size()};
    stack_.clear();
  }

  void advance() {
    const Tok& t = toks_[pos_];
    if (t.kind == TokKind::kEnd) return;
    Aux& a = aux_[stack_.back()];
    if (!a.has_own) {
      a.has_own = true;
      a.own_begin = t.span.begin;
    }
    a.own_end = t.span.end;
    last_end_ = t.span.end;
    ++pos_;
  }

  void leaf(std::string_view kind, std::string_view field = {}) {
    begin(kind, field);
    advance();
    end();
  }

  void missing() {
    begin(kinds::kError);
    end();
  }

  void ensure_progress(size_t before) {
    if (pos_ == before && !at_end()) {
      begin(kinds::kError);
      advance();
      end();
    }
  }

  // ---- token helpers -----------------------------------------------------

  const Tok& peek(size_t k = 0) const {
    return toks_[std::min(pos_ + k, toks_.size() - 1)];
  }
  bool at_end() const { return peek().kind == TokKind::kEnd; }
  bool punct(std::string_view p, size_t k = 0) const {
    return peek(k).kind == TokKind::kPunct && peek(k).text == p;
  }
  bool word(std::string_view w, size_t k = 0) const {
    return peek(k).kind == TokKind::kWord && peek(k).text == w;
  }
  bool is_name(size_t k = 0) const {
    return peek(k).kind == TokKind::kWord && !is_control_keyword(peek(k).text);
  }

  std::string_view word_kind(std::string_view text) const {
    return is_primitive_type(text) ? kinds::kPrimitiveType : kinds::kIdentifier;
  }

  // Emits a leaf for operand-like tokens; other tokens are absorbed by the
  // enclosing node.
  void token_leaf() {
    const Tok& t = peek();
    switch (t.kind) {
      case TokKind::kWord:
        if (is_control_keyword(t.text)) {
          advance();
        } else {
          leaf(word_kind(t.text));
        }
        return;
      case TokKind::kNumber:
        leaf(kinds::kNumberLiteral);
        return;
      case TokKind::kString:
        leaf(kinds::kStringLiteral);
        return;
      case TokKind::kChar:
        leaf(kinds::kCharLiteral);
        return;
      default:
        advance();
    }
  }

  struct DepthGuard {
    explicit DepthGuard(size_t& d) : depth(d) { ++depth; }
    ~DepthGuard() { --depth; }
    size_t& depth;
  };
  bool too_deep() const { return depth_ > options_.max_depth; }

  // Wraps one balanced group (or a single token) in an ERROR node.
  void error_group() {
    begin(kinds::kError);
    size_t nesting = 0;
    do {
      if (at_end()) break;
      if (punct("(") || punct("[") || punct("{")) ++nesting;
      if ((punct(")") || punct("]") || punct("}")) && nesting > 0) --nesting;
      advance();
    } while (nesting > 0);
    end();
  }

  HeadScan scan_head() const {
    HeadScan scan;
    size_t nesting = 0;
    for (size_t j = pos_;; ++j) {
      const Tok& t = toks_[std::min(j, toks_.size() - 1)];
      if (t.kind == TokKind::kEnd) {
        scan.stop = j;
        return scan;
      }
      if (t.kind != TokKind::kPunct) continue;
      if (t.text == "(" || t.text == "[") {
        if (nesting == 0 && t.text == "(" && !scan.name && j > pos_) {
          const Tok& prev = toks_[j - 1];
          if (prev.kind == TokKind::kWord && !is_reserved_name(prev.text)) {
            scan.name = j - 1;
          }
        }
        ++nesting;
      } else if (t.text == ")" || t.text == "]") {
        if (nesting > 0) --nesting;
      } else if (nesting == 0) {
        if (t.text == ";" || t.text == "{" || t.text == "}") {
          scan.stop = j;
          scan.stop_text = t.text;
          return scan;
        }
        if (t.text == "=" || t.text == ":=") scan.has_assign = true;
      }
    }
  }

  bool looks_like_function(const HeadScan& scan, bool top_level) const {
    if (scan.stop_text != "{" || scan.has_assign || !scan.name) return false;
    if (peek().kind != TokKind::kWord || is_control_keyword(peek().text)) {
      return false;
    }
    return top_level || *scan.name > pos_;
  }

  // ---- items -------------------------------------------------------------

  void parse_item(bool top_level) {
    DepthGuard guard(depth_);
    if (too_deep()) {
      error_group();
      return;
    }
    if (punct("}")) {
      error_group();
      return;
    }
    if (punct(";")) {
      advance();
      return;
    }
    if (is_name() && punct(":", 1)) {
      begin(kinds::kAccessSpecifier);
      advance();
      advance();
      end();
      return;
    }
    if (peek().kind == TokKind::kWord && is_control_keyword(peek().text)) {
      parse_statement();
      return;
    }
    const HeadScan scan = scan_head();
    if (looks_like_function(scan, top_level)) {
      parse_function_definition(scan);
    } else if (scan.stop_text == "{" && !scan.has_assign) {
      parse_type_declaration(scan);
    } else {
      parse_declaration();
    }
  }

  void head_token() {
    if (punct("(")) {
      paren_group(kinds::kParameterList);
    } else if (punct("[")) {
      advance();
      size_t nesting = 1;
      while (!at_end() && nesting > 0) {
        if (punct("[")) ++nesting;
        if (punct("]")) --nesting;
        token_leaf();
      }
    } else {
      token_leaf();
    }
  }

  void paren_group(std::string_view kind, std::string_view field = {}) {
    begin(kind, field);
    advance();  // '('
    size_t nesting = 1;
    while (!at_end()) {
      if (punct("(")) ++nesting;
      if (punct(")") && --nesting == 0) break;
      if (punct("{") || punct("}") || punct(";")) break;
      token_leaf();
    }
    if (punct(")")) {
      advance();
    } else {
      missing();
    }
    end();
  }

  void parse_function_definition(const HeadScan& scan) {
    begin(kinds::kFunctionDefinition);
    while (pos_ < *scan.name) head_token();
    leaf(kinds::kIdentifier, "name");
    if (punct("(")) paren_group(kinds::kParameterList, "parameters");
    while (pos_ < scan.stop && !at_end()) head_token();
    parse_compound("body");
    end();
  }

  void parse_member_list() {
    begin(kinds::kDeclarationList, "body");
    advance();  // '{'
    while (!at_end() && !punct("}")) {
      const size_t before = pos_;
      parse_item(/*top_level=*/false);
      ensure_progress(before);
    }
    if (punct("}")) {
      advance();
    } else {
      missing();
    }
    end();
  }

  bool head_names_type(const HeadScan& scan) const {
    for (size_t j = pos_; j < scan.stop; ++j) {
      if (toks_[j].kind == TokKind::kWord &&
          one_of(toks_[j].text, {"class", "struct", "union", "enum", "interface"})) {
        return true;
      }
    }
    return false;
  }

  void parse_type_declaration(const HeadScan& scan) {
    begin(kinds::kTypeDeclaration);
    while (pos_ < scan.stop && !at_end()) head_token();
    parse_member_list();
    // `} name;` belongs to this declaration; `} class B {` does not.
    const HeadScan tail = scan_head();
    if (tail.stop_text == ";") {
      while (pos_ < tail.stop) head_token();
      advance();
    }
    end();
  }

  bool declarator_follows(size_t k) const {
    const Tok& t = peek(k);
    if (t.kind == TokKind::kEnd) return true;
    if (t.kind != TokKind::kPunct) return false;
    return one_of(t.text, {"=", ",", ";", "[", "(", ")", ":", "}"});
  }

  void parse_declaration() {
    begin(kinds::kDeclaration);
    while (!at_end()) {
      if (punct(";")) {
        advance();
        break;
      }
      if (punct("}") || punct(")")) break;
      if (is_name() && declarator_follows(1)) {
        if (punct("=", 1)) {
          begin(kinds::kInitDeclarator);
          leaf(word_kind(peek().text), "declarator");
          advance();  // '='
          if (punct("{")) {
            parse_initializer_list();
          } else {
            parse_assignment();
          }
          end();
        } else if (punct("(", 1)) {
          leaf(word_kind(peek().text), "declarator");
          paren_group(kinds::kParameterList, "parameters");
        } else {
          leaf(word_kind(peek().text), "declarator");
        }
        continue;
      }
      if (punct("[")) {
        advance();
        if (!punct("]")) parse_expression();
        if (punct("]")) advance();
        continue;
      }
      if (punct("=")) {
        advance();
        parse_assignment();
        continue;
      }
      if (punct("{")) {
        parse_initializer_list();
        continue;
      }
      const size_t before = pos_;
      token_leaf();
      ensure_progress(before);
    }
    end();
  }

  bool looks_like_declaration() const {
    const Tok& t = peek();
    if (t.kind != TokKind::kWord || is_control_keyword(t.text)) return false;
    if (is_declaration_start(t.text)) return true;
    if (peek(1).kind == TokKind::kWord &&
        !is_control_keyword(peek(1).text)) {
      return true;
    }
    return punct("*", 1) && peek(2).kind == TokKind::kWord &&
           (punct("=", 3) || punct(";", 3) || punct(",", 3) || punct("[", 3));
  }

  // ---- statements --------------------------------------------------------

  void parse_statement(std::string_view field = {}) {
    DepthGuard guard(depth_);
    if (too_deep()) {
      error_group();
      return;
    }
    if (punct("{")) {
      parse_compound(field);
      return;
    }
    if (punct(";")) {
      advance();
      return;
    }
    const Tok& t = peek();
    if (t.kind == TokKind::kWord && is_control_keyword(t.text)) {
      const std::string_view w = t.text;
      if (w == "if") return parse_if();
      if (w == "while") return parse_while();
      if (w == "for") return parse_for();
      if (w == "do") return parse_do();
      if (w == "switch") return parse_switch();
      if (w == "case" || w == "default") return parse_case();
      if (w == "return") return parse_keyword_statement(kinds::kReturnStatement, true);
      if (w == "throw") return parse_keyword_statement(kinds::kThrowStatement, true);
      if (w == "break") return parse_keyword_statement(kinds::kBreakStatement, false);
      if (w == "continue") return parse_keyword_statement(kinds::kContinueStatement, false);
      if (w == "goto") return parse_goto();
      if (w == "try") return parse_try();
      error_group();  // stray else/catch/finally
      return;
    }
    if (is_name() && punct(":", 1)) {
      begin(kinds::kLabeledStatement);
      leaf(kinds::kIdentifier, "label");
      advance();
      if (!punct("}") && !at_end()) parse_statement();
      end();
      return;
    }
    if (peek().kind == TokKind::kWord) {
      const HeadScan scan = scan_head();
      if (looks_like_function(scan, /*top_level=*/false)) {
        parse_function_definition(scan);
        return;
      }
      if (scan.stop_text == "{" && !scan.has_assign && head_names_type(scan)) {
        parse_type_declaration(scan);
        return;
      }
    }
    if (looks_like_declaration()) {
      parse_declaration();
      return;
    }
    begin(kinds::kExpressionStatement, field);
    parse_expression();
    expect_semicolon();
    end();
  }

  void expect_semicolon() {
    if (punct(";")) {
      advance();
      return;
    }
    if (punct("}") || at_end()) {
      missing();
      return;
    }
    begin(kinds::kError);
    while (!at_end() && !punct(";") && !punct("}")) {
      if (punct("(") || punct("[") || punct("{")) {
        error_group_inline();
      } else {
        advance();
      }
    }
    end();
    if (punct(";")) advance();
  }

  // Consumes a balanced group into the current node.
  void error_group_inline() {
    size_t nesting = 0;
    do {
      if (at_end()) break;
      if (punct("(") || punct("[") || punct("{")) ++nesting;
      if ((punct(")") || punct("]") || punct("}")) && nesting > 0) --nesting;
      advance();
    } while (nesting > 0);
  }

  void parse_compound(std::string_view field = {}) {
    begin(kinds::kCompoundStatement, field);
    if (!punct("{")) {
      missing();
      end();
      return;
    }
    advance();
    while (!at_end() && !punct("}")) {
      const size_t before = pos_;
      parse_statement();
      ensure_progress(before);
    }
    if (punct("}")) {
      advance();
    } else {
      missing();
    }
    end();
  }

  void parse_condition() {
    if (punct("(")) {
      parse_parenthesized("condition");
      return;
    }
    // Brace languages without parenthesized conditions (Go).
    if (!punct("{")) parse_expression();
    if (punct(";")) {
      advance();
      if (!punct("{")) parse_expression();
    }
  }

  void parse_body() {
    if (at_end()) {
      missing();
    } else {
      parse_statement();
    }
  }

  void parse_if() {
    begin(kinds::kIfStatement);
    advance();
    parse_condition();
    parse_body();
    if (word("else")) {
      begin(kinds::kElseClause);
      advance();
      parse_body();
      end();
    }
    end();
  }

  void parse_while() {
    begin(kinds::kWhileStatement);
    advance();
    parse_condition();
    parse_body();
    end();
  }

  void parse_do() {
    begin(kinds::kDoStatement);
    advance();
    parse_body();
    if (word("while")) {
      advance();
      parse_condition();
    }
    expect_semicolon();
    end();
  }

  void parse_switch() {
    begin(kinds::kSwitchStatement);
    advance();
    parse_condition();
    parse_body();
    end();
  }

  void parse_case() {
    begin(kinds::kCaseStatement);
    const bool is_default = word("default");
    advance();
    if (!is_default) parse_conditional();
    if (punct(":")) {
      advance();
    } else {
      missing();
    }
    end();
  }

  void parse_for() {
    begin(kinds::kForStatement);
    advance();
    const bool parenthesized = punct("(");
    if (parenthesized) advance();
    while (!at_end()) {
      if (parenthesized && punct(")")) break;
      if (!parenthesized && punct("{")) break;
      if (punct("}")) break;
      const size_t before = pos_;
      if (punct(";") || punct(":")) {
        advance();
      } else if (looks_like_declaration()) {
        parse_declaration();
      } else {
        parse_expression();
      }
      ensure_progress(before);
    }
    if (parenthesized) {
      if (punct(")")) {
        advance();
      } else {
        missing();
      }
    }
    parse_body();
    end();
  }

  void parse_keyword_statement(std::string_view kind, bool with_value) {
    begin(kind);
    advance();
    if (with_value && !punct(";") && !punct("}") && !at_end()) {
      parse_expression();
    }
    expect_semicolon();
    end();
  }

  void parse_goto() {
    begin(kinds::kGotoStatement);
    advance();
    if (is_name()) leaf(kinds::kIdentifier, "label");
    expect_semicolon();
    end();
  }

  void parse_try() {
    begin(kinds::kTryStatement);
    advance();
    if (punct("(")) paren_group(kinds::kParameterList, "resources");
    parse_compound("body");
    while (word("catch")) {
      begin(kinds::kCatchClause);
      advance();
      if (punct("(")) paren_group(kinds::kParameterList, "parameters");
      parse_compound("body");
      end();
    }
    if (word("finally")) {
      begin(kinds::kFinallyClause);
      advance();
      parse_compound("body");
      end();
    }
    end();
  }

  // ---- expressions -------------------------------------------------------
  // Every parse_* below appends exactly one node to the current parent.

  void parse_expression() {
    parse_assignment();
    if (!punct(",")) return;
    begin_wrapping(kinds::kCommaExpression);
    while (punct(",")) {
      advance();
      parse_assignment();
    }
    end();
  }

  void parse_assignment() {
    parse_conditional();
    if (peek().kind == TokKind::kPunct && is_assignment_op(peek().text)) {
      begin_wrapping(kinds::kAssignmentExpression);
      advance();
      if (punct("{")) {
        parse_initializer_list();
      } else {
        parse_assignment();
      }
      end();
    }
  }

  void parse_conditional() {
    parse_binary(1);
    if (!punct("?")) return;
    begin_wrapping(kinds::kConditionalExpression);
    advance();
    parse_expression();
    if (punct(":")) {
      advance();
    } else {
      missing();
    }
    parse_conditional();
    end();
  }

  void parse_binary(int min_precedence) {
    parse_unary();
    for (;;) {
      const Tok& t = peek();
      if (t.kind != TokKind::kPunct) return;
      const int precedence = binary_precedence(t.text);
      if (precedence == 0 || precedence < min_precedence) return;
      begin_wrapping(kinds::kBinaryExpression);
      advance();
      parse_binary(precedence + 1);
      end();
    }
  }

  bool looks_like_cast() const {
    // '(' type-words [*&]* ')' followed by an operand.
    size_t k = 1;
    bool saw_type = false;
    while (peek(k).kind == TokKind::kWord ||
           (peek(k).kind == TokKind::kPunct &&
            one_of(peek(k).text, {"*", "&", "::"}))) {
      if (peek(k).kind == TokKind::kWord) {
        if (is_control_keyword(peek(k).text)) return false;
        saw_type = true;
      }
      ++k;
    }
    if (!saw_type || !punct(")", k)) return false;
    // A lone word in parentheses is only a cast when it is a known type.
    if (k == 2 && !is_primitive_type(peek(1).text)) {
      const Tok& next = peek(k + 1);
      if (next.kind != TokKind::kWord && next.kind != TokKind::kNumber &&
          next.kind != TokKind::kString && next.kind != TokKind::kChar) {
        return false;
      }
      return next.kind != TokKind::kWord || !is_control_keyword(next.text);
    }
    const Tok& next = peek(k + 1);
    if (next.kind == TokKind::kWord) return !is_control_keyword(next.text);
    if (next.kind == TokKind::kNumber || next.kind == TokKind::kString ||
        next.kind == TokKind::kChar) {
      return true;
    }
    return next.kind == TokKind::kPunct &&
           one_of(next.text, {"(", "!", "~", "-", "&", "*"});
  }

  void parse_unary() {
    DepthGuard guard(depth_);
    if (too_deep()) {
      if (at_end()) {
        missing();
      } else {
        error_group();
      }
      return;
    }
    const Tok& t = peek();
    if (t.kind == TokKind::kPunct) {
      if (one_of(t.text, {"!", "~", "-", "+", "*", "&"})) {
        begin(kinds::kUnaryExpression);
        advance();
        parse_unary();
        end();
        return;
      }
      if (t.text == "++" || t.text == "--") {
        begin(kinds::kUpdateExpression);
        advance();
        parse_unary();
        end();
        return;
      }
      if (t.text == "(" && looks_like_cast()) {
        begin(kinds::kCastExpression);
        begin(kinds::kTypeDescriptor, "type");
        advance();
        while (!punct(")")) token_leaf();
        advance();
        end();
        parse_unary();
        end();
        return;
      }
    } else if (t.kind == TokKind::kWord) {
      if (t.text == "sizeof") {
        begin(kinds::kSizeofExpression);
        advance();
        parse_unary();
        end();
        return;
      }
      if (t.text == "new") {
        begin(kinds::kNewExpression);
        advance();
        parse_postfix();
        // Anonymous class body: `new T(args) { members }`.
        if (punct("{") && toks_[pos_ - 1].kind == TokKind::kPunct &&
            toks_[pos_ - 1].text == ")") {
          parse_member_list();
        } else if (punct("{")) {
          parse_initializer_list();
        }
        end();
        return;
      }
      if (t.text == "delete") {
        begin(kinds::kUnaryExpression);
        advance();
        if (punct("[") && punct("]", 1)) {
          advance();
          advance();
        }
        parse_unary();
        end();
        return;
      }
    }
    parse_postfix();
  }

  void parse_postfix() {
    parse_primary();
    for (;;) {
      if (punct("(")) {
        begin_wrapping(kinds::kCallExpression);
        parse_arguments();
        end();
      } else if (punct("[")) {
        begin_wrapping(kinds::kSubscriptExpression);
        advance();
        if (!punct("]")) parse_expression();
        if (punct("]")) {
          advance();
        } else {
          missing();
        }
        end();
      } else if (punct(".") || punct("->")) {
        begin_wrapping(kinds::kFieldExpression);
        advance();
        if (is_name()) {
          leaf(kinds::kIdentifier, "field");
        } else {
          missing();
        }
        end();
      } else if (punct("++") || punct("--")) {
        begin_wrapping(kinds::kUpdateExpression);
        advance();
        end();
      } else {
        return;
      }
    }
  }

  void parse_arguments() {
    begin(kinds::kArgumentList, "arguments");
    advance();  // '('
    while (!at_end() && !punct(")") && !punct(";") && !punct("}")) {
      const size_t before = pos_;
      if (punct(",")) {
        advance();
      } else {
        parse_assignment();
      }
      ensure_progress(before);
    }
    if (punct(")")) {
      advance();
    } else {
      missing();
    }
    end();
  }

  void parse_parenthesized(std::string_view field = {}) {
    begin(kinds::kParenthesizedExpression, field);
    advance();  // '('
    if (!punct(")")) parse_expression();
    if (punct(")")) {
      advance();
    } else {
      // Skip junk up to the closing parenthesis, if it is close by.
      begin(kinds::kError);
      while (!at_end() && !punct(")") && !punct(";") && !punct("{") &&
             !punct("}")) {
        advance();
      }
      end();
      if (punct(")")) advance();
    }
    end();
  }

  void parse_initializer_list() {
    begin(kinds::kInitializerList);
    advance();  // '{'
    while (!at_end() && !punct("}")) {
      const size_t before = pos_;
      if (punct(",")) {
        advance();
      } else {
        parse_assignment();
      }
      ensure_progress(before);
    }
    if (punct("}")) {
      advance();
    } else {
      missing();
    }
    end();
  }

  void parse_primary() {
    const Tok& t = peek();
    switch (t.kind) {
      case TokKind::kWord:
        if (is_control_keyword(t.text)) {
          missing();
        } else {
          leaf(word_kind(t.text));
        }
        return;
      case TokKind::kNumber:
        leaf(kinds::kNumberLiteral);
        return;
      case TokKind::kString:
        begin(kinds::kStringLiteral);
        while (peek().kind == TokKind::kString) advance();
        end();
        return;
      case TokKind::kChar:
        leaf(kinds::kCharLiteral);
        return;
      case TokKind::kEnd:
        missing();
        return;
      case TokKind::kPunct:
        break;
    }
    if (t.text == "(") {
      parse_parenthesized();
    } else if (t.text == "{") {
      parse_initializer_list();
    } else if (one_of(t.text, {";", ")", "]", "}", ",", ":"})) {
      missing();
    } else {
      begin(kinds::kError);
      advance();
      end();
    }
  }

  std::string_view src_;
  std::vector<Tok> toks_;
  const ReferenceParserOptions& options_;
  std::vector<Node> nodes_;
  std::vector<Aux> aux_;
  std::vector<NodeIndex> stack_;
  size_t pos_ = 0;
  size_t last_end_ = 0;
  size_t depth_ = 0;
};

}  // namespace

SyntaxTree ReferenceParser::parse(std::string_view source) const {
  Lexer lexer(source, options_.newline_terminates);
  Parser parser(source, lexer.run(), options_);
  return parser.run();
}

}  // namespace vulaste::syntax
