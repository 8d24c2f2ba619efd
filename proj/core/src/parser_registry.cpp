#include <unistd.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>

#include "vulaste/digest.hpp"
#include "vulaste/error.hpp"
#include "vulaste/syntax.hpp"

namespace vulaste::syntax {

void ParserRegistry::add(std::string language,
                         std::shared_ptr<const ParserProvider> provider,
                         std::set<std::string> function_kinds) {
  if (!provider) fail(ErrorCode::kInvalidInput, "null parser provider");
  entries_[std::move(language)] = {std::move(provider), std::move(function_kinds)};
}

bool ParserRegistry::supports(std::string_view language) const {
  return entries_.find(language) != entries_.end();
}

const ParserProvider& ParserRegistry::provider(std::string_view language) const {
  auto it = entries_.find(language);
  if (it == entries_.end()) {
    fail(ErrorCode::kUnsupportedLanguage,
         "no parser registered for language '" + std::string(language) + "'");
  }
  return *it->second.provider;
}

const std::set<std::string>& ParserRegistry::function_kinds(
    std::string_view language) const {
  auto it = entries_.find(language);
  if (it == entries_.end()) {
    fail(ErrorCode::kUnsupportedLanguage,
         "no parser registered for language '" + std::string(language) + "'");
  }
  return it->second.function_kinds;
}

std::vector<std::string> ParserRegistry::languages() const {
  std::vector<std::string> out;
  for (const auto& [lang, entry] : entries_) out.push_back(lang);
  return out;
}

ParserRegistry ParserRegistry::builtin() {
  ParserRegistry registry;
  auto braces = std::make_shared<ReferenceParser>();
  auto go = std::make_shared<ReferenceParser>(
      ReferenceParserOptions{.newline_terminates = true});
  const std::set<std::string> functions{std::string(kinds::kFunctionDefinition)};
  registry.add("c", braces, functions);
  registry.add("cpp", braces, functions);
  registry.add("java", braces, functions);
  registry.add("go", go, functions);
  return registry;
}

SyntaxTree parse(const ParserRegistry& registry, std::string_view source,
                 std::string_view language) {
  return registry.provider(language).parse(source);
}

namespace {

class TempFile {
 public:
  explicit TempFile(std::string_view contents) {
    std::string pattern =
        (std::filesystem::temp_directory_path() / "vulaste-src-XXXXXX").string();
    const int fd = ::mkstemp(pattern.data());
    if (fd < 0) fail(ErrorCode::kIo, "cannot create a temporary file");
    ::close(fd);
    path_ = pattern;
    write_file(path_, contents);
  }
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('\'');
  return out;
}

}  // namespace

SyntaxTree CommandParser::parse(std::string_view source) const {
  TempFile input(source);
  const std::string cmd = command_ + " " + shell_quote(input.path());
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) fail(ErrorCode::kIo, "cannot run parser command: " + command_);
  std::string output;
  std::array<char, 4096> buf;
  size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) {
    output.append(buf.data(), n);
  }
  const int status = ::pclose(pipe);
  if (status != 0) {
    fail(ErrorCode::kIo, "parser command failed: " + command_);
  }
  SyntaxTree tree = SyntaxTree::from_sexpr(output);
  const ByteRange root = tree.root_node().span;
  if (root.begin != 0 || root.end != source.size()) {
    fail(ErrorCode::kParse, "external parser root span does not cover the input");
  }
  return tree;
}

}  // namespace vulaste::syntax
