#include "vulaste/features.hpp"

#include <algorithm>

#include "vulaste/error.hpp"

namespace vulaste::model {

Featurizer::Featurizer(const tokenizer::Vocabulary& vocab,
                       const syntax::ParserRegistry& registry,
                       embedding::NodeKindVocab node_kinds, size_t max_positions,
                       attention::GlobalPolicy policy)
    : vocab_(vocab),
      registry_(registry),
      node_kinds_(std::move(node_kinds)),
      max_positions_(max_positions),
      policy_(std::move(policy)) {
  if (max_positions_ < 2) fail(ErrorCode::kInvalidInput, "max_positions must be >= 2");
}

tokenizer::TokenSequence Featurizer::tokens(std::string_view source,
                                            size_t* dropped) const {
  const tokenizer::TokenSequence body = tokenizer::encode(vocab_, source);
  tokenizer::TokenSequence out;
  out.ids.push_back(tokenizer::Vocabulary::kSpecials.bos);
  out.spans.push_back({});
  out.ids.insert(out.ids.end(), body.ids.begin(), body.ids.end());
  out.spans.insert(out.spans.end(), body.spans.begin(), body.spans.end());
  out.ids.push_back(tokenizer::Vocabulary::kSpecials.eos);
  out.spans.push_back({});
  if (dropped) *dropped = out.ids.size() - std::min(out.ids.size(), max_positions_);
  if (out.ids.size() > max_positions_) {
    // Cut the body, keep the closing frame token.
    out.ids.resize(max_positions_);
    out.spans.resize(max_positions_);
    out.ids.back() = tokenizer::Vocabulary::kSpecials.eos;
    out.spans.back() = {};
  }
  return out;
}

EncodedSample Featurizer::encode(std::string_view source,
                                 std::string_view language) const {
  EncodedSample out;
  const tokenizer::TokenSequence seq = tokens(source, &out.truncated);
  out.ids = seq.ids;
  out.paths.resize(seq.size());

  std::optional<syntax::SyntaxTree> tree;
  if (registry_.supports(language)) {
    tree.emplace(syntax::parse(registry_, source, language));
    const auto paths = embedding::align_tokens_to_paths(seq, *tree);
    for (size_t i = 0; i < paths.size(); ++i) {
      if (paths[i]) out.paths[i] = embedding::to_kind_path(*paths[i], node_kinds_);
    }
  }
  out.globals = policy_(seq, tree ? &*tree : nullptr);
  std::sort(out.globals.begin(), out.globals.end());
  out.globals.erase(std::unique(out.globals.begin(), out.globals.end()),
                    out.globals.end());
  std::erase_if(out.globals, [&](size_t g) { return g >= seq.size(); });
  return out;
}

}  // namespace vulaste::model
