#pragma once

#include <string_view>

#include "vulaste/attention.hpp"
#include "vulaste/embedding.hpp"
#include "vulaste/model.hpp"
#include "vulaste/syntax.hpp"
#include "vulaste/tokenizer.hpp"

namespace vulaste::model {

// Source text -> model input: BOS + subtokens + EOS, cut at max_positions,
// with per-token AST paths and global positions. Languages the registry does
// not support get no AST paths and no tree-derived globals.
class Featurizer {
 public:
  Featurizer(const tokenizer::Vocabulary& vocab, const syntax::ParserRegistry& registry,
             embedding::NodeKindVocab node_kinds, size_t max_positions,
             attention::GlobalPolicy policy = attention::default_global_policy);

  EncodedSample encode(std::string_view source, std::string_view language) const;

  // The featurized tokens of `source` after truncation. `dropped`, when
  // given, receives the number of tokens cut.
  tokenizer::TokenSequence tokens(std::string_view source,
                                  size_t* dropped = nullptr) const;

 private:
  const tokenizer::Vocabulary& vocab_;
  const syntax::ParserRegistry& registry_;
  embedding::NodeKindVocab node_kinds_;
  size_t max_positions_;
  attention::GlobalPolicy policy_;
};

}  // namespace vulaste::model
