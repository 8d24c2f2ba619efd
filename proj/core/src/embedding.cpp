#include "vulaste/embedding.hpp"

#include "vulaste/error.hpp"

namespace vulaste::embedding {

NodeKindVocab::NodeKindVocab() {
  labels_.emplace_back(kUnknownLabel);
  index_.emplace(std::string(kUnknownLabel), kUnknown);
}

NodeKindVocab::NodeKindVocab(std::span<const std::string> kinds) : NodeKindVocab() {
  for (const std::string& k : kinds) {
    if (index_.contains(k)) continue;
    index_.emplace(k, static_cast<uint32_t>(labels_.size()));
    labels_.push_back(k);
  }
}

NodeKindVocab NodeKindVocab::reference_grammar() {
  std::vector<std::string> labels;
  for (std::string_view k : syntax::kinds::all()) labels.emplace_back(k);
  return NodeKindVocab(labels);
}

uint32_t NodeKindVocab::index(std::string_view kind) const {
  auto it = index_.find(std::string(kind));
  return it == index_.end() ? kUnknown : it->second;
}

std::string_view to_string(AstMode mode) {
  return mode == AstMode::kLiteralEdgeSum ? "literal-edge-sum"
                                          : "deduplicated-path-sum";
}

AstMode ast_mode_from_string(std::string_view name) {
  if (name == "literal-edge-sum") return AstMode::kLiteralEdgeSum;
  if (name == "deduplicated-path-sum") return AstMode::kDeduplicatedPathSum;
  fail(ErrorCode::kInvalidInput, "unknown ast mode '" + std::string(name) + "'");
}

void EmbeddingConfig::validate() const {
  if (model_dim == 0) fail(ErrorCode::kInvalidInput, "model_dim must be positive");
  if (max_positions == 0) {
    fail(ErrorCode::kInvalidInput, "max_positions must be positive");
  }
  if (num_token_types == 0) {
    fail(ErrorCode::kInvalidInput, "num_token_types must be positive");
  }
  if (node_kinds.size() == 0 ||
      node_kinds.labels()[NodeKindVocab::kUnknown] != NodeKindVocab::kUnknownLabel) {
    fail(ErrorCode::kInvalidInput, "node-kind vocabulary lacks the unknown row");
  }
}

template <typename T>
EmbeddingTables<T> EmbeddingTables<T>::zeros(size_t vocab_size,
                                             const EmbeddingConfig& config) {
  const auto d = static_cast<Eigen::Index>(config.model_dim);
  EmbeddingTables t;
  t.word = Matrix<T>::Zero(static_cast<Eigen::Index>(vocab_size), d);
  t.position = Matrix<T>::Zero(static_cast<Eigen::Index>(config.max_positions), d);
  t.token_type =
      Matrix<T>::Zero(static_cast<Eigen::Index>(config.num_token_types), d);
  if (config.use_ast) {
    t.node_kind =
        Matrix<T>::Zero(static_cast<Eigen::Index>(config.node_kinds.size()), d);
  }
  return t;
}

template <typename T>
void EmbeddingTables<T>::validate(const EmbeddingConfig& config) const {
  const auto d = static_cast<Eigen::Index>(config.model_dim);
  auto check = [&](const Matrix<T>& m, size_t rows, const char* name) {
    if (m.rows() != static_cast<Eigen::Index>(rows) || m.cols() != d) {
      fail(ErrorCode::kInvalidInput, std::string("embedding table '") + name +
                                         "' has the wrong shape");
    }
  };
  if (word.cols() != d) {
    fail(ErrorCode::kInvalidInput, "embedding table 'word' has the wrong width");
  }
  check(position, config.max_positions, "position");
  check(token_type, config.num_token_types, "token_type");
  if (config.use_ast) check(node_kind, config.node_kinds.size(), "node_kind");
}

KindPath to_kind_path(const syntax::AstPath& path, const NodeKindVocab& vocab) {
  KindPath out;
  out.reserve(path.kinds.size());
  for (const std::string& k : path.kinds) out.push_back(vocab.index(k));
  return out;
}

std::vector<KindWeight> path_weights(std::span<const uint32_t> path, AstMode mode) {
  std::vector<KindWeight> out;
  if (mode == AstMode::kDeduplicatedPathSum) {
    for (uint32_t k : path) out.push_back({k, 1});
    return out;
  }
  if (path.size() < 2) return out;
  for (size_t i = 0; i < path.size(); ++i) {
    const bool endpoint = i == 0 || i + 1 == path.size();
    out.push_back({path[i], endpoint ? 1 : 2});
  }
  return out;
}

template <typename T>
RowVector<T> ast_path_embedding(const syntax::AstPath& path,
                                const EmbeddingTables<T>& tables,
                                const NodeKindVocab& vocab, AstMode mode) {
  if (path.kinds.empty()) fail(ErrorCode::kInvalidInput, "empty AST path");
  RowVector<T> out = RowVector<T>::Zero(tables.node_kind.cols());
  const KindPath kinds = to_kind_path(path, vocab);
  for (const KindWeight& kw : path_weights(kinds, mode)) {
    out += static_cast<T>(kw.weight) * tables.node_kind.row(kw.kind);
  }
  return out;
}

std::vector<std::optional<syntax::AstPath>> align_tokens_to_paths(
    const tokenizer::TokenSequence& tokens, const syntax::SyntaxTree& tree) {
  std::vector<std::optional<syntax::AstPath>> out;
  out.reserve(tokens.size());
  const ByteRange root = tree.root_node().span;
  for (const ByteRange& span : tokens.spans) {
    if (span.empty() || !root.contains(span.begin)) {
      out.emplace_back(std::nullopt);
    } else {
      out.emplace_back(syntax::path_for_offset(tree, span.begin));
    }
  }
  return out;
}

template <typename T>
Matrix<T> embed_indexed(std::span<const tokenizer::TokenId> ids,
                        std::span<const KindPath> paths,
                        const EmbeddingTables<T>& tables,
                        const EmbeddingConfig& config) {
  if (paths.size() != ids.size()) {
    fail(ErrorCode::kInvalidInput, "one AST path slot per token is required");
  }
  if (ids.size() > config.max_positions) {
    fail(ErrorCode::kInvalidInput, "sequence longer than max_positions");
  }
  const auto n = static_cast<Eigen::Index>(ids.size());
  Matrix<T> out(n, static_cast<Eigen::Index>(config.model_dim));
  for (Eigen::Index i = 0; i < n; ++i) {
    const tokenizer::TokenId id = ids[static_cast<size_t>(i)];
    if (id >= static_cast<size_t>(tables.word.rows())) {
      fail(ErrorCode::kInvalidInput,
           "token id " + std::to_string(id) + " is outside the word table");
    }
    out.row(i) = tables.word.row(id) + tables.position.row(i) +
                 tables.token_type.row(0);
    if (config.use_ast) {
      for (const KindWeight& kw :
           path_weights(paths[static_cast<size_t>(i)], config.ast_mode)) {
        out.row(i) += static_cast<T>(kw.weight) * tables.node_kind.row(kw.kind);
      }
    }
  }
  return out;
}

template <typename T>
FeatureMatrix<T> embed_sequence(
    const tokenizer::TokenSequence& tokens,
    std::span<const std::optional<syntax::AstPath>> paths,
    const EmbeddingTables<T>& tables, const EmbeddingConfig& config) {
  config.validate();
  tables.validate(config);
  if (paths.size() != tokens.size()) {
    fail(ErrorCode::kInvalidInput, "one AST path slot per token is required");
  }
  const size_t kept = std::min(tokens.size(), config.max_positions);
  std::vector<KindPath> kind_paths(kept);
  for (size_t i = 0; i < kept; ++i) {
    if (paths[i]) kind_paths[i] = to_kind_path(*paths[i], config.node_kinds);
  }
  FeatureMatrix<T> out;
  out.values = embed_indexed<T>(std::span(tokens.ids).first(kept), kind_paths,
                                tables, config);
  out.truncated = tokens.size() - kept;
  return out;
}

#define VULASTE_INSTANTIATE(T)                                                \
  template struct EmbeddingTables<T>;                                         \
  template RowVector<T> ast_path_embedding<T>(                                \
      const syntax::AstPath&, const EmbeddingTables<T>&, const NodeKindVocab&, \
      AstMode);                                                               \
  template Matrix<T> embed_indexed<T>(                                        \
      std::span<const tokenizer::TokenId>, std::span<const KindPath>,         \
      const EmbeddingTables<T>&, const EmbeddingConfig&);                     \
  template FeatureMatrix<T> embed_sequence<T>(                                \
      const tokenizer::TokenSequence&,                                        \
      std::span<const std::optional<syntax::AstPath>>,                        \
      const EmbeddingTables<T>&, const EmbeddingConfig&);

VULASTE_INSTANTIATE(float)
VULASTE_INSTANTIATE(double)
#undef VULASTE_INSTANTIATE

}  // namespace vulaste::embedding
