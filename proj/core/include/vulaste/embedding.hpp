#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vulaste/syntax.hpp"
#include "vulaste/tensor.hpp"
#include "vulaste/tokenizer.hpp"

namespace vulaste::embedding {

// Node-kind label -> row of the node-kind table. Row 0 is reserved for kinds
// never seen when the vocabulary was built.
class NodeKindVocab {
 public:
  static constexpr uint32_t kUnknown = 0;
  static constexpr std::string_view kUnknownLabel = "<unk>";

  NodeKindVocab();
  // Duplicates and the unknown label itself are skipped.
  explicit NodeKindVocab(std::span<const std::string> kinds);

  // Every kind the built-in reference grammar can emit.
  static NodeKindVocab reference_grammar();

  uint32_t index(std::string_view kind) const;
  size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  friend bool operator==(const NodeKindVocab& a, const NodeKindVocab& b) {
    return a.labels_ == b.labels_;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, uint32_t> index_;
};

enum class AstMode {
  // Sum over the endpoints of every root-to-leaf edge: interior nodes count
  // twice, the root and the leaf once, and a lone root contributes nothing.
  kLiteralEdgeSum,
  // Every node on the path once.
  kDeduplicatedPathSum,
};

std::string_view to_string(AstMode mode);
// Throws Error(kInvalidInput) on unknown names.
AstMode ast_mode_from_string(std::string_view name);

struct EmbeddingConfig {
  size_t model_dim = 256;
  size_t max_positions = 1024;
  size_t num_token_types = 1;
  NodeKindVocab node_kinds = NodeKindVocab::reference_grammar();
  AstMode ast_mode = AstMode::kLiteralEdgeSum;
  bool use_ast = true;

  // Throws Error(kInvalidInput).
  void validate() const;
};

template <typename T>
struct EmbeddingTables {
  Matrix<T> word;        // vocab_size x d
  Matrix<T> position;    // max_positions x d
  Matrix<T> token_type;  // num_token_types x d
  Matrix<T> node_kind;   // node-kind vocab size x d; empty when use_ast is off

  static EmbeddingTables zeros(size_t vocab_size, const EmbeddingConfig& config);
  // Throws Error(kInvalidInput) when shapes disagree with `config`.
  void validate(const EmbeddingConfig& config) const;
};

// A path in node-kind-table rows.
using KindPath = std::vector<uint32_t>;

KindPath to_kind_path(const syntax::AstPath& path, const NodeKindVocab& vocab);

struct KindWeight {
  uint32_t kind;
  int weight;
};

// Multiplicity of each path position in the AST embedding sum; entries are
// in path order and may repeat a kind.
std::vector<KindWeight> path_weights(std::span<const uint32_t> path, AstMode mode);

// AE(t) for one token. Throws Error(kInvalidInput) on an empty path; unknown
// labels use the reserved unknown row.
template <typename T>
RowVector<T> ast_path_embedding(const syntax::AstPath& path,
                                const EmbeddingTables<T>& tables,
                                const NodeKindVocab& vocab, AstMode mode);

// Path of the node containing each token's first byte; special tokens (empty
// span) get none.
std::vector<std::optional<syntax::AstPath>> align_tokens_to_paths(
    const tokenizer::TokenSequence& tokens, const syntax::SyntaxTree& tree);

template <typename T>
struct FeatureMatrix {
  Matrix<T> values;      // L x d
  size_t truncated = 0;  // tokens dropped beyond max_positions
};

// Row i = word[id_i] + position[i] + token_type[0] + AE(path_i). Sequences
// longer than max_positions are truncated and the drop count reported.
template <typename T>
FeatureMatrix<T> embed_sequence(
    const tokenizer::TokenSequence& tokens,
    std::span<const std::optional<syntax::AstPath>> paths,
    const EmbeddingTables<T>& tables, const EmbeddingConfig& config);

// Same as embed_sequence over pre-indexed inputs (an empty KindPath means no
// AST contribution). Used by the model's forward pass.
template <typename T>
Matrix<T> embed_indexed(std::span<const tokenizer::TokenId> ids,
                        std::span<const KindPath> paths,
                        const EmbeddingTables<T>& tables,
                        const EmbeddingConfig& config);

}  // namespace vulaste::embedding
