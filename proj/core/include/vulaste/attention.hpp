#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "vulaste/syntax.hpp"
#include "vulaste/tensor.hpp"
#include "vulaste/tokenizer.hpp"

namespace vulaste::attention {

inline constexpr size_t kDefaultWindow = 64;

// Sliding window of `window` total span (window/2 each side) at stride
// `dilation`, plus global tokens that attend to and are attended by every
// position.
struct AttentionPattern {
  size_t window = kDefaultWindow;
  size_t dilation = 1;
  std::vector<size_t> global_indices;  // sorted, unique
  size_t seq_len = 0;

  // Throws Error(kInvalidInput): window must be even and >= 2, dilation >= 1,
  // globals inside [0, seq_len).
  void validate() const;

  // Full attention over `seq_len` tokens: window >= 2(L-1), dilation 1, and
  // every token global.
  static AttentionPattern dense(size_t seq_len);
};

// The allowed relation, evaluated from its definition.
class AttentionMask {
 public:
  explicit AttentionMask(AttentionPattern pattern);

  bool allowed(size_t i, size_t j) const;
  size_t seq_len() const { return pattern_.seq_len; }
  const AttentionPattern& pattern() const { return pattern_; }
  bool is_global(size_t i) const { return is_global_[i]; }

 private:
  AttentionPattern pattern_;
  std::vector<bool> is_global_;
};

AttentionMask build_mask(const AttentionPattern& pattern);

// Allowed columns per row in CSR form, enumerated from the window offsets and
// the global set; columns within a row are ascending.
struct ColumnIndex {
  std::vector<uint32_t> offsets;  // seq_len + 1 entries
  std::vector<uint32_t> cols;

  size_t rows() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::span<const uint32_t> row(size_t i) const {
    return std::span(cols).subspan(offsets[i], offsets[i + 1] - offsets[i]);
  }
};

ColumnIndex sparse_columns(const AttentionPattern& pattern);

// Row i = softmax over allowed j of scale * q_i.k_j, applied to V. Rows are
// processed in order and columns ascending, so results are bitwise stable.
// `weights`, when given, receives one weight per ColumnIndex entry.
// Throws Error(kInvalidInput) on shape mismatches.
template <typename T>
Matrix<T> sparse_attention(const Matrix<T>& q, const Matrix<T>& k,
                           const Matrix<T>& v, const ColumnIndex& columns,
                           T scale, std::vector<T>* weights = nullptr);

template <typename T>
Matrix<T> sparse_attention(const Matrix<T>& q, const Matrix<T>& k,
                           const Matrix<T>& v, const AttentionPattern& pattern,
                           T scale);

// Gradients of sparse_attention. `weights` are the forward weights.
template <typename T>
void sparse_attention_backward(const Matrix<T>& d_out, const Matrix<T>& q,
                               const Matrix<T>& k, const Matrix<T>& v,
                               const ColumnIndex& columns,
                               std::span<const T> weights, T scale,
                               Matrix<T>& d_q, Matrix<T>& d_k, Matrix<T>& d_v);

// Full L x L scores with disallowed entries at -inf before the softmax.
// `weights`, when given, receives the dense L x L weight matrix.
template <typename T>
Matrix<T> dense_reference_attention(const Matrix<T>& q, const Matrix<T>& k,
                                    const Matrix<T>& v, const AttentionMask& mask,
                                    T scale, Matrix<T>* weights = nullptr);

struct WeightTriple {
  uint32_t i;
  uint32_t j;
  double weight;
};

template <typename T>
std::vector<WeightTriple> export_weights(const ColumnIndex& columns,
                                         std::span<const T> weights);

// Chooses global tokens from a featurized sequence. `tree` may be null.
using GlobalPolicy = std::function<std::vector<size_t>(
    const tokenizer::TokenSequence& tokens, const syntax::SyntaxTree* tree)>;

// The sequence-start token (when present at index 0) plus the first subtoken
// of the root and of every child of the root (top-level definitions).
std::vector<size_t> default_global_policy(const tokenizer::TokenSequence& tokens,
                                          const syntax::SyntaxTree* tree);

// Per-layer dilation: 1 on the lower half, `upper` on the upper half.
std::vector<size_t> dilation_schedule(size_t layers, size_t upper = 1);

}  // namespace vulaste::attention
