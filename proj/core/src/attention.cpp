#include "vulaste/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vulaste/error.hpp"

namespace vulaste::attention {

void AttentionPattern::validate() const {
  if (window < 2 || window % 2 != 0) {
    fail(ErrorCode::kInvalidInput, "attention window must be even and >= 2");
  }
  if (dilation < 1) fail(ErrorCode::kInvalidInput, "dilation must be >= 1");
  for (size_t k = 0; k < global_indices.size(); ++k) {
    if (global_indices[k] >= seq_len) {
      fail(ErrorCode::kInvalidInput, "global index outside the sequence");
    }
    if (k > 0 && global_indices[k] <= global_indices[k - 1]) {
      fail(ErrorCode::kInvalidInput, "global indices must be sorted and unique");
    }
  }
}

AttentionPattern AttentionPattern::dense(size_t seq_len) {
  AttentionPattern p;
  p.window = std::max<size_t>(2, 2 * (seq_len > 0 ? seq_len - 1 : 0));
  p.dilation = 1;
  p.seq_len = seq_len;
  p.global_indices.resize(seq_len);
  for (size_t i = 0; i < seq_len; ++i) p.global_indices[i] = i;
  return p;
}

AttentionMask::AttentionMask(AttentionPattern pattern)
    : pattern_(std::move(pattern)), is_global_(pattern_.seq_len, false) {
  pattern_.validate();
  for (size_t g : pattern_.global_indices) is_global_[g] = true;
}

bool AttentionMask::allowed(size_t i, size_t j) const {
  if (i >= pattern_.seq_len || j >= pattern_.seq_len) return false;
  if (i == j || is_global_[i] || is_global_[j]) return true;
  const auto diff = static_cast<long long>(j) - static_cast<long long>(i);
  const auto dil = static_cast<long long>(pattern_.dilation);
  if (diff % dil != 0) return false;
  const long long steps = diff / dil;
  return std::llabs(steps) <= static_cast<long long>(pattern_.window / 2);
}

AttentionMask build_mask(const AttentionPattern& pattern) {
  return AttentionMask(pattern);
}

ColumnIndex sparse_columns(const AttentionPattern& pattern) {
  pattern.validate();
  const size_t n = pattern.seq_len;
  std::vector<bool> global(n, false);
  for (size_t g : pattern.global_indices) global[g] = true;

  ColumnIndex index;
  index.offsets.reserve(n + 1);
  index.offsets.push_back(0);
  const auto half = static_cast<long long>(pattern.window / 2);
  const auto dil = static_cast<long long>(pattern.dilation);
  std::vector<uint32_t> window;
  for (size_t i = 0; i < n; ++i) {
    if (global[i]) {
      for (size_t j = 0; j < n; ++j) index.cols.push_back(static_cast<uint32_t>(j));
    } else {
      window.clear();
      for (long long s = -half; s <= half; ++s) {
        const long long j = static_cast<long long>(i) + s * dil;
        if (j >= 0 && j < static_cast<long long>(n)) {
          window.push_back(static_cast<uint32_t>(j));
        }
      }
      // Both inputs are ascending; merge and drop duplicates.
      std::set_union(window.begin(), window.end(), pattern.global_indices.begin(),
                     pattern.global_indices.end(), std::back_inserter(index.cols));
    }
    index.offsets.push_back(static_cast<uint32_t>(index.cols.size()));
  }
  return index;
}

namespace {

template <typename T>
void check_shapes(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                  size_t seq_len) {
  if (q.rows() != k.rows() || q.rows() != v.rows() || q.cols() != k.cols()) {
    fail(ErrorCode::kInvalidInput, "attention inputs have mismatched shapes");
  }
  if (static_cast<size_t>(q.rows()) != seq_len) {
    fail(ErrorCode::kInvalidInput,
         "attention inputs do not match the pattern length");
  }
}

}  // namespace

template <typename T>
Matrix<T> sparse_attention(const Matrix<T>& q, const Matrix<T>& k,
                           const Matrix<T>& v, const ColumnIndex& columns,
                           T scale, std::vector<T>* weights) {
  check_shapes(q, k, v, columns.rows());
  const Eigen::Index n = q.rows();
  Matrix<T> out = Matrix<T>::Zero(n, v.cols());
  if (weights) weights->assign(columns.cols.size(), T(0));
  std::vector<T> scores;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = columns.row(static_cast<size_t>(i));
    scores.resize(row.size());
    T max_score = -std::numeric_limits<T>::infinity();
    for (size_t c = 0; c < row.size(); ++c) {
      scores[c] = scale * q.row(i).dot(k.row(row[c]));
      max_score = std::max(max_score, scores[c]);
    }
    T total = 0;
    for (T& s : scores) {
      s = std::exp(s - max_score);
      total += s;
    }
    for (size_t c = 0; c < row.size(); ++c) {
      const T w = scores[c] / total;
      out.row(i) += w * v.row(row[c]);
      if (weights) (*weights)[columns.offsets[static_cast<size_t>(i)] + c] = w;
    }
  }
  return out;
}

template <typename T>
Matrix<T> sparse_attention(const Matrix<T>& q, const Matrix<T>& k,
                           const Matrix<T>& v, const AttentionPattern& pattern,
                           T scale) {
  return sparse_attention<T>(q, k, v, sparse_columns(pattern), scale, nullptr);
}

template <typename T>
void sparse_attention_backward(const Matrix<T>& d_out, const Matrix<T>& q,
                               const Matrix<T>& k, const Matrix<T>& v,
                               const ColumnIndex& columns,
                               std::span<const T> weights, T scale,
                               Matrix<T>& d_q, Matrix<T>& d_k, Matrix<T>& d_v) {
  check_shapes(q, k, v, columns.rows());
  const Eigen::Index n = q.rows();
  d_q = Matrix<T>::Zero(n, q.cols());
  d_k = Matrix<T>::Zero(n, k.cols());
  d_v = Matrix<T>::Zero(n, v.cols());
  std::vector<T> d_weight;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = columns.row(static_cast<size_t>(i));
    const size_t base = columns.offsets[static_cast<size_t>(i)];
    d_weight.resize(row.size());
    T weighted = 0;
    for (size_t c = 0; c < row.size(); ++c) {
      const T w = weights[base + c];
      d_v.row(row[c]) += w * d_out.row(i);
      d_weight[c] = d_out.row(i).dot(v.row(row[c]));
      weighted += w * d_weight[c];
    }
    for (size_t c = 0; c < row.size(); ++c) {
      const T d_score = weights[base + c] * (d_weight[c] - weighted) * scale;
      d_q.row(i) += d_score * k.row(row[c]);
      d_k.row(row[c]) += d_score * q.row(i);
    }
  }
}

template <typename T>
Matrix<T> dense_reference_attention(const Matrix<T>& q, const Matrix<T>& k,
                                    const Matrix<T>& v, const AttentionMask& mask,
                                    T scale, Matrix<T>* weights) {
  check_shapes(q, k, v, mask.seq_len());
  const Eigen::Index n = q.rows();
  Matrix<T> scores = scale * (q * k.transpose());
  const T neg_inf = -std::numeric_limits<T>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!mask.allowed(static_cast<size_t>(i), static_cast<size_t>(j))) {
        scores(i, j) = neg_inf;
      }
    }
  }
  Matrix<T> probs(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T m = scores.row(i).maxCoeff();
    probs.row(i) = (scores.row(i).array() - m).exp().matrix();
    probs.row(i) /= probs.row(i).sum();
  }
  if (weights) *weights = probs;
  return probs * v;
}

template <typename T>
std::vector<WeightTriple> export_weights(const ColumnIndex& columns,
                                         std::span<const T> weights) {
  if (weights.size() != columns.cols.size()) {
    fail(ErrorCode::kInvalidInput, "weight count does not match the columns");
  }
  std::vector<WeightTriple> out;
  out.reserve(weights.size());
  for (size_t i = 0; i < columns.rows(); ++i) {
    for (size_t c = columns.offsets[i]; c < columns.offsets[i + 1]; ++c) {
      out.push_back({static_cast<uint32_t>(i), columns.cols[c],
                     static_cast<double>(weights[c])});
    }
  }
  return out;
}

std::vector<size_t> default_global_policy(const tokenizer::TokenSequence& tokens,
                                          const syntax::SyntaxTree* tree) {
  std::vector<size_t> out;
  if (tokens.empty()) return out;
  if (tokens.ids[0] == tokenizer::Vocabulary::kSpecials.bos) out.push_back(0);
  if (tree == nullptr) return out;

  std::vector<ByteRange> top{tree->root_node().span};
  for (syntax::NodeIndex c : tree->root_node().children) {
    top.push_back(tree->node(c).span);
  }
  for (const ByteRange& node : top) {
    if (node.empty()) continue;
    for (size_t i = 0; i < tokens.size(); ++i) {
      const ByteRange& s = tokens.spans[i];
      if (!s.empty() && node.contains(s.begin)) {
        out.push_back(i);
        break;
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<size_t> dilation_schedule(size_t layers, size_t upper) {
  std::vector<size_t> out(layers, 1);
  for (size_t l = layers / 2; l < layers; ++l) out[l] = std::max<size_t>(1, upper);
  return out;
}

#define VULASTE_INSTANTIATE(T)                                                 \
  template Matrix<T> sparse_attention<T>(const Matrix<T>&, const Matrix<T>&,   \
                                         const Matrix<T>&, const ColumnIndex&, \
                                         T, std::vector<T>*);                  \
  template Matrix<T> sparse_attention<T>(const Matrix<T>&, const Matrix<T>&,   \
                                         const Matrix<T>&,                     \
                                         const AttentionPattern&, T);          \
  template void sparse_attention_backward<T>(                                  \
      const Matrix<T>&, const Matrix<T>&, const Matrix<T>&, const Matrix<T>&,  \
      const ColumnIndex&, std::span<const T>, T, Matrix<T>&, Matrix<T>&,       \
      Matrix<T>&);                                                             \
  template Matrix<T> dense_reference_attention<T>(                             \
      const Matrix<T>&, const Matrix<T>&, const Matrix<T>&,                    \
      const AttentionMask&, T, Matrix<T>*);                                    \
  template std::vector<WeightTriple> export_weights<T>(const ColumnIndex&,     \
                                                       std::span<const T>);

VULASTE_INSTANTIATE(float)
VULASTE_INSTANTIATE(double)
#undef VULASTE_INSTANTIATE

}  // namespace vulaste::attention
