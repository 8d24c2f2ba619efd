#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vulaste/attention.hpp"
#include "vulaste/embedding.hpp"
#include "vulaste/objective.hpp"
#include "vulaste/tensor.hpp"
#include "vulaste/tokenizer.hpp"

namespace vulaste::model {

struct ModelConfig {
  size_t layers = 4;
  size_t heads = 4;
  size_t model_dim = 256;
  size_t ffn_dim = 1024;
  size_t window = attention::kDefaultWindow;
  std::vector<size_t> dilations;  // one per layer; empty means 1 everywhere
  size_t max_positions = 1024;
  double dropout = 0.1;
  bool use_ast = true;
  bool long_attention = true;  // false: every token attends to every token
  objective::LossKind loss = objective::LossKind::kFocal;
  objective::FocalConfig focal;
  embedding::AstMode ast_mode = embedding::AstMode::kLiteralEdgeSum;
  uint64_t seed = 1;

  // Throws Error(kInvalidInput).
  void validate() const;
  size_t dilation(size_t layer) const;
  embedding::EmbeddingConfig embedding_config(
      const embedding::NodeKindVocab& node_kinds) const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
// Unknown keys throw Error(kInvalidInput); missing keys keep their defaults.
void from_json(const nlohmann::json& j, ModelConfig& c);

// Model input for one code sample: token ids (BOS first), one AST path per
// token (empty for special tokens) and the global token positions.
struct EncodedSample {
  std::vector<tokenizer::TokenId> ids;
  std::vector<embedding::KindPath> paths;
  std::vector<size_t> globals;  // sorted, unique
  size_t truncated = 0;
};

template <typename T>
struct LayerParameters {
  Matrix<T> ln1_gamma, ln1_beta;
  Matrix<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix<T> ln2_gamma, ln2_beta;
  Matrix<T> w1, b1, w2, b2;
};

template <typename T>
struct Parameters {
  embedding::EmbeddingTables<T> embed;
  Matrix<T> embed_ln_gamma, embed_ln_beta;
  std::vector<LayerParameters<T>> layers;
  Matrix<T> final_ln_gamma, final_ln_beta;
  Matrix<T> head_weight;  // 1 x d
  Matrix<T> head_bias;    // 1 x 1

  // Every tensor with its stable name, in serialization order. The node-kind
  // table is listed only when it is non-empty.
  std::vector<std::pair<std::string, Matrix<T>*>> named();
  std::vector<std::pair<std::string, const Matrix<T>*>> named() const;

  size_t count() const;
  Parameters zeros_like() const;
  // N(0, 0.02) weights, zero biases, unit LayerNorm gains.
  static Parameters initialize(const ModelConfig& config, size_t vocab_size,
                               const embedding::NodeKindVocab& node_kinds,
                               uint64_t seed);
  template <typename U>
  Parameters<U> cast() const;
};

// Attention weights of one layer/head recorded during a forward pass.
struct AttentionCapture {
  size_t layer = 0;
  size_t head = 0;
  attention::ColumnIndex columns;
  std::vector<double> weights;
};

template <typename T>
struct NormCache {
  Matrix<T> normalized;
  std::vector<T> inv_std;
};

// Activations kept by a forward pass for the backward pass. An empty dropout
// mask means dropout was off.
template <typename T>
struct LayerCache {
  NormCache<T> ln1;
  Matrix<T> attn_in, q, k, v, context;
  std::vector<std::vector<T>> head_weights;
  Matrix<T> attn_mask;
  NormCache<T> ln2;
  Matrix<T> ffn_in, pre_act, act;
  Matrix<T> ffn_mask;
};

template <typename T>
struct ForwardCache {
  std::vector<tokenizer::TokenId> ids;
  std::vector<embedding::KindPath> paths;
  NormCache<T> embed_ln;
  Matrix<T> embed_mask;
  std::vector<attention::ColumnIndex> columns;  // per layer
  std::vector<LayerCache<T>> layers;
  NormCache<T> final_ln;
  Matrix<T> final_out;
};

// Pre-LN encoder over a single sequence, pooled at position 0.
template <typename T>
class Encoder {
 public:
  Encoder(ModelConfig config, embedding::NodeKindVocab node_kinds);

  // Returns the classification logit. Trailing padding is ignored. `cache`
  // keeps what backward needs; `dropout_rng` enables dropout (training only).
  T forward(const Parameters<T>& params, const EncodedSample& sample,
            ForwardCache<T>* cache = nullptr,
            std::mt19937_64* dropout_rng = nullptr,
            AttentionCapture* capture = nullptr) const;

  // Adds d(loss)/d(params) given d(loss)/d(logit) to `grads`.
  void backward(const Parameters<T>& params, const ForwardCache<T>& cache,
                T d_logit, Parameters<T>& grads) const;

  const ModelConfig& config() const { return config_; }
  const embedding::EmbeddingConfig& embedding_config() const { return embed_; }

 private:
  ModelConfig config_;
  embedding::EmbeddingConfig embed_;
};

// A trained (or freshly initialized) classifier with its artifact metadata.
struct Model {
  ModelConfig config;
  embedding::NodeKindVocab node_kinds;
  size_t vocab_size = 0;
  std::string vocab_hash;
  uint64_t step = 0;
  Parameters<float> params;

  static Model initialize(const ModelConfig& config,
                          const tokenizer::Vocabulary& vocab,
                          const embedding::NodeKindVocab& node_kinds);

  double probability(const EncodedSample& sample,
                     AttentionCapture* capture = nullptr) const;
  size_t parameter_count() const { return params.count(); }
};

// Throws Error(kIncompatibleArtifact) if `vocab` is not the one the model was
// trained with.
void check_vocabulary(const Model& model, const tokenizer::Vocabulary& vocab);

// Checkpoint container: magic line, little-endian u64 manifest length, JSON
// manifest, then raw little-endian float32 tensors.
inline constexpr std::string_view kCheckpointMagic = "VULASTECKPT 1\n";

void save_checkpoint(const Model& model, const std::string& path);
// Throws Error(kIncompatibleArtifact) on a bad magic, manifest or tensor table.
Model load_checkpoint(const std::string& path);

struct TrainConfig {
  size_t epochs = 10;
  size_t batch_size = 8;
  double learning_rate = 1e-4;
  double warmup_fraction = 0.1;
  size_t max_steps = 0;  // 0: no limit
  double threshold = 0.5;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct LabeledSample {
  std::string id;
  EncodedSample input;
  int label = 0;
};

struct EpochMetrics {
  size_t epoch = 0;
  size_t step = 0;
  double train_loss = 0;
  double train_accuracy = 0;
  double val_recall = 0;
  double val_precision = 0;
  double val_f1 = 0;
};

struct TrainResult {
  Model best;
  std::vector<EpochMetrics> epochs;
};

struct TrainHooks {
  std::function<void(size_t step, double batch_loss)> on_step;
  std::ostream* metrics_log = nullptr;  // one JSON object per epoch
};

// Adam with linear warmup then a constant rate. Keeps the epoch with the best
// validation F1 (the last epoch when there is no validation set). Throws
// Error(kInvalidDataset) unless the training set holds both classes.
TrainResult train(const ModelConfig& config, const TrainConfig& train_config,
                  const tokenizer::Vocabulary& vocab,
                  const embedding::NodeKindVocab& node_kinds,
                  std::span<const LabeledSample> train_set,
                  std::span<const LabeledSample> validation_set,
                  const TrainHooks& hooks = {});

struct Prediction {
  std::string id;
  double probability = 0;
};

// Sorted by descending probability, ties by id.
std::vector<Prediction> predict(const Model& model,
                                const tokenizer::Vocabulary& vocab,
                                std::span<const LabeledSample> samples,
                                unsigned threads = 1);

}  // namespace vulaste::model
