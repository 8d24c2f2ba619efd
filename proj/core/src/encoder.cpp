#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "vulaste/error.hpp"
#include "vulaste/model.hpp"

namespace vulaste::model {

void ModelConfig::validate() const {
  if (layers == 0 || heads == 0 || model_dim == 0 || ffn_dim == 0) {
    fail(ErrorCode::kInvalidInput, "layers, heads, model_dim and ffn_dim must be positive");
  }
  if (model_dim % heads != 0) {
    fail(ErrorCode::kInvalidInput, "model_dim must be divisible by heads");
  }
  if (window < 2 || window % 2 != 0) {
    fail(ErrorCode::kInvalidInput, "window must be even and >= 2");
  }
  if (!dilations.empty() && dilations.size() != layers) {
    fail(ErrorCode::kInvalidInput, "dilations must list one value per layer");
  }
  for (size_t d : dilations) {
    if (d == 0) fail(ErrorCode::kInvalidInput, "dilation must be >= 1");
  }
  if (max_positions < 2) fail(ErrorCode::kInvalidInput, "max_positions must be >= 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    fail(ErrorCode::kInvalidInput, "dropout must lie in [0, 1)");
  }
  focal.validate();
}

size_t ModelConfig::dilation(size_t layer) const {
  return dilations.empty() ? 1 : dilations.at(layer);
}

embedding::EmbeddingConfig ModelConfig::embedding_config(
    const embedding::NodeKindVocab& node_kinds) const {
  embedding::EmbeddingConfig e;
  e.model_dim = model_dim;
  e.max_positions = max_positions;
  e.num_token_types = 1;
  e.node_kinds = node_kinds;
  e.ast_mode = ast_mode;
  e.use_ast = use_ast;
  return e;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{
      {"layers", c.layers},
      {"heads", c.heads},
      {"model_dim", c.model_dim},
      {"ffn_dim", c.ffn_dim},
      {"window", c.window},
      {"dilations", c.dilations},
      {"max_positions", c.max_positions},
      {"dropout", c.dropout},
      {"use_ast", c.use_ast},
      {"long_attention", c.long_attention},
      {"loss", std::string(objective::to_string(c.loss))},
      {"focal_alpha", c.focal.alpha},
      {"focal_gamma", c.focal.gamma},
      {"ast_mode", std::string(embedding::to_string(c.ast_mode))},
      {"seed", c.seed},
  };
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  static const std::set<std::string> known{
      "layers",  "heads",          "model_dim", "ffn_dim",     "window",
      "dilations", "max_positions", "dropout",  "use_ast",     "long_attention",
      "loss",    "focal_alpha",    "focal_gamma", "ast_mode",  "seed"};
  if (!j.is_object()) fail(ErrorCode::kInvalidInput, "model config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) {
      fail(ErrorCode::kInvalidInput, "unknown model config key '" + key + "'");
    }
  }
  try {
    c.layers = j.value("layers", c.layers);
    c.heads = j.value("heads", c.heads);
    c.model_dim = j.value("model_dim", c.model_dim);
    c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
    c.window = j.value("window", c.window);
    c.dilations = j.value("dilations", c.dilations);
    c.max_positions = j.value("max_positions", c.max_positions);
    c.dropout = j.value("dropout", c.dropout);
    c.use_ast = j.value("use_ast", c.use_ast);
    c.long_attention = j.value("long_attention", c.long_attention);
    if (j.contains("loss")) {
      c.loss = objective::loss_kind_from_string(j.at("loss").get<std::string>());
    }
    c.focal.alpha = j.value("focal_alpha", c.focal.alpha);
    c.focal.gamma = j.value("focal_gamma", c.focal.gamma);
    if (j.contains("ast_mode")) {
      c.ast_mode = embedding::ast_mode_from_string(j.at("ast_mode").get<std::string>());
    }
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidInput, std::string("bad model config: ") + e.what());
  }
}

// ---------------------------------------------------------------- parameters

template <typename T>
std::vector<std::pair<std::string, Matrix<T>*>> Parameters<T>::named() {
  std::vector<std::pair<std::string, Matrix<T>*>> out;
  out.emplace_back("embed.word", &embed.word);
  out.emplace_back("embed.position", &embed.position);
  out.emplace_back("embed.token_type", &embed.token_type);
  if (embed.node_kind.size() > 0) out.emplace_back("embed.node_kind", &embed.node_kind);
  out.emplace_back("embed.ln.gamma", &embed_ln_gamma);
  out.emplace_back("embed.ln.beta", &embed_ln_beta);
  for (size_t l = 0; l < layers.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerParameters<T>& y = layers[l];
    out.emplace_back(p + "ln1.gamma", &y.ln1_gamma);
    out.emplace_back(p + "ln1.beta", &y.ln1_beta);
    out.emplace_back(p + "attn.wq", &y.wq);
    out.emplace_back(p + "attn.bq", &y.bq);
    out.emplace_back(p + "attn.wk", &y.wk);
    out.emplace_back(p + "attn.bk", &y.bk);
    out.emplace_back(p + "attn.wv", &y.wv);
    out.emplace_back(p + "attn.bv", &y.bv);
    out.emplace_back(p + "attn.wo", &y.wo);
    out.emplace_back(p + "attn.bo", &y.bo);
    out.emplace_back(p + "ln2.gamma", &y.ln2_gamma);
    out.emplace_back(p + "ln2.beta", &y.ln2_beta);
    out.emplace_back(p + "ffn.w1", &y.w1);
    out.emplace_back(p + "ffn.b1", &y.b1);
    out.emplace_back(p + "ffn.w2", &y.w2);
    out.emplace_back(p + "ffn.b2", &y.b2);
  }
  out.emplace_back("final_ln.gamma", &final_ln_gamma);
  out.emplace_back("final_ln.beta", &final_ln_beta);
  out.emplace_back("head.weight", &head_weight);
  out.emplace_back("head.bias", &head_bias);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const Matrix<T>*>> Parameters<T>::named() const {
  std::vector<std::pair<std::string, const Matrix<T>*>> out;
  for (auto& [name, m] : const_cast<Parameters*>(this)->named()) {
    out.emplace_back(std::move(name), m);
  }
  return out;
}

template <typename T>
size_t Parameters<T>::count() const {
  size_t n = 0;
  for (const auto& [name, m] : named()) n += static_cast<size_t>(m->size());
  return n;
}

namespace {

// Same layer layout and node-kind presence as `src`, with uninitialized
// tensors.
template <typename U, typename T>
Parameters<U> same_layout(const Parameters<T>& src) {
  Parameters<U> out;
  out.layers.resize(src.layers.size());
  if (src.embed.node_kind.size() > 0) {
    out.embed.node_kind.resize(src.embed.node_kind.rows(), src.embed.node_kind.cols());
  }
  return out;
}

}  // namespace

template <typename T>
Parameters<T> Parameters<T>::zeros_like() const {
  Parameters out = same_layout<T>(*this);
  auto dst = out.named();
  auto src = named();
  for (size_t i = 0; i < src.size(); ++i) {
    *dst[i].second = Matrix<T>::Zero(src[i].second->rows(), src[i].second->cols());
  }
  return out;
}

template <typename T>
template <typename U>
Parameters<U> Parameters<T>::cast() const {
  Parameters<U> out = same_layout<U>(*this);
  auto dst = out.named();
  auto src = named();
  for (size_t i = 0; i < src.size(); ++i) {
    *dst[i].second = src[i].second->template cast<U>();
  }
  return out;
}

template <typename T>
Parameters<T> Parameters<T>::initialize(const ModelConfig& config, size_t vocab_size,
                                        const embedding::NodeKindVocab& node_kinds,
                                        uint64_t seed) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.model_dim);
  const auto f = static_cast<Eigen::Index>(config.ffn_dim);
  Parameters p;
  p.embed = embedding::EmbeddingTables<T>::zeros(vocab_size,
                                                 config.embedding_config(node_kinds));
  p.embed_ln_gamma.resize(1, d);
  p.embed_ln_beta.resize(1, d);
  p.layers.resize(config.layers);
  for (LayerParameters<T>& y : p.layers) {
    for (Matrix<T>* m : {&y.ln1_gamma, &y.ln1_beta, &y.bq, &y.bk, &y.bv, &y.bo,
                         &y.ln2_gamma, &y.ln2_beta, &y.b2}) {
      m->resize(1, d);
    }
    for (Matrix<T>* m : {&y.wq, &y.wk, &y.wv, &y.wo}) m->resize(d, d);
    y.w1.resize(d, f);
    y.b1.resize(1, f);
    y.w2.resize(f, d);
  }
  p.final_ln_gamma.resize(1, d);
  p.final_ln_beta.resize(1, d);
  p.head_weight.resize(1, d);
  p.head_bias.resize(1, 1);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  for (auto& [name, m] : p.named()) {
    const std::string leaf = name.substr(name.rfind('.') + 1);
    if (leaf == "gamma") {
      m->setOnes();
    } else if (leaf == "beta" || leaf == "bias" || leaf.front() == 'b') {
      m->setZero();
    } else {
      for (Eigen::Index i = 0; i < m->size(); ++i) {
        m->data()[i] = static_cast<T>(normal(rng));
      }
    }
  }
  return p;
}

// ------------------------------------------------------------------ encoder

namespace {

constexpr double kNormEpsilon = 1e-5;

template <typename T>
Matrix<T> norm_forward(const Matrix<T>& x, const Matrix<T>& gamma,
                       const Matrix<T>& beta, NormCache<T>& cache) {
  const Eigen::Index n = x.rows();
  cache.normalized.resize(n, x.cols());
  cache.inv_std.resize(static_cast<size_t>(n));
  Matrix<T> y(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mean = x.row(i).mean();
    const auto centered = (x.row(i).array() - mean).matrix();
    const T var = centered.squaredNorm() / static_cast<T>(x.cols());
    const T inv_std = T(1) / std::sqrt(var + static_cast<T>(kNormEpsilon));
    cache.normalized.row(i) = centered * inv_std;
    cache.inv_std[static_cast<size_t>(i)] = inv_std;
    y.row(i) = cache.normalized.row(i).cwiseProduct(gamma.row(0)) + beta.row(0);
  }
  return y;
}

template <typename T>
Matrix<T> norm_backward(const Matrix<T>& dy, const Matrix<T>& gamma,
                        const NormCache<T>& cache, Matrix<T>& d_gamma,
                        Matrix<T>& d_beta) {
  d_gamma.row(0) += dy.cwiseProduct(cache.normalized).colwise().sum();
  d_beta.row(0) += dy.colwise().sum();
  Matrix<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const RowVector<T> dxhat = dy.row(i).cwiseProduct(gamma.row(0));
    const T m1 = dxhat.mean();
    const T m2 = dxhat.cwiseProduct(cache.normalized.row(i)).mean();
    dx.row(i) = cache.inv_std[static_cast<size_t>(i)] *
                (dxhat.array() - m1 - cache.normalized.row(i).array() * m2).matrix();
  }
  return dx;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

template <typename T>
Matrix<T> gelu(const Matrix<T>& x) {
  return x.unaryExpr([](T v) {
    const T t = std::tanh(static_cast<T>(kGeluC) * (v + static_cast<T>(kGeluA) * v * v * v));
    return static_cast<T>(0.5) * v * (T(1) + t);
  });
}

template <typename T>
Matrix<T> gelu_grad(const Matrix<T>& x) {
  return x.unaryExpr([](T v) {
    const T c = static_cast<T>(kGeluC);
    const T a = static_cast<T>(kGeluA);
    const T t = std::tanh(c * (v + a * v * v * v));
    return static_cast<T>(0.5) * (T(1) + t) +
           static_cast<T>(0.5) * v * (T(1) - t * t) * c * (T(1) + 3 * a * v * v);
  });
}

template <typename T>
Matrix<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate,
                       std::mt19937_64* rng) {
  if (rng == nullptr || rate <= 0.0) return {};
  std::bernoulli_distribution keep(1.0 - rate);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  Matrix<T> mask(rows, cols);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = keep(*rng) ? scale : T(0);
  }
  return mask;
}

template <typename T>
void apply_mask(Matrix<T>& x, const Matrix<T>& mask) {
  if (mask.size() > 0) x = x.cwiseProduct(mask);
}

template <typename T>
Matrix<T> affine(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& b) {
  Matrix<T> y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

template <typename T>
void accumulate_affine(const Matrix<T>& x, const Matrix<T>& dy, Matrix<T>& dw,
                       Matrix<T>& db) {
  dw.noalias() += x.transpose() * dy;
  db.row(0) += dy.colwise().sum();
}

}  // namespace

template <typename T>
Encoder<T>::Encoder(ModelConfig config, embedding::NodeKindVocab node_kinds)
    : config_(std::move(config)), embed_(config_.embedding_config(node_kinds)) {
  config_.validate();
}

template <typename T>
T Encoder<T>::forward(const Parameters<T>& params, const EncodedSample& sample,
                      ForwardCache<T>* cache, std::mt19937_64* dropout_rng,
                      AttentionCapture* capture) const {
  if (!sample.paths.empty() && sample.paths.size() != sample.ids.size()) {
    fail(ErrorCode::kInvalidInput, "one AST path slot per token is required");
  }
  size_t len = sample.ids.size();
  while (len > 0 && sample.ids[len - 1] == tokenizer::Vocabulary::kSpecials.pad) --len;
  if (len == 0) fail(ErrorCode::kInvalidInput, "empty input sequence");
  if (len > config_.max_positions) {
    fail(ErrorCode::kInvalidInput, "sequence longer than max_positions");
  }
  if (capture && (capture->layer >= config_.layers || capture->head >= config_.heads)) {
    fail(ErrorCode::kOutOfRange, "attention capture outside the model");
  }

  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  c.ids.assign(sample.ids.begin(), sample.ids.begin() + static_cast<long>(len));
  c.paths.assign(len, {});
  if (!sample.paths.empty()) {
    std::copy_n(sample.paths.begin(), len, c.paths.begin());
  }
  std::vector<size_t> globals;
  for (size_t g : sample.globals) {
    if (g < len) globals.push_back(g);
  }

  const auto n = static_cast<Eigen::Index>(len);
  const auto d = static_cast<Eigen::Index>(config_.model_dim);
  const Eigen::Index dh = d / static_cast<Eigen::Index>(config_.heads);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  Matrix<T> x = embedding::embed_indexed<T>(c.ids, c.paths, params.embed, embed_);
  x = norm_forward(x, params.embed_ln_gamma, params.embed_ln_beta, c.embed_ln);
  c.embed_mask = dropout_mask<T>(n, d, config_.dropout, dropout_rng);
  apply_mask(x, c.embed_mask);

  c.columns.resize(config_.layers);
  c.layers.resize(config_.layers);
  for (size_t l = 0; l < config_.layers; ++l) {
    if (config_.long_attention) {
      attention::AttentionPattern pattern;
      pattern.window = config_.window;
      pattern.dilation = config_.dilation(l);
      pattern.global_indices = globals;
      pattern.seq_len = len;
      c.columns[l] = attention::sparse_columns(pattern);
    } else {
      c.columns[l] = attention::sparse_columns(attention::AttentionPattern::dense(len));
    }
    const LayerParameters<T>& p = params.layers[l];
    LayerCache<T>& lc = c.layers[l];

    lc.attn_in = norm_forward(x, p.ln1_gamma, p.ln1_beta, lc.ln1);
    lc.q = affine(lc.attn_in, p.wq, p.bq);
    lc.k = affine(lc.attn_in, p.wk, p.bk);
    lc.v = affine(lc.attn_in, p.wv, p.bv);
    lc.context.resize(n, d);
    lc.head_weights.resize(config_.heads);
    for (size_t h = 0; h < config_.heads; ++h) {
      const Eigen::Index off = static_cast<Eigen::Index>(h) * dh;
      const Matrix<T> qh = lc.q.middleCols(off, dh);
      const Matrix<T> kh = lc.k.middleCols(off, dh);
      const Matrix<T> vh = lc.v.middleCols(off, dh);
      lc.context.middleCols(off, dh) = attention::sparse_attention<T>(
          qh, kh, vh, c.columns[l], scale, &lc.head_weights[h]);
      if (capture && capture->layer == l && capture->head == h) {
        capture->columns = c.columns[l];
        capture->weights.assign(lc.head_weights[h].begin(), lc.head_weights[h].end());
      }
    }
    Matrix<T> o = affine(lc.context, p.wo, p.bo);
    lc.attn_mask = dropout_mask<T>(n, d, config_.dropout, dropout_rng);
    apply_mask(o, lc.attn_mask);
    x += o;

    lc.ffn_in = norm_forward(x, p.ln2_gamma, p.ln2_beta, lc.ln2);
    lc.pre_act = affine(lc.ffn_in, p.w1, p.b1);
    lc.act = gelu(lc.pre_act);
    Matrix<T> f = affine(lc.act, p.w2, p.b2);
    lc.ffn_mask = dropout_mask<T>(n, d, config_.dropout, dropout_rng);
    apply_mask(f, lc.ffn_mask);
    x += f;
  }
  c.final_out = norm_forward(x, params.final_ln_gamma, params.final_ln_beta, c.final_ln);
  return c.final_out.row(0).dot(params.head_weight.row(0)) + params.head_bias(0, 0);
}

template <typename T>
void Encoder<T>::backward(const Parameters<T>& params, const ForwardCache<T>& c,
                          T d_logit, Parameters<T>& g) const {
  const auto n = static_cast<Eigen::Index>(c.ids.size());
  const auto d = static_cast<Eigen::Index>(config_.model_dim);
  const Eigen::Index dh = d / static_cast<Eigen::Index>(config_.heads);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  g.head_weight.row(0) += d_logit * c.final_out.row(0);
  g.head_bias(0, 0) += d_logit;
  Matrix<T> d_final = Matrix<T>::Zero(n, d);
  d_final.row(0) = d_logit * params.head_weight.row(0);
  Matrix<T> dx = norm_backward(d_final, params.final_ln_gamma, c.final_ln,
                               g.final_ln_gamma, g.final_ln_beta);

  for (size_t l = config_.layers; l-- > 0;) {
    const LayerParameters<T>& p = params.layers[l];
    LayerParameters<T>& gl = g.layers[l];
    const LayerCache<T>& lc = c.layers[l];

    Matrix<T> df = dx;
    apply_mask(df, lc.ffn_mask);
    accumulate_affine(lc.act, df, gl.w2, gl.b2);
    const Matrix<T> d_pre = (df * p.w2.transpose()).cwiseProduct(gelu_grad(lc.pre_act));
    accumulate_affine(lc.ffn_in, d_pre, gl.w1, gl.b1);
    dx += norm_backward(Matrix<T>(d_pre * p.w1.transpose()), p.ln2_gamma, lc.ln2,
                        gl.ln2_gamma, gl.ln2_beta);

    Matrix<T> d_o = dx;
    apply_mask(d_o, lc.attn_mask);
    accumulate_affine(lc.context, d_o, gl.wo, gl.bo);
    const Matrix<T> d_context = d_o * p.wo.transpose();
    Matrix<T> dq(n, d), dk(n, d), dv(n, d);
    for (size_t h = 0; h < config_.heads; ++h) {
      const Eigen::Index off = static_cast<Eigen::Index>(h) * dh;
      Matrix<T> dqh, dkh, dvh;
      attention::sparse_attention_backward<T>(
          Matrix<T>(d_context.middleCols(off, dh)), Matrix<T>(lc.q.middleCols(off, dh)),
          Matrix<T>(lc.k.middleCols(off, dh)), Matrix<T>(lc.v.middleCols(off, dh)),
          c.columns[l], std::span<const T>(lc.head_weights[h]), scale, dqh, dkh, dvh);
      dq.middleCols(off, dh) = dqh;
      dk.middleCols(off, dh) = dkh;
      dv.middleCols(off, dh) = dvh;
    }
    accumulate_affine(lc.attn_in, dq, gl.wq, gl.bq);
    accumulate_affine(lc.attn_in, dk, gl.wk, gl.bk);
    accumulate_affine(lc.attn_in, dv, gl.wv, gl.bv);
    const Matrix<T> d_attn_in =
        dq * p.wq.transpose() + dk * p.wk.transpose() + dv * p.wv.transpose();
    dx += norm_backward(d_attn_in, p.ln1_gamma, lc.ln1, gl.ln1_gamma, gl.ln1_beta);
  }

  apply_mask(dx, c.embed_mask);
  dx = norm_backward(dx, params.embed_ln_gamma, c.embed_ln, g.embed_ln_gamma,
                     g.embed_ln_beta);
  for (Eigen::Index i = 0; i < n; ++i) {
    const size_t t = static_cast<size_t>(i);
    g.embed.word.row(c.ids[t]) += dx.row(i);
    g.embed.position.row(i) += dx.row(i);
    g.embed.token_type.row(0) += dx.row(i);
    if (config_.use_ast) {
      for (const embedding::KindWeight& kw :
           embedding::path_weights(c.paths[t], config_.ast_mode)) {
        g.embed.node_kind.row(kw.kind) += static_cast<T>(kw.weight) * dx.row(i);
      }
    }
  }
}

// -------------------------------------------------------------------- model

Model Model::initialize(const ModelConfig& config, const tokenizer::Vocabulary& vocab,
                        const embedding::NodeKindVocab& node_kinds) {
  Model m;
  m.config = config;
  m.node_kinds = node_kinds;
  m.vocab_size = vocab.size();
  m.vocab_hash = vocab.content_hash();
  m.params = Parameters<float>::initialize(config, vocab.size(), node_kinds, config.seed);
  return m;
}

double Model::probability(const EncodedSample& sample, AttentionCapture* capture) const {
  const Encoder<float> encoder(config, node_kinds);
  return objective::sigmoid(encoder.forward(params, sample, nullptr, nullptr, capture));
}

void check_vocabulary(const Model& model, const tokenizer::Vocabulary& vocab) {
  if (vocab.content_hash() != model.vocab_hash) {
    fail(ErrorCode::kIncompatibleArtifact,
         "vocabulary hash " + vocab.content_hash() +
             " does not match the checkpoint's " + model.vocab_hash);
  }
}

template struct Parameters<float>;
template struct Parameters<double>;
template Parameters<double> Parameters<float>::cast<double>() const;
template Parameters<float> Parameters<double>::cast<float>() const;
template class Encoder<float>;
template class Encoder<double>;

}  // namespace vulaste::model
