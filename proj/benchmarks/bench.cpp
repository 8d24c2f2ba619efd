#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "vulaste/attention.hpp"
#include "vulaste/features.hpp"
#include "vulaste/model.hpp"
#include "vulaste/tokenizer.hpp"

using namespace vulaste;

namespace {

std::vector<std::string> code_corpus(size_t docs) {
  static const std::vector<std::string> names{"count", "index", "buf", "len", "node", "value"};
  std::mt19937_64 rng(1);
  std::vector<std::string> out;
  for (size_t d = 0; d < docs; ++d) {
    std::string s = "int f" + std::to_string(d) + "(int a) {\n";
    for (int line = 0; line < 20; ++line) {
      s += "  int " + names[rng() % names.size()] + " = " + names[rng() % names.size()] + " + " +
           std::to_string(rng() % 1000) + ";\n";
    }
    out.push_back(s + "  return a;\n}\n");
  }
  return out;
}

void BM_TrainBpe(benchmark::State& state) {
  const auto corpus = code_corpus(200);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tokenizer::train_bpe(corpus, static_cast<size_t>(state.range(0))));
  }
}
BENCHMARK(BM_TrainBpe)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_Encode(benchmark::State& state) {
  const auto corpus = code_corpus(200);
  const auto vocab = tokenizer::train_bpe(corpus, 500);
  std::string text;
  for (const auto& doc : corpus) text += doc;
  for (auto _ : state) benchmark::DoNotOptimize(tokenizer::encode(vocab, text));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Encode)->Unit(benchmark::kMillisecond);

struct Qkv {
  Matrix<float> q, k, v;
  explicit Qkv(size_t len, size_t dh = 64) : q(len, dh), k(len, dh), v(len, dh) {
    std::mt19937_64 rng(2);
    std::normal_distribution<float> n(0, 1);
    for (Matrix<float>* m : {&q, &k, &v}) {
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = n(rng);
    }
  }
};

attention::AttentionPattern pattern(size_t len) {
  attention::AttentionPattern p;
  p.seq_len = len;
  p.window = 64;
  p.dilation = 1;
  p.global_indices = {0};
  return p;
}

void BM_SparseAttention(benchmark::State& state) {
  const size_t len = static_cast<size_t>(state.range(0));
  const Qkv x(len);
  const auto columns = attention::sparse_columns(pattern(len));
  for (auto _ : state) {
    benchmark::DoNotOptimize(attention::sparse_attention(x.q, x.k, x.v, columns, 0.125f));
  }
}
BENCHMARK(BM_SparseAttention)->RangeMultiplier(2)->Range(128, 1024)->Unit(benchmark::kMillisecond);

void BM_DenseAttention(benchmark::State& state) {
  const size_t len = static_cast<size_t>(state.range(0));
  const Qkv x(len);
  const auto mask = attention::build_mask(pattern(len));
  for (auto _ : state) {
    benchmark::DoNotOptimize(attention::dense_reference_attention(x.q, x.k, x.v, mask, 0.125f));
  }
}
BENCHMARK(BM_DenseAttention)->RangeMultiplier(2)->Range(128, 1024)->Unit(benchmark::kMillisecond);

void BM_ModelForward(benchmark::State& state) {
  const auto corpus = code_corpus(50);
  const auto vocab = tokenizer::train_bpe(corpus, 300);
  const auto kinds = embedding::NodeKindVocab::reference_grammar();
  const auto registry = syntax::ParserRegistry::builtin();
  model::ModelConfig config;
  config.layers = 2;
  config.heads = 4;
  config.model_dim = 64;
  config.ffn_dim = 128;
  config.window = 32;
  config.max_positions = static_cast<size_t>(state.range(0));
  const model::Model m = model::Model::initialize(config, vocab, kinds);
  const model::Featurizer f(vocab, registry, kinds, config.max_positions);
  std::string source;
  for (const auto& doc : corpus) source += doc;
  const model::EncodedSample sample = f.encode(source, "c");
  for (auto _ : state) benchmark::DoNotOptimize(m.probability(sample));
}
BENCHMARK(BM_ModelForward)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
