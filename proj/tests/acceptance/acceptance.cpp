// One line per acceptance criterion; exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "oracles/oracles.hpp"
#include "support/model_support.hpp"
#include "support/temp_dir.hpp"
#include "vulaste/attention.hpp"
#include "vulaste/dataset.hpp"
#include "vulaste/digest.hpp"
#include "vulaste/embedding.hpp"
#include "vulaste/features.hpp"
#include "vulaste/metrics.hpp"
#include "vulaste/model.hpp"
#include "vulaste/objective.hpp"
#include "vulaste/tokenizer.hpp"

using namespace vulaste;

namespace {

// Pinned tolerances and budgets.
constexpr double kRoundTripSeconds = 30;
constexpr double kAttentionRelTol = 1e-6;
constexpr double kAttentionSeconds = 120;
constexpr double kFocalIdentityTol = 1e-9;
constexpr double kFocalHandValue = 2.634e-4;
constexpr double kFocalHandTol = 1e-7;
constexpr double kFocalGradRelTol = 1e-4;
constexpr double kModelGradRelTol = 1e-3;
constexpr double kModelGradSeconds = 300;
constexpr size_t kOverfitStepBudget = 200;

const std::string kFixtures = VULASTE_FIXTURES;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string random_bytes(std::mt19937_64& rng, size_t n) {
  std::string s(n, '\0');
  for (char& c : s) c = static_cast<char>(rng() & 0xFF);
  return s;
}

const embedding::NodeKindVocab& kinds() {
  static const embedding::NodeKindVocab v = embedding::NodeKindVocab::reference_grammar();
  return v;
}

// ---- 1 ---------------------------------------------------------------------

Outcome tokenizer_round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  std::vector<std::string> corpus;
  for (int i = 0; i < 100; ++i) corpus.push_back(random_bytes(rng, 256));
  for (const auto& [src, label] : support::marker_corpus(100, 50, 1)) corpus.push_back(src);
  const tokenizer::Vocabulary vocab = tokenizer::train_bpe(corpus, 1000);
  size_t failures = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::string s = random_bytes(rng, rng() % 4097);
    if (tokenizer::decode(vocab, tokenizer::encode(vocab, s)) != s) ++failures;
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && secs < kRoundTripSeconds,
          "10000 strings, " + std::to_string(vocab.merges().size()) + " merges, " +
              std::to_string(failures) + " mismatches, " + fmt("%.1f s", secs)};
}

// ---- 2 ---------------------------------------------------------------------

Outcome bpe_oracle() {
  std::mt19937_64 rng(2);
  const std::vector<std::string> alphabets{"ab", "abc ", "xy_1.(", "aab b\n;"};
  size_t mismatches = 0, merges = 0;
  for (int c = 0; c < 50; ++c) {
    const std::string& alpha = alphabets[c % alphabets.size()];
    std::vector<std::string> corpus(1 + rng() % 5);
    for (std::string& doc : corpus) {
      for (size_t n = 1 + rng() % 40; n > 0; --n) doc.push_back(alpha[rng() % alpha.size()]);
    }
    const size_t k = rng() % 25;
    const tokenizer::Vocabulary v = tokenizer::train_bpe(corpus, k);
    std::vector<std::pair<std::string, std::string>> got;
    for (const auto& m : v.merges()) got.emplace_back(v.unit(m.left), v.unit(m.right));
    merges += got.size();
    if (got != oracle::bpe_merges(corpus, k)) ++mismatches;
  }
  return {mismatches == 0,
          "50 corpora, " + std::to_string(merges) + " merges compared, " +
              std::to_string(mismatches) + " mismatching corpora"};
}

// ---- 3 ---------------------------------------------------------------------

Outcome attention_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  size_t cases = 0;
  for (size_t len : {1, 7, 32, 128}) {
    for (size_t w : {2, 4, 8, 64}) {
      for (size_t dil : {1, 2, 3}) {
        for (int gmode = 0; gmode < 3; ++gmode) {
          for (uint64_t seed = 0; seed < 20; ++seed) {
            std::mt19937_64 rng(seed * 7919 + len * 31 + w * 7 + dil);
            std::normal_distribution<double> n(0, 1);
            attention::AttentionPattern p;
            p.seq_len = len;
            p.window = w;
            p.dilation = dil;
            if (gmode == 1) p.global_indices = {0};
            if (gmode == 2) {
              for (size_t i = 0; i < len; ++i) {
                if (rng() % 8 == 0) p.global_indices.push_back(i);
              }
            }
            const size_t dh = 16;
            Matrix<double> q(len, dh), k(len, dh), v(len, dh);
            for (Matrix<double>* m : {&q, &k, &v}) {
              for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = n(rng);
            }
            const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
            const Matrix<double> a = attention::sparse_attention(q, k, v, p, scale);
            const Matrix<double> b =
                attention::dense_reference_attention(q, k, v, attention::build_mask(p), scale);
            worst = std::max(worst, (a - b).norm() / std::max(b.norm(), 1e-300));
            ++cases;
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= kAttentionRelTol && secs < kAttentionSeconds,
          std::to_string(cases) + " cases, max rel err " + fmt("%.2e", worst) + ", " +
              fmt("%.1f s", secs)};
}

// ---- 4 ---------------------------------------------------------------------

Outcome ast_path_embedding() {
  const std::vector<std::string> labels{"root", "A", "leaf", "n"};
  embedding::EmbeddingConfig config;
  config.model_dim = 8;
  config.node_kinds = embedding::NodeKindVocab(labels);
  auto tables = embedding::EmbeddingTables<double>::zeros(300, config);
  // Integer-valued vectors keep every sum exact in double precision.
  std::mt19937_64 rng(4);
  for (Eigen::Index i = 0; i < tables.node_kind.size(); ++i) {
    tables.node_kind.data()[i] = static_cast<double>(static_cast<int>(rng() % 21) - 10);
  }
  const auto& vocab = config.node_kinds;
  auto vec = [&](const std::string& k) {
    return Eigen::RowVectorXd(tables.node_kind.row(vocab.index(k)));
  };
  auto walk = [&](const syntax::AstPath& p, bool literal) {
    std::vector<Eigen::RowVectorXd> rows;
    for (const std::string& k : p.kinds) rows.push_back(vec(k));
    return oracle::path_walk(rows, literal);
  };
  using embedding::AstMode;
  bool ok = true;
  size_t checks = 0;
  const syntax::AstPath root{{"root"}}, three{{"root", "A", "leaf"}};
  const Eigen::RowVectorXd zero = Eigen::RowVectorXd::Zero(8);
  const Eigen::RowVectorXd literal3 = vec("root") + 2 * vec("A") + vec("leaf");
  const Eigen::RowVectorXd dedup3 = vec("root") + vec("A") + vec("leaf");
  const auto lit = [&](const syntax::AstPath& p) {
    return Eigen::RowVectorXd(embedding::ast_path_embedding(p, tables, vocab, AstMode::kLiteralEdgeSum));
  };
  const auto ded = [&](const syntax::AstPath& p) {
    return Eigen::RowVectorXd(
        embedding::ast_path_embedding(p, tables, vocab, AstMode::kDeduplicatedPathSum));
  };
  ok &= lit(root) == zero && walk(root, true) == zero;
  ok &= lit(three) == literal3 && walk(three, true) == literal3;
  ok &= ded(three) == dedup3 && walk(three, false) == dedup3;
  checks += 3;
  for (size_t k = 1; k <= 10; ++k) {
    auto uniform = tables;
    for (Eigen::Index r = 0; r < uniform.node_kind.rows(); ++r) {
      uniform.node_kind.row(r) = tables.node_kind.row(vocab.index("n"));
    }
    const syntax::AstPath p{std::vector<std::string>(k, "n")};
    const Eigen::RowVectorXd want = static_cast<double>(2 * k - 2) * vec("n");
    ok &= Eigen::RowVectorXd(embedding::ast_path_embedding(p, uniform, vocab,
                                                           AstMode::kLiteralEdgeSum)) == want;
    ++checks;
  }
  // Random paths against the walk oracle.
  for (int i = 0; i < 500; ++i) {
    syntax::AstPath p;
    for (size_t n = 1 + rng() % 12; n > 0; --n) p.kinds.push_back(labels[rng() % labels.size()]);
    ok &= lit(p) == walk(p, true) && ded(p) == walk(p, false);
    ++checks;
  }
  return {ok, std::to_string(checks) + " exact comparisons (worked examples, depth 1..10 identity, "
                                       "500 random paths)"};
}

// ---- 5 ---------------------------------------------------------------------

Outcome focal_loss() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> n(0, 2);
  double identity_err = 0;
  for (int b = 0; b < 100; ++b) {
    std::vector<double> p(1 + rng() % 32);
    std::vector<int> y(p.size());
    for (size_t i = 0; i < p.size(); ++i) {
      p[i] = u(rng);
      y[i] = static_cast<int>(rng() % 2);
    }
    identity_err = std::max(identity_err, std::abs(objective::focal_loss(p, y, {0.5, 0.0}) -
                                                   0.5 * objective::cross_entropy(p, y)));
  }
  const double hand = objective::focal_loss(std::vector<double>{0.9}, std::vector<int>{1}, {0.25, 2.0});
  // Relative error of each batch gradient vector; tiny entries are dominated
  // by central-difference roundoff, so the element-wise maximum is reported
  // but not judged.
  double grad_err = 0, elementwise = 0;
  for (int b = 0; b < 100; ++b) {
    std::vector<double> z(1 + rng() % 16);
    std::vector<int> y(z.size());
    for (size_t i = 0; i < z.size(); ++i) {
      z[i] = n(rng);
      y[i] = static_cast<int>(rng() % 2);
    }
    const objective::FocalConfig cfg{0.05 + 0.9 * u(rng), 4 * u(rng)};
    const auto lg = objective::loss_from_logits(z, y, objective::LossKind::kFocal, cfg);
    Eigen::VectorXd a(z.size()), fd(z.size());
    for (size_t i = 0; i < z.size(); ++i) {
      const double h = 1e-5, keep = z[i];
      z[i] = keep + h;
      const double up = objective::loss_from_logits(z, y, objective::LossKind::kFocal, cfg).loss;
      z[i] = keep - h;
      const double down = objective::loss_from_logits(z, y, objective::LossKind::kFocal, cfg).loss;
      z[i] = keep;
      a[i] = lg.grad[i];
      fd[i] = (up - down) / (2 * h);
      elementwise = std::max(elementwise, std::abs(a[i] - fd[i]) / std::max(std::abs(fd[i]), 1e-8));
    }
    grad_err = std::max(grad_err, (a - fd).norm() / std::max({a.norm(), fd.norm(), 1e-12}));
  }
  const bool ok = identity_err <= kFocalIdentityTol &&
                  std::abs(hand - kFocalHandValue) <= kFocalHandTol && grad_err <= kFocalGradRelTol;
  return {ok, "(a) max |FL - CE/2| " + fmt("%.1e", identity_err) + ", (b) FL(0.9) " +
                  fmt("%.4e", hand) + ", (c) max grad rel err " + fmt("%.1e", grad_err) +
                  " (element-wise " + fmt("%.1e", elementwise) + ")"};
}

// ---- 6 ---------------------------------------------------------------------

Outcome model_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  model::ModelConfig c = support::tiny_config();  // 2 layers, 4 heads, d = 16
  c.ffn_dim = 64;
  c.max_positions = 32;
  std::mt19937_64 rng(6);
  auto params = model::Parameters<double>::initialize(c, 260, kinds(), 6);
  support::jitter(params, rng, 0.3);
  const model::EncodedSample s = support::random_sample(rng, 32, 260, kinds().size());
  double worst = 0;
  std::string worst_name;
  size_t tensors = 0;
  for (int label : {0, 1}) {
    for (const auto& t : support::gradient_check(c, kinds(), params, s, label)) {
      ++tensors;
      if (t.relative_error >= worst) {
        worst = t.relative_error;
        worst_name = t.name;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= kModelGradRelTol && secs < kModelGradSeconds,
          std::to_string(tensors) + " tensor checks, max rel err " + fmt("%.1e", worst) + " (" +
              worst_name + "), " + fmt("%.1f s", secs)};
}

// ---- 7 ---------------------------------------------------------------------

std::vector<model::LabeledSample> featurize_marker(const tokenizer::Vocabulary& vocab,
                                                   size_t n, size_t positives, uint64_t seed,
                                                   size_t max_positions) {
  static const syntax::ParserRegistry registry = syntax::ParserRegistry::builtin();
  const model::Featurizer f(vocab, registry, kinds(), max_positions);
  std::vector<model::LabeledSample> out;
  size_t i = 0;
  for (const auto& [src, label] : support::marker_corpus(n, positives, seed)) {
    out.push_back({"s" + std::to_string(seed) + "-" + std::to_string(i++), f.encode(src, "c"), label});
  }
  return out;
}

model::ModelConfig small_model() {
  model::ModelConfig c;
  c.layers = 2;
  c.heads = 4;
  c.model_dim = 32;
  c.ffn_dim = 64;
  c.window = 16;
  c.max_positions = 128;
  c.dropout = 0.1;
  return c;
}

double recall_on(const model::Model& m, const tokenizer::Vocabulary& vocab,
                 std::span<const model::LabeledSample> data) {
  std::vector<eval::RankedEntry> entries;
  std::map<std::string, int> labels;
  for (const auto& s : data) labels[s.id] = s.label;
  for (const auto& p : model::predict(m, vocab, data)) {
    entries.push_back({p.id, p.probability, labels.at(p.id)});
  }
  return eval::recall_f1(eval::rank(std::move(entries)), 0.5).recall;
}

Outcome overfit_and_focal_direction() {
  std::vector<std::string> corpus;
  for (const auto& [src, label] : support::marker_corpus(200, 100, 99)) corpus.push_back(src);
  const tokenizer::Vocabulary vocab = tokenizer::train_bpe(corpus, 300);

  // (a) 32 samples, label = marker presence.
  const auto small = featurize_marker(vocab, 32, 16, 7, 128);
  model::TrainConfig tc;
  tc.batch_size = 4;
  tc.epochs = kOverfitStepBudget / tc.batch_size * tc.batch_size / 32;  // 25 epochs of 8 steps
  tc.learning_rate = 1e-3;
  tc.max_steps = kOverfitStepBudget;
  const model::TrainResult fit = model::train(small_model(), tc, vocab, kinds(), small, {});
  size_t reached = 0;
  for (const auto& e : fit.epochs) {
    if (e.train_accuracy == 1.0) {
      reached = e.step;
      break;
    }
  }
  const bool overfit = reached > 0 && reached <= kOverfitStepBudget;

  // (b) 9:1 imbalance, focal versus cross-entropy, same seeds and budgets.
  const auto train_set = featurize_marker(vocab, 200, 20, 8, 128);
  const auto held_out = featurize_marker(vocab, 200, 20, 9, 128);
  model::TrainConfig tb;
  tb.batch_size = 8;
  tb.epochs = 15;
  tb.learning_rate = 1e-3;
  std::vector<double> focal, ce;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    for (auto kind : {objective::LossKind::kFocal, objective::LossKind::kCrossEntropy}) {
      model::ModelConfig c = small_model();
      c.seed = seed;
      c.loss = kind;
      const model::TrainResult r = model::train(c, tb, vocab, kinds(), train_set, {});
      (kind == objective::LossKind::kFocal ? focal : ce).push_back(recall_on(r.best, vocab, held_out));
    }
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double mf = median(focal), mc = median(ce);
  auto list = [](const std::vector<double>& v) {
    std::string out;
    for (double x : v) out += (out.empty() ? "" : " ") + fmt("%.2f", x);
    return out;
  };
  return {overfit && mf >= mc,
          "(a) 100% train accuracy at step " + std::to_string(reached) + " (budget " +
              std::to_string(kOverfitStepBudget) + "), (b) median recall focal " +
              fmt("%.3f", mf) + " [" + list(focal) + "] vs cross-entropy " + fmt("%.3f", mc) + " [" +
              list(ce) + "]"};
}

// ---- 8 ---------------------------------------------------------------------

Outcome dataset_golden() {
  const dataset::AdvisoryLoad load = dataset::load_advisories(kFixtures + "/dataset/advisories.jsonl");
  dataset::BuildOptions options;
  options.languages = {"c", "cpp", "java", "python", "go"};
  const auto registry = syntax::ParserRegistry::builtin();
  auto build = [&] {
    std::ostringstream out;
    const auto r = dataset::build_dataset(load, kFixtures + "/dataset/patches", options, registry);
    dataset::write_samples(out, r.samples);
    return std::make_pair(r, out.str());
  };
  const auto [result, text] = build();
  const auto [again, text2] = build();

  struct Want {
    const char* function;
    dataset::Side side;
    bool vulnerable;
  };
  const std::vector<Want> want{{"copy", dataset::Side::kPre, true},
                               {"len", dataset::Side::kPre, false},
                               {"copy", dataset::Side::kPost, false},
                               {"extra", dataset::Side::kPost, false},
                               {"check", dataset::Side::kPre, true},
                               {"other", dataset::Side::kPre, false},
                               {"check", dataset::Side::kPost, false}};
  bool labels_ok = result.samples.size() == want.size();
  for (size_t i = 0; labels_ok && i < want.size(); ++i) {
    const auto& s = result.samples[i];
    labels_ok = s.provenance[0].function == want[i].function &&
                s.provenance[0].side == want[i].side && s.vulnerable == want[i].vulnerable;
  }
  bool no_patchless = true;
  for (const auto& s : result.samples) {
    for (const auto& p : s.provenance) no_patchless &= p.advisory != "GHSA-cccc-0003";
  }
  const bool golden = text == read_file(kFixtures + "/golden/dataset.jsonl");
  const bool ok = labels_ok && no_patchless && result.report.excluded_without_patch == 1 &&
                  golden && text == text2;
  return {ok, std::to_string(result.samples.size()) + " samples (" +
                  std::to_string(result.report.vulnerable) + " vulnerable), patchless excluded " +
                  std::to_string(result.report.excluded_without_patch) + ", golden " +
                  (golden ? "match" : "MISMATCH") + ", rerun " +
                  (text == text2 ? "identical" : "DIFFERENT")};
}

// ---- 9 ---------------------------------------------------------------------

Outcome metrics_oracle() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  size_t mismatches = 0, checks = 0;
  for (int d = 0; d < 100; ++d) {
    const size_t n = 1 + rng() % 1000;
    std::vector<double> p(n);
    std::vector<int> y(n);
    std::vector<std::string> ids(n);
    std::vector<eval::RankedEntry> entries;
    const double pos_rate = u(rng);
    const bool coarse = d % 2 == 0;
    for (size_t i = 0; i < n; ++i) {
      p[i] = coarse ? std::round(u(rng) * 10) / 10 : u(rng);
      y[i] = u(rng) < pos_rate ? 1 : 0;
      ids[i] = "id" + std::to_string(rng() % 1000000) + "-" + std::to_string(i);
      entries.push_back({ids[i], p[i], y[i]});
    }
    const auto ranked = eval::rank(entries);
    size_t positives = 0;
    for (int v : y) positives += static_cast<size_t>(v);
    size_t previous = 0;
    for (size_t k = 1; k <= n; k += 1 + k / 3) {
      const size_t h = eval::hits_at_k(ranked, k);
      mismatches += h != oracle::hits_at_k(ids, p, y, k);
      mismatches += h < previous;
      previous = h;
      ++checks;
    }
    mismatches += eval::hits_at_k(ranked, n) != positives;
    const double threshold = coarse ? 0.5 : u(rng);
    const oracle::Confusion c = oracle::confusion(p, y, threshold);
    const double recall = c.tp + c.fn ? double(c.tp) / double(c.tp + c.fn) : 0.0;
    const double precision = c.tp + c.fp ? double(c.tp) / double(c.tp + c.fp) : 0.0;
    const double f1 = recall + precision > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    const eval::Classification got = eval::recall_f1(ranked, threshold);
    mismatches += got.recall != recall || got.precision != precision || got.f1 != f1;
    if (positives > 0) mismatches += eval::recall_f1(ranked, 0.0).recall != 1.0;
    checks += 3;
  }
  return {mismatches == 0, "100 datasets, " + std::to_string(checks) + " checks, " +
                               std::to_string(mismatches) + " mismatches"};
}

// ---- 10 --------------------------------------------------------------------

Outcome ablation_wiring() {
  support::TempDir dir;
  std::vector<dataset::SampleRecord> samples;
  size_t i = 0;
  for (const auto& [src, label] : support::marker_corpus(20, 10, 10)) {
    dataset::SampleRecord s;
    s.language = "c";
    s.source = src;
    s.id = dataset::sample_id("c", src);
    s.vulnerable = label == 1;
    s.provenance.push_back({"ADV-" + std::to_string(i++), "c", "a.c", "f", dataset::Side::kPre, 1, 5});
    samples.push_back(std::move(s));
  }
  std::ostringstream text;
  dataset::write_samples(text, samples);
  write_file(dir.file("d.jsonl"), text.str());
  write_file(dir.file("v.txt"), tokenizer::Vocabulary().serialize());

  std::ostringstream sink;
  auto train = [&](const std::string& out, std::vector<std::string> extra) {
    std::vector<std::string> args{"train",  "--dataset",     dir.file("d.jsonl"), "--vocab",
                                  dir.file("v.txt"), "--output", dir.file(out),   "--layers",
                                  "1",      "--heads",       "2",                 "--model-dim",
                                  "8",      "--ffn-dim",     "16",                "--window",
                                  "8",      "--max-positions", "128",             "--max-steps",
                                  "1"};
    args.insert(args.end(), extra.begin(), extra.end());
    return cli::run(args, sink, sink) == 0;
  };
  bool ran = train("base.ckpt", {});
  ran &= train("noast.ckpt", {"--no-ast"});
  ran &= train("self.ckpt", {"--self-attention"});
  ran &= train("ce.ckpt", {"--loss", "cross-entropy"});
  if (!ran) return {false, "a training run failed: " + sink.str()};

  const model::Model base = model::load_checkpoint(dir.file("base.ckpt"));
  const model::Model noast = model::load_checkpoint(dir.file("noast.ckpt"));
  const model::Model self = model::load_checkpoint(dir.file("self.ckpt"));
  const model::Model ce = model::load_checkpoint(dir.file("ce.ckpt"));

  const size_t expected = base.node_kinds.size() * base.config.model_dim;
  const bool count_ok = base.parameter_count() - noast.parameter_count() == expected;

  std::mt19937_64 rng(10);
  const model::EncodedSample s = support::random_sample(rng, 40, 260, kinds().size());
  bool all_allowed = true;
  for (size_t layer = 0; layer < self.config.layers; ++layer) {
    model::AttentionCapture cap;
    cap.layer = layer;
    self.probability(s, &cap);
    for (size_t r = 0; r < cap.columns.rows(); ++r) all_allowed &= cap.columns.row(r).size() == 40;
  }

  const std::vector<double> z{1.3, -0.4, 2.2, -2.0};
  const std::vector<int> y{1, 1, 0, 0};
  std::vector<double> p_true;
  for (size_t k = 0; k < z.size(); ++k) {
    const double p = objective::sigmoid(z[k]);
    p_true.push_back(y[k] == 1 ? p : 1 - p);
  }
  const double ce_loss = objective::loss_from_logits(z, y, ce.config.loss, ce.config.focal).loss;
  const double base_loss = objective::loss_from_logits(z, y, base.config.loss, base.config.focal).loss;
  const bool loss_ok = std::abs(ce_loss - objective::cross_entropy(p_true, y)) <= 1e-12 &&
                       std::abs(base_loss - objective::focal_loss(p_true, y, base.config.focal)) <= 1e-12 &&
                       std::abs(ce_loss - base_loss) > 1e-3;
  return {count_ok && all_allowed && loss_ok,
          "parameters " + std::to_string(base.parameter_count()) + " - " +
              std::to_string(noast.parameter_count()) + " = " +
              std::to_string(base.parameter_count() - noast.parameter_count()) + " (expected " +
              std::to_string(expected) + "), self-attention all-allowed " +
              (all_allowed ? "yes" : "no") + ", fixed-batch loss CE " + fmt("%.6f", ce_loss) +
              " vs focal " + fmt("%.6f", base_loss)};
}

// ---- 11 --------------------------------------------------------------------

size_t code_points(const std::string& s) {
  size_t n = 0;
  for (size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    i += c < 0x80 ? 1 : c >> 5 == 0x6 ? 2 : c >> 4 == 0xE ? 3 : c >> 3 == 0x1E ? 4 : 1;
    ++n;
  }
  return n;
}

Outcome length_table() {
  const std::vector<std::string> labels{"[0.0, 512.0)", "[512.0, 1024.0)", "[1024.0, 2048.0)",
                                        "[2048.0, 5096.0)", "[5096.0, inf)"};
  const std::vector<double> edges{0, 512, 1024, 2048, 5096};
  auto bucket_of = [&](size_t len) {
    size_t b = 0;
    for (size_t i = 0; i < edges.size(); ++i) {
      if (static_cast<double>(len) >= edges[i]) b = i;
    }
    return b;
  };
  auto sample = [](std::string src) {
    dataset::SampleRecord s;
    s.language = "c";
    s.source = std::move(src);
    return s;
  };
  std::vector<dataset::SampleRecord> samples = dataset::load_samples(kFixtures + "/golden/dataset.jsonl");
  for (size_t len : {0, 511, 512, 1023, 1024, 2047, 2048, 5095, 5096, 12000}) {
    samples.push_back(sample(std::string(len, 'x')));
  }
  std::string multibyte;
  for (int i = 0; i < 300; ++i) multibyte += "\xc3\xa9";  // 600 bytes, 300 characters
  samples.push_back(sample(multibyte));

  std::array<size_t, 5> want{};
  for (const auto& s : samples) ++want[bucket_of(code_points(s.source))];
  const dataset::LengthStats stats = dataset::length_stats(samples);
  const std::string table = dataset::format_length_table(stats);
  bool labels_ok = table.rfind("Length", 0) == 0;
  size_t pos = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    const size_t at = table.find("\n" + labels[i] + " ", pos);
    labels_ok &= at != std::string::npos;
    if (at != std::string::npos) pos = at + 1;
  }
  std::string counts;
  for (size_t c : stats.counts) counts += (counts.empty() ? "" : ",") + std::to_string(c);
  return {stats.counts == want && labels_ok,
          "counts (" + counts + ") over " + std::to_string(samples.size()) + " samples, labels " +
              (labels_ok ? "ok" : "WRONG")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"tokenizer round-trip", tokenizer_round_trip},
      {"BPE training oracle", bpe_oracle},
      {"attention oracle equivalence", attention_oracle},
      {"AST-path embedding", ast_path_embedding},
      {"focal loss", focal_loss},
      {"full-model gradient check", model_gradients},
      {"overfit sanity and focal recall direction", overfit_and_focal_direction},
      {"dataset builder golden", dataset_golden},
      {"metrics oracle", metrics_oracle},
      {"ablation wiring", ablation_wiring},
      {"length statistics table", length_table},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("criterion %2zu: %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL",
                criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
