#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vulaste/dataset.hpp"
#include "vulaste/digest.hpp"
#include "vulaste/features.hpp"
#include "vulaste/metrics.hpp"
#include "vulaste/model.hpp"
#include "vulaste/tokenizer.hpp"

namespace vulaste::cli {
namespace {

struct Globals {
  uint64_t seed = 1;
  int verbosity = 0;
};

struct BuildDatasetArgs {
  std::string advisories;
  std::string patches;
  std::vector<std::string> languages;
  std::string output;
  std::string stats;
  bool whole_file = false;
};

struct TokenizerArgs {
  std::string dataset;
  size_t vocab_size = 8192;
  std::string output;
  unsigned threads = 1;
};

struct SplitArgs {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
  std::string unit = "advisory";
};

struct TrainArgs {
  std::string dataset;
  std::string vocab;
  std::string output;
  std::string metrics;
  SplitArgs split;
  model::ModelConfig model;
  model::TrainConfig train;
  bool no_ast = false;
  bool self_attention = false;
  std::string loss = "focal";
  std::string ast_mode = "literal-edge-sum";
};

struct EvaluateArgs {
  std::string checkpoint;
  std::string vocab;
  std::string dataset;
  std::string partition = "test";
  SplitArgs split;
  std::vector<size_t> ks = eval::kDefaultKs;
  double threshold = eval::kDefaultThreshold;
  std::string json;
  unsigned threads = 1;
};

struct ExplainArgs {
  std::string checkpoint;
  std::string vocab;
  std::string source;
  std::string language;
  size_t layer = 0;
  size_t head = 0;
  std::string output;
};

void write_text(const std::string& path, const std::string& text) {
  write_file(path, text);
}

dataset::SplitSpec split_spec(const SplitArgs& a, uint64_t seed) {
  dataset::SplitSpec s;
  s.train = a.train;
  s.validation = a.validation;
  s.test = a.test;
  s.seed = seed;
  if (a.unit == "advisory") {
    s.unit = dataset::SplitUnit::kAdvisory;
  } else if (a.unit == "sample") {
    s.unit = dataset::SplitUnit::kSample;
  } else {
    fail(ErrorCode::kInvalidInput, "split unit must be 'advisory' or 'sample'");
  }
  return s;
}

void add_split_options(CLI::App* cmd, SplitArgs& a) {
  cmd->add_option("--train-ratio", a.train, "Fraction of split units used for training");
  cmd->add_option("--validation-ratio", a.validation, "Fraction used for validation");
  cmd->add_option("--test-ratio", a.test, "Fraction used for testing");
  cmd->add_option("--split-unit", a.unit, "Split unit: advisory or sample")
      ->check(CLI::IsMember({"advisory", "sample"}));
}

std::vector<model::LabeledSample> featurize(const model::Featurizer& featurizer,
                                            std::span<const dataset::SampleRecord> samples) {
  std::vector<model::LabeledSample> out;
  out.reserve(samples.size());
  for (const dataset::SampleRecord& s : samples) {
    out.push_back({s.id, featurizer.encode(s.source, s.language), s.vulnerable ? 1 : 0});
  }
  return out;
}

int cmd_build_dataset(const BuildDatasetArgs& a, const Globals& g, std::ostream& out,
                      std::ostream& err) {
  dataset::BuildOptions options;
  for (const std::string& l : a.languages) {
    if (!l.empty()) options.languages.insert(l);
  }
  if (options.languages.empty()) {
    fail(ErrorCode::kInvalidInput, "--languages needs at least one language");
  }
  options.label.whole_file = a.whole_file;
  const dataset::AdvisoryLoad load = dataset::load_advisories(a.advisories);
  const dataset::BuildResult result = dataset::build_dataset(
      load, a.patches, options, syntax::ParserRegistry::builtin());

  std::ostringstream text;
  dataset::write_samples(text, result.samples);
  write_text(a.output, text.str());

  const dataset::BuildReport& r = result.report;
  out << "advisories with patches: " << r.advisories << '\n'
      << "excluded without patch: " << r.excluded_without_patch << '\n'
      << "duplicate advisory ids: " << r.duplicate_ids << '\n'
      << "missing patch files: " << r.missing_patches << '\n'
      << "files kept: " << r.files_kept << '\n'
      << "files filtered (non-code or non-target): " << r.files_filtered << '\n'
      << "files without a parser: " << r.files_unsupported << '\n'
      << "unreconstructable: " << r.unreconstructable << '\n'
      << "samples: " << r.samples << " (vulnerable " << r.vulnerable << ", non-vulnerable "
      << r.non_vulnerable << ")\n"
      << "label conflicts: " << r.label_conflicts << '\n';
  const std::string table =
      dataset::format_length_table(dataset::length_stats(result.samples));
  out << table;
  if (!a.stats.empty()) write_text(a.stats, table);
  if (g.verbosity > 0) {
    for (const std::string& w : r.warnings) err << "warning: " << w << '\n';
  }
  return kExitOk;
}

int cmd_train_tokenizer(const TokenizerArgs& a, std::ostream& out) {
  const size_t reserved = tokenizer::Vocabulary::kBaseSize + tokenizer::Vocabulary::kNumSpecials;
  if (a.vocab_size < reserved) {
    fail(ErrorCode::kInvalidInput, "--vocab-size must be at least " + std::to_string(reserved));
  }
  std::vector<std::string> corpus;
  for (dataset::SampleRecord& s : dataset::load_samples(a.dataset)) {
    corpus.push_back(std::move(s.source));
  }
  if (corpus.empty()) fail(ErrorCode::kInvalidDataset, "the dataset has no samples");
  tokenizer::TrainOptions options;
  options.threads = std::max(1u, a.threads);
  const tokenizer::Vocabulary vocab =
      tokenizer::train_bpe(corpus, a.vocab_size - reserved, options);
  write_text(a.output, vocab.serialize());
  out << "vocabulary: " << vocab.size() << " units (" << vocab.merges().size()
      << " merges), hash " << vocab.content_hash() << '\n';
  return kExitOk;
}

tokenizer::Vocabulary load_vocab(const std::string& path) {
  return tokenizer::Vocabulary::parse(read_file(path));
}

int cmd_train(TrainArgs a, const Globals& g, std::ostream& out) {
  a.model.use_ast = !a.no_ast;
  a.model.long_attention = !a.self_attention;
  a.model.loss = objective::loss_kind_from_string(a.loss);
  a.model.ast_mode = embedding::ast_mode_from_string(a.ast_mode);
  a.model.seed = g.seed;
  a.model.validate();

  const tokenizer::Vocabulary vocab = load_vocab(a.vocab);
  const std::vector<dataset::SampleRecord> samples = dataset::load_samples(a.dataset);
  const dataset::Split parts = dataset::split(samples, split_spec(a.split, g.seed));
  const syntax::ParserRegistry registry = syntax::ParserRegistry::builtin();
  const embedding::NodeKindVocab node_kinds = embedding::NodeKindVocab::reference_grammar();
  const model::Featurizer featurizer(vocab, registry, node_kinds, a.model.max_positions);
  const auto train_set = featurize(featurizer, parts.train);
  const auto val_set = featurize(featurizer, parts.validation);

  nlohmann::json effective{{"model", a.model}, {"train", a.train}};
  out << "model/train configuration: " << effective.dump() << '\n';
  out << "train " << train_set.size() << ", validation " << val_set.size() << ", test "
      << parts.test.size() << " samples\n";

  std::ofstream metrics(a.metrics.empty() ? a.output + ".metrics.jsonl" : a.metrics,
                        std::ios::trunc);
  if (!metrics) fail(ErrorCode::kIo, "cannot write the metrics log");
  model::TrainHooks hooks;
  hooks.metrics_log = &metrics;
  const model::TrainResult result =
      model::train(a.model, a.train, vocab, node_kinds, train_set, val_set, hooks);
  model::save_checkpoint(result.best, a.output);
  for (const model::EpochMetrics& m : result.epochs) {
    out << "epoch " << m.epoch << " step " << m.step << " loss " << m.train_loss
        << " train_acc " << m.train_accuracy << " val_f1 " << m.val_f1 << '\n';
  }
  out << "parameters: " << result.best.parameter_count() << ", checkpoint " << a.output
      << '\n';
  return kExitOk;
}

int cmd_evaluate(const EvaluateArgs& a, const Globals& g, std::ostream& out) {
  const tokenizer::Vocabulary vocab = load_vocab(a.vocab);
  const model::Model m = model::load_checkpoint(a.checkpoint);
  model::check_vocabulary(m, vocab);
  const std::vector<dataset::SampleRecord> samples = dataset::load_samples(a.dataset);
  std::vector<dataset::SampleRecord> chosen;
  if (a.partition == "all") {
    chosen = samples;
  } else {
    dataset::Split parts = dataset::split(samples, split_spec(a.split, g.seed));
    chosen = a.partition == "train"        ? std::move(parts.train)
             : a.partition == "validation" ? std::move(parts.validation)
                                           : std::move(parts.test);
  }
  const syntax::ParserRegistry registry = syntax::ParserRegistry::builtin();
  const model::Featurizer featurizer(vocab, registry, m.node_kinds, m.config.max_positions);
  const auto labeled = featurize(featurizer, chosen);
  std::map<std::string, int> labels;
  for (const model::LabeledSample& s : labeled) labels[s.id] = s.label;

  std::vector<eval::RankedEntry> entries;
  for (const model::Prediction& p : model::predict(m, vocab, labeled, a.threads)) {
    entries.push_back({p.id, p.probability, labels.at(p.id)});
  }
  const eval::MetricsReport report =
      eval::report(eval::rank(std::move(entries)), a.ks, a.threshold);
  out << eval::format_table(report);
  if (!a.json.empty()) write_text(a.json, nlohmann::json(report).dump(2) + "\n");
  return kExitOk;
}

int cmd_explain(const ExplainArgs& a, std::ostream& out) {
  const tokenizer::Vocabulary vocab = load_vocab(a.vocab);
  const model::Model m = model::load_checkpoint(a.checkpoint);
  model::check_vocabulary(m, vocab);
  const std::string source = read_file(a.source);
  const syntax::ParserRegistry registry = syntax::ParserRegistry::builtin();
  const model::Featurizer featurizer(vocab, registry, m.node_kinds, m.config.max_positions);
  const model::EncodedSample sample = featurizer.encode(source, a.language);

  model::AttentionCapture capture;
  capture.layer = a.layer;
  capture.head = a.head;
  const double p = m.probability(sample, &capture);
  const auto triples = attention::export_weights<double>(capture.columns, capture.weights);

  std::vector<std::string> tokens;
  for (tokenizer::TokenId id : featurizer.tokens(source).ids) {
    if (id == tokenizer::Vocabulary::kSpecials.bos) {
      tokens.emplace_back("<bos>");
    } else if (id == tokenizer::Vocabulary::kSpecials.eos) {
      tokens.emplace_back("<eos>");
    } else {
      tokens.push_back(vocab.unit(id));
    }
  }
  std::ofstream file(a.output, std::ios::trunc);
  if (!file) fail(ErrorCode::kIo, "cannot write " + a.output);
  eval::export_heatmap(triples, tokens, file);
  out << "probability " << p << ", " << tokens.size() << " tokens, layer " << a.layer
      << " head " << a.head << " -> " << a.output << '\n';
  return kExitOk;
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput:
    case ErrorCode::kOutOfRange:
    case ErrorCode::kUnsupportedLanguage:
      return kExitUsage;
    case ErrorCode::kParse:
    case ErrorCode::kUnreconstructable:
    case ErrorCode::kInvalidDataset:
    case ErrorCode::kInvalidSplit:
    case ErrorCode::kIncompatibleArtifact:
    case ErrorCode::kIo:
      return kExitData;
  }
  return kExitInternal;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Function-level vulnerability detection with AST-aware sparse attention",
               "vulaste"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML configuration file (flags take precedence)");
  app.allow_config_extras(CLI::config_extras_mode::error);

  Globals g;
  app.add_option("--seed", g.seed, "Seed for initialization, shuffling and splitting");
  app.add_flag("-v,--verbose", g.verbosity, "Print warnings and details");

  BuildDatasetArgs bd;
  auto* build = app.add_subcommand("build-dataset", "Build a labeled function dataset");
  build->add_option("--advisories", bd.advisories, "Advisory dump (JSON lines)")->required();
  build->add_option("--patches", bd.patches, "Patch bundle directory")->required();
  build->add_option("--languages", bd.languages, "Target languages (c,cpp,java,python,go)")
      ->required()
      ->delimiter(',');
  build->add_option("--output", bd.output, "Dataset output path (JSON lines)")->required();
  build->add_option("--stats", bd.stats, "Also write the length table here");
  build->add_flag("--whole-file-labels", bd.whole_file,
                  "Label every pre-side function of a patched file vulnerable");

  TokenizerArgs tk;
  auto* tok = app.add_subcommand("train-tokenizer", "Train the byte-level BPE vocabulary");
  tok->add_option("--dataset", tk.dataset, "Dataset file")->required();
  tok->add_option("--vocab-size", tk.vocab_size, "Total units including bytes and specials");
  tok->add_option("--output", tk.output, "Vocabulary output path")->required();
  tok->add_option("--threads", tk.threads, "Threads for pair counting");

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "Train the classifier");
  trn->add_option("--dataset", tr.dataset, "Dataset file")->required();
  trn->add_option("--vocab", tr.vocab, "Vocabulary file")->required();
  trn->add_option("--output", tr.output, "Checkpoint output path")->required();
  trn->add_option("--metrics", tr.metrics, "Per-epoch metrics log (default: <output>.metrics.jsonl)");
  trn->add_option("--layers", tr.model.layers, "Encoder layers");
  trn->add_option("--heads", tr.model.heads, "Attention heads");
  trn->add_option("--model-dim", tr.model.model_dim, "Hidden size");
  trn->add_option("--ffn-dim", tr.model.ffn_dim, "Feed-forward size");
  trn->add_option("--window", tr.model.window, "Sliding window span (even)");
  trn->add_option("--dilations", tr.model.dilations, "Per-layer dilation")->delimiter(',');
  trn->add_option("--max-positions", tr.model.max_positions, "Maximum sequence length");
  trn->add_option("--dropout", tr.model.dropout, "Dropout rate");
  trn->add_option("--focal-alpha", tr.model.focal.alpha, "Focal loss positive-class weight");
  trn->add_option("--focal-gamma", tr.model.focal.gamma, "Focal loss focusing exponent");
  trn->add_option("--ast-mode", tr.ast_mode, "AST path sum")
      ->check(CLI::IsMember({"literal-edge-sum", "deduplicated-path-sum"}));
  trn->add_option("--loss", tr.loss, "Training loss")
      ->check(CLI::IsMember({"focal", "cross-entropy"}));
  trn->add_flag("--no-ast", tr.no_ast, "Drop the AST path embedding");
  trn->add_flag("--self-attention", tr.self_attention, "Use full self-attention");
  trn->add_option("--epochs", tr.train.epochs, "Training epochs");
  trn->add_option("--batch-size", tr.train.batch_size, "Samples per step");
  trn->add_option("--learning-rate", tr.train.learning_rate, "Peak learning rate");
  trn->add_option("--warmup-fraction", tr.train.warmup_fraction, "Warmup share of all steps");
  trn->add_option("--max-steps", tr.train.max_steps, "Stop after this many steps (0: none)");
  trn->add_option("--threshold", tr.train.threshold, "Threshold for validation metrics");
  add_split_options(trn, tr.split);

  EvaluateArgs ev;
  auto* evl = app.add_subcommand("evaluate", "Rank a dataset split and report metrics");
  evl->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  evl->add_option("--vocab", ev.vocab, "Vocabulary file")->required();
  evl->add_option("--dataset", ev.dataset, "Dataset file")->required();
  evl->add_option("--partition", ev.partition, "Which split to score")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}));
  evl->add_option("--ks", ev.ks, "Cut-offs for hits@k")->delimiter(',');
  evl->add_option("--threshold", ev.threshold, "Probability threshold for recall and F1");
  evl->add_option("--json", ev.json, "Also write the report as JSON");
  evl->add_option("--threads", ev.threads, "Inference threads");
  add_split_options(evl, ev.split);

  ExplainArgs ex;
  auto* exp = app.add_subcommand("explain", "Export per-token attention for one sample");
  exp->add_option("--checkpoint", ex.checkpoint, "Checkpoint file")->required();
  exp->add_option("--vocab", ex.vocab, "Vocabulary file")->required();
  exp->add_option("--source", ex.source, "Source file holding one function")->required();
  exp->add_option("--language", ex.language, "Language tag")->required();
  exp->add_option("--layer", ex.layer, "Encoder layer");
  exp->add_option("--head", ex.head, "Attention head");
  exp->add_option("--output", ex.output, "Heatmap data output (TSV)")->required();

  for (CLI::App* sub : app.get_subcommands({})) {
    sub->allow_config_extras(CLI::config_extras_mode::error);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name());
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  // Globals and the chosen subcommand only.
  const std::string active = app.get_subcommands().front()->get_name() + ".";
  std::istringstream config(app.config_to_str(true, false));
  out << "# effective configuration\n";
  for (std::string line; std::getline(config, line);) {
    const size_t eq = line.find('=');
    const size_t dot = line.find('.');
    if (dot == std::string::npos || dot > eq || line.rfind(active, 0) == 0) out << line << '\n';
  }
  try {
    if (build->parsed()) return cmd_build_dataset(bd, g, out, err);
    if (tok->parsed()) return cmd_train_tokenizer(tk, out);
    if (trn->parsed()) return cmd_train(tr, g, out);
    if (evl->parsed()) return cmd_evaluate(ev, g, out);
    if (exp->parsed()) return cmd_explain(ex, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace vulaste::cli
