#include <sstream>

#include <gtest/gtest.h>

#include "commands.hpp"
#include "oracles/oracles.hpp"
#include "support/model_support.hpp"
#include "support/temp_dir.hpp"
#include "vulaste/dataset.hpp"
#include "vulaste/digest.hpp"
#include "vulaste/model.hpp"
#include "vulaste/tokenizer.hpp"

using namespace vulaste;

namespace {

const std::string kFixtures = VULASTE_FIXTURES;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> build_args(const std::string& output) {
  return {"build-dataset", "--advisories", kFixtures + "/dataset/advisories.jsonl", "--patches",
          kFixtures + "/dataset/patches", "--languages", "c,cpp,java,python,go", "--output",
          output};
}

// Synthetic marker dataset with one advisory per sample.
std::string write_marker_dataset(const support::TempDir& dir, size_t n) {
  std::vector<dataset::SampleRecord> samples;
  size_t i = 0;
  for (auto& [src, label] : support::marker_corpus(n, n / 2, 4)) {
    dataset::SampleRecord s;
    s.language = "c";
    s.source = src;
    s.id = dataset::sample_id(s.language, s.source);
    s.vulnerable = label == 1;
    s.provenance.push_back({"ADV-" + std::to_string(i++), "c", "a.c", "f", dataset::Side::kPre, 1, 5});
    samples.push_back(std::move(s));
  }
  std::ostringstream text;
  dataset::write_samples(text, samples);
  const std::string path = dir.file("marker.jsonl");
  write_file(path, text.str());
  return path;
}

const std::vector<std::string> kTinyModel{"--layers", "1", "--heads", "2", "--model-dim", "8",
                                          "--ffn-dim", "16", "--window", "8", "--max-positions",
                                          "128", "--learning-rate", "0.001", "--batch-size", "4"};

}  // namespace

TEST(Cli, HelpListsFlagsWithDefaults) {
  for (const char* sub : {"build-dataset", "train-tokenizer", "train", "evaluate", "explain"}) {
    const Result r = invoke({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("--"), std::string::npos) << sub;
  }
  const Result train = invoke({"train", "--help"});
  for (const char* flag : {"--no-ast", "--self-attention", "--loss", "--window", "--epochs"}) {
    EXPECT_NE(train.out.find(flag), std::string::npos) << flag;
  }
  EXPECT_NE(train.out.find("[64]"), std::string::npos);
  EXPECT_NE(train.out.find("[focal]"), std::string::npos);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(invoke({}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"train", "--loss", "hinge"}).code, cli::kExitUsage);
  support::TempDir dir;
  auto args = build_args(dir.file("d.jsonl"));
  args[6] = "";
  EXPECT_EQ(invoke(args).code, cli::kExitUsage);
}

TEST(Cli, BuildDatasetMatchesGoldenAndIsStable) {
  support::TempDir dir;
  const Result r = invoke(build_args(dir.file("d.jsonl")));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("excluded without patch: 1"), std::string::npos);
  EXPECT_NE(r.out.find("samples: 7 (vulnerable 2, non-vulnerable 5)"), std::string::npos);
  EXPECT_NE(r.out.find("[5096.0, inf)"), std::string::npos);
  EXPECT_NE(r.out.find("# effective configuration"), std::string::npos);
  const std::string first = read_file(dir.file("d.jsonl"));
  EXPECT_EQ(first, read_file(kFixtures + "/golden/dataset.jsonl"));
  ASSERT_EQ(invoke(build_args(dir.file("d2.jsonl"))).code, 0);
  EXPECT_EQ(read_file(dir.file("d2.jsonl")), first);
}

TEST(Cli, UnreadableInputsAreDataErrors) {
  support::TempDir dir;
  auto args = build_args(dir.file("d.jsonl"));
  args[2] = dir.file("missing.jsonl");
  const Result r = invoke(args);
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST(Cli, TrainTokenizerMatchesOracle) {
  support::TempDir dir;
  const std::string golden = kFixtures + "/golden/dataset.jsonl";
  ASSERT_EQ(invoke({"train-tokenizer", "--dataset", golden, "--vocab-size", "300", "--output",
                 dir.file("v.txt")})
                .code,
            0);
  const tokenizer::Vocabulary v = tokenizer::Vocabulary::parse(read_file(dir.file("v.txt")));
  std::vector<std::string> corpus;
  for (const auto& s : dataset::load_samples(golden)) corpus.push_back(s.source);
  std::vector<std::pair<std::string, std::string>> got;
  for (const auto& m : v.merges()) got.emplace_back(v.unit(m.left), v.unit(m.right));
  EXPECT_EQ(got, oracle::bpe_merges(corpus, 40));
  EXPECT_EQ(read_file(dir.file("v.txt")), read_file(kFixtures + "/golden/vocab.txt"));

  ASSERT_EQ(invoke({"train-tokenizer", "--dataset", golden, "--vocab-size", "260", "--output",
                 dir.file("v0.txt")})
                .code,
            0);
  EXPECT_TRUE(tokenizer::Vocabulary::parse(read_file(dir.file("v0.txt"))).merges().empty());
  EXPECT_EQ(invoke({"train-tokenizer", "--dataset", golden, "--vocab-size", "100", "--output",
                 dir.file("v1.txt")})
                .code,
            cli::kExitUsage);
}

TEST(Cli, TrainEvaluateExplain) {
  support::TempDir dir;
  const std::string data = write_marker_dataset(dir, 20);
  ASSERT_EQ(invoke({"train-tokenizer", "--dataset", data, "--vocab-size", "320", "--output",
                 dir.file("v.txt")})
                .code,
            0);
  std::vector<std::string> args{"train", "--dataset", data, "--vocab", dir.file("v.txt"),
                                "--output", dir.file("m.ckpt"), "--epochs", "2"};
  args.insert(args.end(), kTinyModel.begin(), kTinyModel.end());
  const Result t = invoke(args);
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out.find("epoch 2"), std::string::npos);
  EXPECT_NE(read_file(dir.file("m.ckpt.metrics.jsonl")).find("val_f1"), std::string::npos);

  const Result e = invoke({"evaluate", "--checkpoint", dir.file("m.ckpt"), "--vocab", dir.file("v.txt"),
                        "--dataset", data, "--partition", "all", "--ks", "1,5", "--json",
                        dir.file("r.json")});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("hits@5"), std::string::npos);
  EXPECT_NE(read_file(dir.file("r.json")).find("\"recall\""), std::string::npos);

  write_file(dir.file("f.c"), "int f(int a) {\n  return a;\n}\n");
  const Result x = invoke({"explain", "--checkpoint", dir.file("m.ckpt"), "--vocab", dir.file("v.txt"),
                        "--source", dir.file("f.c"), "--language", "c", "--output",
                        dir.file("h.tsv")});
  ASSERT_EQ(x.code, 0) << x.err;
  const std::string heat = read_file(dir.file("h.tsv"));
  EXPECT_EQ(heat.rfind("index\ttoken\tweight\n0\t<bos>\t", 0), 0u);

  // Same seed and inputs: byte-identical checkpoint.
  args[6] = dir.file("m2.ckpt");
  ASSERT_EQ(invoke(args).code, 0);
  EXPECT_EQ(read_file(dir.file("m.ckpt")), read_file(dir.file("m2.ckpt")));

  // A vocabulary other than the training one is refused.
  const std::vector<std::string> corpus{"abab"};
  write_file(dir.file("other.txt"), tokenizer::train_bpe(corpus, 1).serialize());
  EXPECT_EQ(invoke({"evaluate", "--checkpoint", dir.file("m.ckpt"), "--vocab", dir.file("other.txt"),
                 "--dataset", data, "--partition", "all"})
                .code,
            cli::kExitData);
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  support::TempDir dir;
  const std::string data = write_marker_dataset(dir, 20);
  ASSERT_EQ(invoke({"train-tokenizer", "--dataset", data, "--vocab-size", "260", "--output",
                 dir.file("v.txt")})
                .code,
            0);
  write_file(dir.file("run.toml"), "seed = 3\n[train]\nepochs = 3\nmax-steps = 2\n");
  std::vector<std::string> args{"--config", dir.file("run.toml"), "train", "--dataset", data,
                                "--vocab", dir.file("v.txt"), "--output", dir.file("m.ckpt"),
                                "--max-steps", "1"};
  args.insert(args.end(), kTinyModel.begin(), kTinyModel.end());
  const Result r = invoke(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"epochs\":3"), std::string::npos);
  EXPECT_NE(r.out.find("\"max_steps\":1"), std::string::npos);
  EXPECT_NE(r.out.find("seed=3"), std::string::npos);

  write_file(dir.file("bad.toml"), "[train]\nepochz = 3\n");
  args[1] = dir.file("bad.toml");
  EXPECT_EQ(invoke(args).code, cli::kExitUsage);
}

TEST(Cli, MissingVocabularyIsADataError) {
  support::TempDir dir;
  const std::string data = write_marker_dataset(dir, 20);
  EXPECT_EQ(invoke({"train", "--dataset", data, "--vocab", dir.file("none.txt"), "--output",
                 dir.file("m.ckpt")})
                .code,
            cli::kExitData);
}
