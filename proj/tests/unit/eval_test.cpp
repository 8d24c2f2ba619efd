#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "oracles/oracles.hpp"
#include "vulaste/error.hpp"
#include "vulaste/metrics.hpp"

using namespace vulaste;
using namespace vulaste::eval;

namespace {

std::vector<RankedEntry> entries(const std::vector<double>& p, const std::vector<int>& y) {
  std::vector<RankedEntry> out;
  for (size_t i = 0; i < p.size(); ++i) out.push_back({"s" + std::to_string(i), p[i], y[i]});
  return rank(std::move(out));
}

}  // namespace

TEST(Eval, HitsAtK) {
  const auto r = entries({0.9, 0.8, 0.1}, {1, 0, 1});
  EXPECT_EQ(hits_at_k(r, 2), 1u);
  EXPECT_EQ(hits_at_k(r, 10), 2u);
  EXPECT_EQ(hits_at_k(entries({0.3, 0.2}, {0, 0}), 1), 0u);
  EXPECT_THROW(hits_at_k(r, 0), Error);
}

TEST(Eval, RecallPrecisionF1) {
  const Classification c = recall_f1(entries({0.9, 0.4, 0.6, 0.1}, {1, 1, 0, 0}), 0.5);
  EXPECT_DOUBLE_EQ(c.recall, 0.5);
  EXPECT_DOUBLE_EQ(c.precision, 0.5);
  EXPECT_DOUBLE_EQ(c.f1, 0.5);
  const Classification perfect = recall_f1(entries({0.9, 0.1}, {1, 0}), 0.5);
  EXPECT_EQ(perfect.f1, 1.0);
  const Classification none = recall_f1(entries({0.2, 0.1}, {1, 0}), 0.5);
  EXPECT_EQ(none.f1, 0.0);
  EXPECT_EQ(none.precision, 0.0);
}

TEST(Eval, RankBreaksTiesById) {
  const auto r = rank({{"b", 0.5, 0}, {"a", 0.5, 1}, {"c", 0.7, 0}});
  EXPECT_EQ(r[0].id, "c");
  EXPECT_EQ(r[1].id, "a");
  EXPECT_EQ(r[2].id, "b");
}

TEST(Eval, MatchesConfusionOracle) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 50; ++t) {
    const size_t n = 1 + rng() % 300;
    std::vector<double> p(n);
    std::vector<int> y(n);
    std::vector<std::string> ids(n);
    for (size_t i = 0; i < n; ++i) {
      p[i] = std::round(u(rng) * 20) / 20;  // coarse values force ties
      y[i] = static_cast<int>(rng() % 3 == 0);
      ids[i] = "s" + std::to_string(i);
    }
    const auto r = entries(p, y);
    for (size_t k : {1, 5, 50, 500}) EXPECT_EQ(hits_at_k(r, k), oracle::hits_at_k(ids, p, y, k));
    const oracle::Confusion c = oracle::confusion(p, y, 0.5);
    const Classification got = recall_f1(r, 0.5);
    const double recall = c.tp + c.fn ? double(c.tp) / double(c.tp + c.fn) : 0.0;
    const double precision = c.tp + c.fp ? double(c.tp) / double(c.tp + c.fp) : 0.0;
    EXPECT_EQ(got.recall, recall);
    EXPECT_EQ(got.precision, precision);
  }
}

TEST(Eval, ReportAndFormats) {
  const auto r = entries({0.9, 0.4, 0.6, 0.1}, {1, 1, 0, 0});
  const std::vector<size_t> ks{1, 2, 50};
  const MetricsReport rep = report(r, ks, 0.5);
  EXPECT_EQ(rep.hits, (std::vector<std::pair<size_t, size_t>>{{1, 1}, {2, 1}, {50, 2}}));
  EXPECT_EQ(rep.positives, 2u);
  EXPECT_EQ(rep.negatives, 2u);
  const std::string table = format_table(rep);
  EXPECT_NE(table.find("hits@50"), std::string::npos);
  EXPECT_NE(table.find("0.5000"), std::string::npos);
  const nlohmann::json j = rep;
  EXPECT_EQ(j.at("f1").get<double>(), 0.5);
  EXPECT_THROW(report({}, ks, 0.5), Error);
}

TEST(Eval, HeatmapNormalizesColumnSums) {
  const std::vector<attention::WeightTriple> triples{
      {0, 0, 0.5}, {0, 1, 0.5}, {1, 1, 1.0}, {2, 0, 0.25}, {2, 2, 0.75}};
  const auto w = token_attention(triples, 3);
  EXPECT_DOUBLE_EQ(w[0], 0.75 / 1.5);
  EXPECT_DOUBLE_EQ(w[1], 1.0);
  EXPECT_DOUBLE_EQ(w[2], 0.75 / 1.5);
  std::ostringstream out;
  const std::vector<std::string> tokens{"<bos>", "a b", "\n"};
  export_heatmap(triples, tokens, out);
  EXPECT_EQ(out.str(), "index\ttoken\tweight\n0\t<bos>\t0.500000\n1\ta\\x20b\t1.000000\n2\t\\x0A\t0.500000\n");
}
