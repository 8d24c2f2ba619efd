#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vulaste/attention.hpp"

namespace vulaste::eval {

inline constexpr double kDefaultThreshold = 0.5;
inline const std::vector<size_t> kDefaultKs{50, 100, 200, 500};

struct RankedEntry {
  std::string id;
  double probability = 0;
  int label = 0;  // 1 = vulnerable
};

// Sorts by descending probability, ties by id. Throws Error(kInvalidInput) on
// duplicate ids or labels outside {0, 1}.
std::vector<RankedEntry> rank(std::vector<RankedEntry> entries);

// Positives among the first min(k, N) entries. Throws Error(kInvalidInput)
// when k is 0.
size_t hits_at_k(std::span<const RankedEntry> ranked, size_t k);

struct Classification {
  double recall = 0;
  double precision = 0;
  double f1 = 0;
};

// Predicted positive when probability >= threshold. Undefined ratios are 0.
Classification recall_f1(std::span<const RankedEntry> ranked, double threshold);

struct MetricsReport {
  std::vector<std::pair<size_t, size_t>> hits;  // (k, hits@k)
  double recall = 0;
  double precision = 0;
  double f1 = 0;
  size_t positives = 0;
  size_t negatives = 0;
  double threshold = kDefaultThreshold;
};

// Throws Error(kInvalidInput) on empty predictions.
MetricsReport report(std::span<const RankedEntry> ranked,
                     std::span<const size_t> ks = kDefaultKs,
                     double threshold = kDefaultThreshold);

std::string format_table(const MetricsReport& report);
void to_json(nlohmann::json& j, const MetricsReport& report);

// Column sums of the weights divided by their maximum, one per token.
std::vector<double> token_attention(std::span<const attention::WeightTriple> triples,
                                    size_t num_tokens);

// Tab-separated "index<TAB>token<TAB>weight" rows after a header line. Tokens
// are written with non-printable bytes escaped.
void export_heatmap(std::span<const attention::WeightTriple> triples,
                    std::span<const std::string> tokens, std::ostream& out);

}  // namespace vulaste::eval
