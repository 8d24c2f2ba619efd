#include "vulaste/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "vulaste/error.hpp"
#include "vulaste/tokenizer.hpp"

namespace vulaste::eval {

std::vector<RankedEntry> rank(std::vector<RankedEntry> entries) {
  std::set<std::string_view> seen;
  for (const RankedEntry& e : entries) {
    if (e.label != 0 && e.label != 1) fail(ErrorCode::kInvalidInput, "labels must be 0 or 1");
    if (!seen.insert(e.id).second) {
      fail(ErrorCode::kInvalidInput, "duplicate sample id " + e.id);
    }
  }
  std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.id < b.id;
  });
  return entries;
}

size_t hits_at_k(std::span<const RankedEntry> ranked, size_t k) {
  if (k == 0) fail(ErrorCode::kInvalidInput, "k must be >= 1");
  const size_t n = std::min(k, ranked.size());
  size_t hits = 0;
  for (size_t i = 0; i < n; ++i) hits += ranked[i].label == 1;
  return hits;
}

Classification recall_f1(std::span<const RankedEntry> ranked, double threshold) {
  size_t tp = 0, fp = 0, fn = 0;
  for (const RankedEntry& e : ranked) {
    const bool predicted = e.probability >= threshold;
    if (predicted && e.label == 1) ++tp;
    if (predicted && e.label == 0) ++fp;
    if (!predicted && e.label == 1) ++fn;
  }
  Classification c;
  if (tp + fn > 0) c.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (tp + fp > 0) c.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (c.recall + c.precision > 0) {
    c.f1 = 2 * c.precision * c.recall / (c.precision + c.recall);
  }
  return c;
}

MetricsReport report(std::span<const RankedEntry> ranked, std::span<const size_t> ks,
                     double threshold) {
  if (ranked.empty()) fail(ErrorCode::kInvalidInput, "no predictions to report");
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    fail(ErrorCode::kInvalidInput, "threshold must lie in [0, 1]");
  }
  MetricsReport r;
  r.threshold = threshold;
  for (size_t k : ks) r.hits.emplace_back(k, hits_at_k(ranked, k));
  const Classification c = recall_f1(ranked, threshold);
  r.recall = c.recall;
  r.precision = c.precision;
  r.f1 = c.f1;
  for (const RankedEntry& e : ranked) (e.label == 1 ? r.positives : r.negatives)++;
  return r;
}

std::string format_table(const MetricsReport& r) {
  std::vector<std::string> header, row;
  for (const auto& [k, hits] : r.hits) {
    header.push_back("hits@" + std::to_string(k));
    row.push_back(std::to_string(hits));
  }
  char buf[32];
  header.emplace_back("recall");
  std::snprintf(buf, sizeof buf, "%.4f", r.recall);
  row.emplace_back(buf);
  header.emplace_back("f1");
  std::snprintf(buf, sizeof buf, "%.4f", r.f1);
  row.emplace_back(buf);

  std::string out;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      const size_t width = std::max(header[i].size(), row[i].size());
      if (i > 0) out += "  ";
      out += std::string(width - cells[i].size(), ' ') + cells[i];
    }
    out += '\n';
  };
  emit(header);
  emit(row);
  std::snprintf(buf, sizeof buf, "%.2f", r.threshold);
  out += "threshold " + std::string(buf) + ", positives " + std::to_string(r.positives) +
         ", negatives " + std::to_string(r.negatives) + '\n';
  return out;
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  nlohmann::json hits = nlohmann::json::object();
  for (const auto& [k, h] : r.hits) hits[std::to_string(k)] = h;
  j = nlohmann::json{{"hits", hits},
                     {"recall", r.recall},
                     {"precision", r.precision},
                     {"f1", r.f1},
                     {"positives", r.positives},
                     {"negatives", r.negatives},
                     {"threshold", r.threshold}};
}

std::vector<double> token_attention(std::span<const attention::WeightTriple> triples,
                                    size_t num_tokens) {
  std::vector<double> sums(num_tokens, 0.0);
  for (const attention::WeightTriple& t : triples) {
    if (t.j >= num_tokens || t.i >= num_tokens) {
      fail(ErrorCode::kOutOfRange, "attention triple outside the token range");
    }
    sums[t.j] += t.weight;
  }
  const double top = sums.empty() ? 0.0 : *std::max_element(sums.begin(), sums.end());
  if (top > 0) {
    for (double& s : sums) s /= top;
  }
  return sums;
}

void export_heatmap(std::span<const attention::WeightTriple> triples,
                    std::span<const std::string> tokens, std::ostream& out) {
  const std::vector<double> weights = token_attention(triples, tokens.size());
  out << "index\ttoken\tweight\n";
  char buf[32];
  for (size_t i = 0; i < tokens.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f", weights[i]);
    out << i << '\t' << tokenizer::escape_unit(tokens[i]) << '\t' << buf << '\n';
  }
}

}  // namespace vulaste::eval
