#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>

#include "vulaste/dataset.hpp"
#include "vulaste/error.hpp"

namespace vulaste::dataset {

void SplitSpec::validate() const {
  if (train < 0 || validation < 0 || test < 0 ||
      std::abs(train + validation + test - 1.0) > 1e-9) {
    fail(ErrorCode::kInvalidSplit, "split ratios must be non-negative and sum to 1");
  }
}

Split split(std::span<const SampleRecord> samples, const SplitSpec& spec) {
  spec.validate();
  // Unit key per sample, then the distinct keys in sorted order.
  std::vector<std::string> keys(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    const SampleRecord& s = samples[i];
    if (spec.unit == SplitUnit::kSample || s.provenance.empty()) {
      keys[i] = "sample:" + s.id;
    } else {
      std::string first = s.provenance.front().advisory;
      for (const Provenance& p : s.provenance) first = std::min(first, p.advisory);
      keys[i] = "advisory:" + first;
    }
  }
  std::vector<std::string> units(keys);
  std::sort(units.begin(), units.end());
  units.erase(std::unique(units.begin(), units.end()), units.end());

  std::mt19937_64 rng(spec.seed);
  for (size_t i = units.size(); i > 1; --i) {
    std::swap(units[i - 1], units[rng() % i]);
  }
  const size_t n = units.size();
  const auto n_train = std::min<size_t>(n, static_cast<size_t>(std::llround(spec.train * n)));
  const auto n_val =
      std::min<size_t>(n - n_train, static_cast<size_t>(std::llround(spec.validation * n)));
  const size_t n_test = n - n_train - n_val;
  if ((spec.train > 0 && n_train == 0) || (spec.validation > 0 && n_val == 0) ||
      (spec.test > 0 && n_test == 0)) {
    fail(ErrorCode::kInvalidSplit, "a partition with a positive ratio would be empty (" +
                                       std::to_string(n) + " split units)");
  }
  std::map<std::string, int> part;
  for (size_t i = 0; i < n; ++i) part[units[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);

  Split out;
  for (size_t i = 0; i < samples.size(); ++i) {
    switch (part.at(keys[i])) {
      case 0: out.train.push_back(samples[i]); break;
      case 1: out.validation.push_back(samples[i]); break;
      default: out.test.push_back(samples[i]); break;
    }
  }
  return out;
}

size_t char_length(std::string_view source) {
  return static_cast<size_t>(std::count_if(source.begin(), source.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

LengthStats length_stats(std::span<const SampleRecord> samples) {
  LengthStats stats;
  for (const SampleRecord& s : samples) {
    const auto len = static_cast<double>(char_length(s.source));
    size_t bucket = 0;
    while (bucket + 1 < kLengthEdges.size() && len >= kLengthEdges[bucket + 1]) ++bucket;
    ++stats.counts[bucket];
  }
  return stats;
}

std::string format_length_table(const LengthStats& stats) {
  std::vector<std::string> labels;
  char buf[64];
  for (size_t i = 0; i < kLengthEdges.size(); ++i) {
    if (i + 1 < kLengthEdges.size()) {
      std::snprintf(buf, sizeof buf, "[%.1f, %.1f)", kLengthEdges[i], kLengthEdges[i + 1]);
    } else {
      std::snprintf(buf, sizeof buf, "[%.1f, inf)", kLengthEdges[i]);
    }
    labels.emplace_back(buf);
  }
  size_t width = std::string_view("Length").size();
  for (const std::string& l : labels) width = std::max(width, l.size());
  auto pad = [&](std::string s) { return s + std::string(width - s.size(), ' '); };
  std::string out = pad("Length") + "  count\n";
  for (size_t i = 0; i < labels.size(); ++i) {
    out += pad(labels[i]) + "  " + std::to_string(stats.counts[i]) + '\n';
  }
  return out;
}

}  // namespace vulaste::dataset
