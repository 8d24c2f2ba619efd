#pragma once

// Brute-force reference implementations. Each one is written from the
// definition, shares no code with the library, and trades speed for
// obviousness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace oracle {

// Pre-tokens: maximal runs of bytes of one class (word, space, other).
inline int byte_class(unsigned char c) {
  if (std::isalnum(c) != 0 || c == '_' || c >= 0x80) return 0;
  if (c == ' ' || (c >= '\t' && c <= '\r')) return 1;
  return 2;
}

inline std::vector<std::string> pre_tokens(const std::string& s) {
  std::vector<std::string> out;
  for (size_t i = 0; i < s.size();) {
    size_t j = i + 1;
    while (j < s.size() && byte_class(s[j]) == byte_class(s[i])) ++j;
    out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Greedy BPE by full recount after every merge. Each pre-token occurrence is
// kept separately (no frequency table) to stay independent of the library.
inline std::vector<std::pair<std::string, std::string>> bpe_merges(
    const std::vector<std::string>& corpus, size_t num_merges) {
  std::vector<std::vector<std::string>> words;
  for (const std::string& doc : corpus) {
    for (const std::string& t : pre_tokens(doc)) {
      std::vector<std::string> w;
      for (char c : t) w.emplace_back(1, c);
      words.push_back(std::move(w));
    }
  }
  std::vector<std::pair<std::string, std::string>> merges;
  while (merges.size() < num_merges) {
    std::map<std::pair<std::string, std::string>, size_t> counts;
    for (const auto& w : words) {
      for (size_t i = 0; i + 1 < w.size(); ++i) ++counts[{w[i], w[i + 1]}];
    }
    if (counts.empty()) break;
    // std::map orders keys lexicographically, so the first maximum wins ties.
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto [left, right] = best->first;
    merges.emplace_back(left, right);
    for (auto& w : words) {
      std::vector<std::string> next;
      for (size_t i = 0; i < w.size(); ++i) {
        if (i + 1 < w.size() && w[i] == left && w[i + 1] == right) {
          next.push_back(left + right);
          ++i;
        } else {
          next.push_back(w[i]);
        }
      }
      w = std::move(next);
    }
  }
  return merges;
}

// allowed(i, j) straight from the definition, by searching for k.
inline bool allowed(long i, long j, long window, long dilation, const std::set<long>& globals) {
  if (i == j || globals.contains(i) || globals.contains(j)) return true;
  for (long k = -window / 2; k <= window / 2; ++k) {
    if (j - i == k * dilation) return true;
  }
  return false;
}

// AE by walking the edges of the path and adding both endpoints of each.
inline Eigen::RowVectorXd path_walk(const std::vector<Eigen::RowVectorXd>& node_vectors,
                                    bool literal) {
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(node_vectors.front().size());
  if (!literal) {
    for (const auto& v : node_vectors) sum += v;
    return sum;
  }
  for (size_t e = 0; e + 1 < node_vectors.size(); ++e) {
    sum += node_vectors[e];
    sum += node_vectors[e + 1];
  }
  return sum;
}

struct Confusion {
  size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Confusion confusion(const std::vector<double>& p, const std::vector<int>& y,
                           double threshold) {
  Confusion c;
  for (size_t i = 0; i < p.size(); ++i) {
    const bool pred = p[i] >= threshold;
    if (pred && y[i] == 1) ++c.tp;
    if (pred && y[i] == 0) ++c.fp;
    if (!pred && y[i] == 1) ++c.fn;
    if (!pred && y[i] == 0) ++c.tn;
  }
  return c;
}

// hits@k by repeatedly extracting the best remaining item (probability
// descending, id ascending).
inline size_t hits_at_k(const std::vector<std::string>& ids, const std::vector<double>& p,
                        const std::vector<int>& y, size_t k) {
  std::vector<bool> taken(p.size(), false);
  size_t hits = 0;
  for (size_t r = 0; r < std::min(k, p.size()); ++r) {
    size_t best = SIZE_MAX;
    for (size_t i = 0; i < p.size(); ++i) {
      if (taken[i]) continue;
      if (best == SIZE_MAX || p[i] > p[best] || (p[i] == p[best] && ids[i] < ids[best])) best = i;
    }
    taken[best] = true;
    hits += static_cast<size_t>(y[best] == 1);
  }
  return hits;
}

}  // namespace oracle
