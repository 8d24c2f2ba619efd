#include "vulaste/tokenizer.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <sstream>
#include <thread>

#include "vulaste/digest.hpp"
#include "vulaste/error.hpp"

namespace vulaste::tokenizer {
namespace {

constexpr std::string_view kHeaderMagic = "#vulaste-bpe";
constexpr std::string_view kHeaderVersion = "v1";

uint64_t pair_key(TokenId left, TokenId right) {
  return (static_cast<uint64_t>(left) << 32) | right;
}
TokenId key_left(uint64_t key) { return static_cast<TokenId>(key >> 32); }
TokenId key_right(uint64_t key) { return static_cast<TokenId>(key & 0xFFFFFFFFu); }

// Left-to-right, non-overlapping replacement of (left, right) by `result`.
// `starts`, when given, holds the byte offset of each symbol and is kept in
// sync.
bool merge_in_place(std::vector<TokenId>& syms, TokenId left, TokenId right,
                    TokenId result, std::vector<size_t>* starts = nullptr) {
  bool changed = false;
  size_t out = 0;
  for (size_t i = 0; i < syms.size(); ++i) {
    if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
      syms[out] = result;
      if (starts) (*starts)[out] = (*starts)[i];
      ++i;
      changed = true;
    } else {
      syms[out] = syms[i];
      if (starts) (*starts)[out] = (*starts)[i];
    }
    ++out;
  }
  syms.resize(out);
  if (starts) starts->resize(out);
  return changed;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

ByteClass classify(unsigned char byte) {
  if ((byte >= 'a' && byte <= 'z') || (byte >= 'A' && byte <= 'Z') ||
      (byte >= '0' && byte <= '9') || byte == '_' || byte >= 0x80) {
    return ByteClass::kWord;
  }
  if (byte == ' ' || byte == '\t' || byte == '\n' || byte == '\r' ||
      byte == '\v' || byte == '\f') {
    return ByteClass::kSpace;
  }
  return ByteClass::kOther;
}

std::vector<ByteRange> pre_tokenize(std::string_view source) {
  std::vector<ByteRange> out;
  size_t begin = 0;
  for (size_t i = 1; i <= source.size(); ++i) {
    if (i == source.size() ||
        classify(static_cast<unsigned char>(source[i])) !=
            classify(static_cast<unsigned char>(source[i - 1]))) {
      out.push_back({begin, i});
      begin = i;
    }
  }
  return out;
}

Vocabulary::Vocabulary() {
  units_.reserve(kBaseSize + kNumSpecials);
  for (size_t b = 0; b < kBaseSize; ++b) {
    units_.emplace_back(1, static_cast<char>(b));
    token_table_.emplace(units_.back(), static_cast<TokenId>(b));
  }
  for (size_t s = 0; s < kNumSpecials; ++s) units_.emplace_back();
}

void Vocabulary::push_merge(TokenId left, TokenId right) {
  std::string joined = units_[left] + units_[right];
  TokenId result;
  if (auto it = token_table_.find(joined); it != token_table_.end()) {
    result = it->second;
  } else {
    result = static_cast<TokenId>(units_.size());
    token_table_.emplace(joined, result);
    units_.push_back(std::move(joined));
  }
  merge_index_.emplace(pair_key(left, right),
                       std::pair{static_cast<uint32_t>(merges_.size()), result});
  merges_.push_back({left, right, result});
  merge_pairs_.emplace_back(left, right);
}

Vocabulary Vocabulary::from_merges(
    std::span<const std::pair<std::string, std::string>> merges) {
  Vocabulary vocab;
  for (size_t k = 0; k < merges.size(); ++k) {
    auto left = vocab.find(merges[k].first);
    auto right = vocab.find(merges[k].second);
    if (!left || !right) {
      fail(ErrorCode::kInvalidInput,
           "merge " + std::to_string(k) + " references an unknown unit");
    }
    if (vocab.merge_rank(*left, *right)) {
      fail(ErrorCode::kInvalidInput,
           "merge " + std::to_string(k) + " is a duplicate");
    }
    vocab.push_merge(*left, *right);
  }
  return vocab;
}

const std::string& Vocabulary::unit(TokenId id) const {
  if (id >= units_.size()) {
    fail(ErrorCode::kInvalidInput, "token id " + std::to_string(id) +
                                       " is outside the vocabulary");
  }
  return units_[id];
}

std::optional<TokenId> Vocabulary::find(std::string_view unit) const {
  if (auto it = token_table_.find(std::string(unit)); it != token_table_.end()) {
    return it->second;
  }
  return std::nullopt;
}

std::optional<std::pair<uint32_t, TokenId>> Vocabulary::merge_rank(
    TokenId left, TokenId right) const {
  if (auto it = merge_index_.find(pair_key(left, right));
      it != merge_index_.end()) {
    return it->second;
  }
  return std::nullopt;
}

std::string escape_unit(std::string_view unit) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : unit) {
    if (c > 0x20 && c < 0x7F && c != '\\') {
      out.push_back(static_cast<char>(c));
    } else {
      out += "\\x";
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

std::optional<std::string> unescape_unit(std::string_view text) {
  std::string out;
  for (size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (c == '\\') {
      if (i + 3 >= text.size()) return std::nullopt;
      if (text[i + 1] != 'x') return std::nullopt;
      const int hi = hex_value(text[i + 2]);
      const int lo = hex_value(text[i + 3]);
      if (hi < 0 || lo < 0) return std::nullopt;
      out.push_back(static_cast<char>(hi * 16 + lo));
      i += 3;
    } else if (c > 0x20 && c < 0x7F) {
      out.push_back(static_cast<char>(c));
    } else {
      return std::nullopt;
    }
  }
  if (out.empty()) return std::nullopt;
  return out;
}

std::string Vocabulary::serialize() const {
  std::ostringstream out;
  out << kHeaderMagic << ' ' << kHeaderVersion << " base_size=" << kBaseSize
      << " bos=" << kSpecials.bos << " eos=" << kSpecials.eos
      << " pad=" << kSpecials.pad << " unknown_kind=" << kSpecials.unknown_kind
      << '\n';
  for (const auto& [left, right] : merge_pairs_) {
    out << escape_unit(units_[left]) << ' ' << escape_unit(units_[right])
        << '\n';
  }
  return out.str();
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::ostringstream expected;
  expected << kHeaderMagic << ' ' << kHeaderVersion
           << " base_size=" << kBaseSize << " bos=" << kSpecials.bos
           << " eos=" << kSpecials.eos << " pad=" << kSpecials.pad
           << " unknown_kind=" << kSpecials.unknown_kind;

  std::vector<std::pair<std::string, std::string>> merges;
  size_t line_no = 0;
  size_t pos = 0;
  bool saw_header = false;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      fail(ErrorCode::kParse,
           "vocabulary line " + std::to_string(line_no + 1) +
               ": missing trailing newline");
    }
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!saw_header) {
      if (line != expected.str()) {
        fail(ErrorCode::kParse, "vocabulary line 1: unsupported header");
      }
      saw_header = true;
      continue;
    }
    const size_t space = line.find(' ');
    if (space == std::string_view::npos ||
        line.find(' ', space + 1) != std::string_view::npos) {
      fail(ErrorCode::kParse, "vocabulary line " + std::to_string(line_no) +
                                  ": expected two units");
    }
    auto left = unescape_unit(line.substr(0, space));
    auto right = unescape_unit(line.substr(space + 1));
    if (!left || !right) {
      fail(ErrorCode::kParse, "vocabulary line " + std::to_string(line_no) +
                                  ": malformed unit");
    }
    merges.emplace_back(std::move(*left), std::move(*right));
  }
  if (!saw_header) fail(ErrorCode::kParse, "vocabulary: empty file");
  try {
    return from_merges(merges);
  } catch (const Error& e) {
    fail(ErrorCode::kParse, std::string("vocabulary: ") + e.what());
  }
}

std::string Vocabulary::content_hash() const { return sha256_hex(serialize()); }

namespace {

struct Word {
  std::vector<TokenId> syms;
  uint64_t count = 0;
};

using PairCounts = std::unordered_map<uint64_t, int64_t>;

void count_words(std::span<const Word> words, PairCounts& counts) {
  for (const Word& w : words) {
    for (size_t i = 0; i + 1 < w.syms.size(); ++i) {
      counts[pair_key(w.syms[i], w.syms[i + 1])] +=
          static_cast<int64_t>(w.count);
    }
  }
}

PairCounts count_pairs(std::span<const Word> words, unsigned threads) {
  threads = std::max(1u, std::min<unsigned>(threads, words.size() / 64 + 1));
  if (threads == 1) {
    PairCounts counts;
    count_words(words, counts);
    return counts;
  }
  std::vector<PairCounts> shards(threads);
  std::vector<std::thread> workers;
  const size_t per = (words.size() + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const size_t begin = std::min(words.size(), t * per);
    const size_t end = std::min(words.size(), begin + per);
    workers.emplace_back([&, t, begin, end] {
      count_words(words.subspan(begin, end - begin), shards[t]);
    });
  }
  for (auto& w : workers) w.join();
  PairCounts total;
  for (const auto& shard : shards) {
    for (const auto& [key, n] : shard) total[key] += n;
  }
  return total;
}

struct Candidate {
  int64_t count;
  uint64_t key;
};

}  // namespace

Vocabulary train_bpe(std::span<const std::string> corpus, size_t num_merges,
                     const TrainOptions& options) {
  if (corpus.empty()) fail(ErrorCode::kInvalidInput, "empty training corpus");

  std::map<std::string, uint64_t> word_counts;
  for (const std::string& doc : corpus) {
    for (const ByteRange& r : pre_tokenize(doc)) {
      ++word_counts[doc.substr(r.begin, r.size())];
    }
  }
  std::vector<Word> words;
  words.reserve(word_counts.size());
  for (const auto& [text, count] : word_counts) {
    Word w;
    w.count = count;
    for (unsigned char c : text) w.syms.push_back(c);
    words.push_back(std::move(w));
  }

  Vocabulary vocab;
  PairCounts counts = count_pairs(words, options.threads);
  std::unordered_map<uint64_t, std::vector<uint32_t>> where;
  for (uint32_t w = 0; w < words.size(); ++w) {
    for (size_t i = 0; i + 1 < words[w].syms.size(); ++i) {
      auto& list = where[pair_key(words[w].syms[i], words[w].syms[i + 1])];
      if (list.empty() || list.back() != w) list.push_back(w);
    }
  }

  // Lazy max-heap: stale entries are skipped when their count no longer
  // matches the live count.
  auto worse = [&vocab](const Candidate& a, const Candidate& b) {
    if (a.count != b.count) return a.count < b.count;
    const std::string& al = vocab.unit(key_left(a.key));
    const std::string& bl = vocab.unit(key_left(b.key));
    if (al != bl) return al > bl;
    return vocab.unit(key_right(a.key)) > vocab.unit(key_right(b.key));
  };
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(worse)> heap(
      worse);
  for (const auto& [key, n] : counts) {
    if (n > 0) heap.push({n, key});
  }

  std::vector<size_t> visited(words.size(), SIZE_MAX);
  for (size_t k = 0; k < num_merges; ++k) {
    std::optional<Candidate> best;
    while (!heap.empty()) {
      Candidate top = heap.top();
      heap.pop();
      auto it = counts.find(top.key);
      if (it != counts.end() && it->second == top.count && top.count > 0) {
        best = top;
        break;
      }
    }
    if (!best) break;

    const TokenId left = key_left(best->key);
    const TokenId right = key_right(best->key);
    vocab.push_merge(left, right);
    const TokenId result = vocab.merges().back().result;

    std::vector<uint32_t> affected = std::move(where[best->key]);
    where.erase(best->key);
    std::vector<uint64_t> touched;
    for (uint32_t w : affected) {
      if (visited[w] == k) continue;
      visited[w] = k;
      Word& word = words[w];
      std::vector<TokenId> before = word.syms;
      if (!merge_in_place(word.syms, left, right, result)) continue;
      const auto n = static_cast<int64_t>(word.count);
      for (size_t i = 0; i + 1 < before.size(); ++i) {
        const uint64_t key = pair_key(before[i], before[i + 1]);
        counts[key] -= n;
        touched.push_back(key);
      }
      for (size_t i = 0; i + 1 < word.syms.size(); ++i) {
        const uint64_t key = pair_key(word.syms[i], word.syms[i + 1]);
        counts[key] += n;
        touched.push_back(key);
        auto& list = where[key];
        if (list.empty() || list.back() != w) list.push_back(w);
      }
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (uint64_t key : touched) {
      const int64_t n = counts[key];
      if (n > 0) heap.push({n, key});
    }
  }
  return vocab;
}

TokenSequence encode(const Vocabulary& vocab, std::string_view source) {
  TokenSequence out;
  std::vector<TokenId> syms;
  std::vector<size_t> starts;
  for (const ByteRange& word : pre_tokenize(source)) {
    syms.clear();
    starts.clear();
    for (size_t i = word.begin; i < word.end; ++i) {
      syms.push_back(static_cast<unsigned char>(source[i]));
      starts.push_back(i);
    }
    while (syms.size() > 1) {
      uint32_t best_rank = UINT32_MAX;
      TokenId best_result = 0;
      size_t best_at = 0;
      for (size_t i = 0; i + 1 < syms.size(); ++i) {
        if (auto m = vocab.merge_rank(syms[i], syms[i + 1]);
            m && m->first < best_rank) {
          best_rank = m->first;
          best_result = m->second;
          best_at = i;
        }
      }
      if (best_rank == UINT32_MAX) break;
      const TokenId left = syms[best_at];
      const TokenId right = syms[best_at + 1];
      merge_in_place(syms, left, right, best_result, &starts);
    }
    for (size_t i = 0; i < syms.size(); ++i) {
      out.ids.push_back(syms[i]);
      out.spans.push_back(
          {starts[i], i + 1 < syms.size() ? starts[i + 1] : word.end});
    }
  }
  return out;
}

std::string decode(const Vocabulary& vocab, std::span<const TokenId> ids) {
  std::string out;
  for (TokenId id : ids) out += vocab.unit(id);
  return out;
}

}  // namespace vulaste::tokenizer
