#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace vulaste {

// Half-open byte interval [begin, end) into a source buffer.
struct ByteRange {
  size_t begin = 0;
  size_t end = 0;

  size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
  bool contains(size_t offset) const { return begin <= offset && offset < end; }
  friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

}  // namespace vulaste

namespace vulaste::tokenizer {

using TokenId = uint32_t;

struct SpecialIds {
  TokenId bos;
  TokenId eos;
  TokenId pad;
  TokenId unknown_kind;
};

struct TrainOptions;

struct Merge {
  TokenId left;
  TokenId right;
  TokenId result;
};

// Byte-level BPE vocabulary: ids [0, 256) are the raw bytes, followed by the
// special tokens, followed by one id per distinct unit created by a merge.
class Vocabulary {
 public:
  static constexpr size_t kBaseSize = 256;
  static constexpr size_t kNumSpecials = 4;
  static constexpr SpecialIds kSpecials{256, 257, 258, 259};

  // Base bytes and specials only.
  Vocabulary();

  // Replays `merges` in order. Throws Error(kInvalidInput) if a merge refers
  // to a unit no earlier merge (or the byte base) produced.
  static Vocabulary from_merges(
      std::span<const std::pair<std::string, std::string>> merges);

  size_t size() const { return units_.size(); }
  size_t base_size() const { return kBaseSize; }
  const SpecialIds& specials() const { return kSpecials; }
  const std::vector<Merge>& merges() const { return merges_; }

  bool is_special(TokenId id) const {
    return id >= kBaseSize && id < kBaseSize + kNumSpecials;
  }
  bool contains(TokenId id) const { return id < units_.size(); }

  // Byte content of a unit. Special tokens have empty content.
  // Throws Error(kInvalidInput) for ids outside the vocabulary.
  const std::string& unit(TokenId id) const;
  std::optional<TokenId> find(std::string_view unit) const;

  // Rank and result of merging (left, right), if that merge exists.
  std::optional<std::pair<uint32_t, TokenId>> merge_rank(TokenId left,
                                                         TokenId right) const;

  // Text form: a header line followed by one "left right" merge per line.
  std::string serialize() const;
  // Throws Error(kParse) with the offending line number.
  static Vocabulary parse(std::string_view text);

  // SHA-256 of serialize(); identifies the vocabulary inside checkpoints.
  std::string content_hash() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.units_ == b.units_ && a.merge_pairs_ == b.merge_pairs_;
  }

 private:
  friend Vocabulary train_bpe(std::span<const std::string> corpus,
                              size_t num_merges, const TrainOptions&);

  // Appends a merge, creating a new unit unless left+right already exists.
  void push_merge(TokenId left, TokenId right);

  std::vector<std::string> units_;
  std::unordered_map<std::string, TokenId> token_table_;
  std::vector<Merge> merges_;
  std::vector<std::pair<TokenId, TokenId>> merge_pairs_;
  std::unordered_map<uint64_t, std::pair<uint32_t, TokenId>> merge_index_;
};

struct TokenSequence {
  std::vector<TokenId> ids;
  // One span per id; special tokens carry an empty span.
  std::vector<ByteRange> spans;

  size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
};

enum class ByteClass { kWord, kSpace, kOther };
ByteClass classify(unsigned char byte);

// Splits `source` at byte-class transitions. Merges never cross these
// boundaries.
std::vector<ByteRange> pre_tokenize(std::string_view source);

struct TrainOptions {
  // Shards used for the initial pair count; the reduced count is identical
  // to a single-threaded count.
  unsigned threads = 1;
};

// Greedy most-frequent-pair training. Ties go to the lexicographically
// smallest (left bytes, right bytes). Stops early once no adjacent pair is
// left. Throws Error(kInvalidInput) on an empty corpus.
Vocabulary train_bpe(std::span<const std::string> corpus, size_t num_merges,
                     const TrainOptions& options = {});

TokenSequence encode(const Vocabulary& vocab, std::string_view source);

// Throws Error(kInvalidInput) on ids unknown to `vocab`.
std::string decode(const Vocabulary& vocab, std::span<const TokenId> ids);
inline std::string decode(const Vocabulary& vocab, const TokenSequence& tokens) {
  return decode(vocab, tokens.ids);
}

// "\xHH" escaping used by the vocabulary file.
std::string escape_unit(std::string_view unit);
std::optional<std::string> unescape_unit(std::string_view text);

}  // namespace vulaste::tokenizer
