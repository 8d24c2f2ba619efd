#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vulaste/syntax.hpp"

namespace vulaste::dataset {

// ------------------------------------------------------------- unified diff

struct HunkLine {
  char kind = ' ';   // ' ' context, '-' removed, '+' added
  std::string text;  // including the line terminator, if the line had one
};

struct Hunk {
  size_t old_start = 0;
  size_t old_count = 0;
  size_t new_start = 0;
  size_t new_count = 0;
  std::vector<HunkLine> lines;
};

inline constexpr std::string_view kDevNull = "/dev/null";

struct FileDiff {
  std::string old_path;  // kDevNull for added files
  std::string new_path;  // kDevNull for deleted files
  std::vector<Hunk> hunks;

  // The path used for language detection and provenance.
  const std::string& path() const { return new_path == kDevNull ? old_path : new_path; }
};

struct PatchSet {
  std::string commit;
  std::vector<FileDiff> files;
};

// Parses `git diff` / `diff -u` output. Throws Error(kParse) with the line
// number on malformed hunks.
PatchSet parse_unified_diff(std::string_view text, std::string commit = {});

// Applies the hunks at their stated positions. Throws Error(kUnreconstructable)
// when a context or removed line does not match.
std::string apply_diff(std::string_view pre, const FileDiff& diff);
std::string reverse_apply_diff(std::string_view post, const FileDiff& diff);

struct Versions {
  std::string pre;
  std::string post;
};

// post = apply(pre); also checks that reverse-applying recovers `pre`.
Versions reconstruct_versions(std::string_view pre_image, const FileDiff& diff);

// Old-side line numbers (1-based) of removed lines, and insertion points:
// an insertion point x means lines were added between old lines x-1 and x.
struct ChangedLines {
  std::set<size_t> removed;
  std::set<size_t> insertions;
};

ChangedLines changed_lines(const FileDiff& diff);

// ---------------------------------------------------------------- advisories

struct AdvisoryRecord {
  std::string id;
  std::vector<std::string> languages;
  std::vector<std::string> fix_refs;
  std::string published;
};

struct AdvisoryLoad {
  std::vector<AdvisoryRecord> records;
  size_t excluded_without_patch = 0;
  size_t duplicates = 0;
  std::vector<std::string> warnings;
};

inline constexpr int kAdvisorySchemaVersion = 1;

// One JSON object per line: {"v":1,"id":...,"languages":[...],
// "fix_refs":[...],"published":...}. Blank lines are skipped. Records without
// fix references are excluded and counted; repeated ids keep the first record.
// Throws Error(kParse) naming the 1-based record line.
AdvisoryLoad parse_advisories(std::string_view text);
AdvisoryLoad load_advisories(const std::filesystem::path& path);

// Commit id named by a fix reference: the last URL or path segment without a
// .diff/.patch suffix.
std::string commit_for_ref(std::string_view ref);

// Language tag for a file path by extension, if it is a known code file.
std::optional<std::string> language_for_path(std::string_view path);

// Keeps the files whose extension maps to one of `targets`.
PatchSet filter_code_files(const PatchSet& patch, const std::set<std::string>& targets);

// ------------------------------------------------------------------ samples

enum class Side { kPre, kPost };
std::string_view to_string(Side side);

struct Provenance {
  std::string advisory;
  std::string commit;
  std::string path;
  std::string function;
  Side side = Side::kPre;
  size_t first_line = 0;  // 1-based line range of the function in its file
  size_t last_line = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct SampleRecord {
  std::string id;  // SHA-256 of language, NUL, source
  std::string language;
  std::string source;
  bool vulnerable = false;
  std::vector<Provenance> provenance;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

std::string sample_id(std::string_view language, std::string_view source);

struct LabelOptions {
  // Label every pre-side function of a patched file vulnerable instead of only
  // those touched by a hunk.
  bool whole_file = false;
};

// Pre-side functions touched by the diff are vulnerable; everything else is
// non-vulnerable. Output order: pre-side functions, then post-side, each in
// source order. Not deduplicated.
std::vector<SampleRecord> emit_samples(std::string_view pre, std::string_view post,
                                       std::string_view language, const FileDiff& diff,
                                       const Provenance& origin,
                                       const syntax::ParserRegistry& registry,
                                       const LabelOptions& options = {});

// Collapses samples by id in first-seen order, merging provenance. A label
// conflict resolves to vulnerable and is counted.
class SampleSet {
 public:
  void add(SampleRecord sample);
  const std::vector<SampleRecord>& samples() const { return samples_; }
  size_t label_conflicts() const { return conflicts_; }

 private:
  std::vector<SampleRecord> samples_;
  std::map<std::string, size_t, std::less<>> index_;
  size_t conflicts_ = 0;
};

// True when a removed line or an interior insertion point falls inside
// [first_line, last_line].
bool touches(const ChangedLines& changes, size_t first_line, size_t last_line);

// Re-derives each vulnerable sample's label from its provenance and diff.
// Returns the ids that fail.
std::vector<std::string> verify_labels(
    std::span<const SampleRecord> samples,
    const std::function<std::optional<FileDiff>(const Provenance&)>& diff_for);

// ------------------------------------------------------------------ builder

struct BuildOptions {
  std::set<std::string> languages;
  LabelOptions label;
};

struct BuildReport {
  size_t advisories = 0;
  size_t excluded_without_patch = 0;
  size_t duplicate_ids = 0;
  size_t missing_patches = 0;
  size_t files_kept = 0;
  size_t files_filtered = 0;
  size_t files_unsupported = 0;  // code files whose language has no parser
  size_t unreconstructable = 0;
  size_t samples = 0;
  size_t vulnerable = 0;
  size_t non_vulnerable = 0;
  size_t label_conflicts = 0;
  std::vector<std::string> warnings;
};

struct BuildResult {
  std::vector<SampleRecord> samples;
  BuildReport report;
};

// Patch bundle layout: <patch_dir>/<commit>.diff plus pre-images at
// <patch_dir>/<commit>/<old path>. Advisories are processed in id order.
BuildResult build_dataset(const AdvisoryLoad& advisories,
                          const std::filesystem::path& patch_dir,
                          const BuildOptions& options,
                          const syntax::ParserRegistry& registry);

// One JSON object per line with keys id, language, label, source_b64 and
// provenance, in that order.
void write_samples(std::ostream& out, std::span<const SampleRecord> samples);
// Throws Error(kInvalidDataset) naming the 1-based line.
std::vector<SampleRecord> read_samples(std::string_view text);
std::vector<SampleRecord> load_samples(const std::filesystem::path& path);

// -------------------------------------------------------------------- split

enum class SplitUnit { kAdvisory, kSample };

struct SplitSpec {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
  uint64_t seed = 1;
  SplitUnit unit = SplitUnit::kAdvisory;

  // Throws Error(kInvalidSplit) unless ratios are non-negative and sum to 1.
  void validate() const;
};

struct Split {
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> validation;
  std::vector<SampleRecord> test;
};

// Shuffles split units (advisory = smallest advisory id in a sample's
// provenance) with the seed, then takes round(ratio * units) for train and
// validation and the rest for test. Samples keep their input order inside a
// partition. Throws Error(kInvalidSplit) if a partition with a positive ratio
// comes out empty.
Split split(std::span<const SampleRecord> samples, const SplitSpec& spec);

// ---------------------------------------------------------------- statistics

inline constexpr std::array<double, 5> kLengthEdges{0, 512, 1024, 2048, 5096};

struct LengthStats {
  std::array<size_t, kLengthEdges.size()> counts{};
};

// Length in characters (UTF-8 code points).
size_t char_length(std::string_view source);
LengthStats length_stats(std::span<const SampleRecord> samples);
std::string format_length_table(const LengthStats& stats);

}  // namespace vulaste::dataset
