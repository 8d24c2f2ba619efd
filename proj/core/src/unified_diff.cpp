#include <charconv>
#include <vector>

#include "vulaste/dataset.hpp"
#include "vulaste/error.hpp"

namespace vulaste::dataset {
namespace {

// Splits into lines that keep their terminators.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  size_t start = 0;
  while (start < text.size()) {
    const size_t nl = text.find('\n', start);
    const size_t end = nl == std::string_view::npos ? text.size() : nl + 1;
    lines.push_back(text.substr(start, end - start));
    start = end;
  }
  return lines;
}

std::string_view strip_newline(std::string_view line) {
  if (line.ends_with('\n')) line.remove_suffix(1);
  if (line.ends_with('\r')) line.remove_suffix(1);
  return line;
}

[[noreturn]] void bad_diff(size_t line, const std::string& why) {
  fail(ErrorCode::kParse, "diff line " + std::to_string(line) + ": " + why);
}

std::string header_path(std::string_view rest) {
  // "a/path<TAB>timestamp" -> "path"
  const size_t tab = rest.find('\t');
  if (tab != std::string_view::npos) rest = rest.substr(0, tab);
  if (rest == kDevNull) return std::string(kDevNull);
  if (rest.starts_with("a/") || rest.starts_with("b/")) rest.remove_prefix(2);
  return std::string(rest);
}

bool parse_number(std::string_view text, size_t& out) {
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

// "-a,b" or "-a" (count 1).
bool parse_range(std::string_view text, char sign, size_t& start, size_t& count) {
  if (text.empty() || text.front() != sign) return false;
  text.remove_prefix(1);
  const size_t comma = text.find(',');
  if (comma == std::string_view::npos) {
    count = 1;
    return parse_number(text, start);
  }
  return parse_number(text.substr(0, comma), start) &&
         parse_number(text.substr(comma + 1), count);
}

Hunk parse_hunk_header(std::string_view line, size_t line_no) {
  // @@ -a,b +c,d @@ optional section heading
  line = strip_newline(line);
  const size_t close = line.find(" @@", 3);
  if (!line.starts_with("@@ ") || close == std::string_view::npos) {
    bad_diff(line_no, "malformed hunk header");
  }
  const std::string_view ranges = line.substr(3, close - 3);
  const size_t space = ranges.find(' ');
  Hunk h;
  if (space == std::string_view::npos ||
      !parse_range(ranges.substr(0, space), '-', h.old_start, h.old_count) ||
      !parse_range(ranges.substr(space + 1), '+', h.new_start, h.new_count)) {
    bad_diff(line_no, "malformed hunk ranges");
  }
  return h;
}

// Shared by forward and reverse application: `keep` lines must match and are
// copied, `drop` lines must match and are skipped, `add` lines are emitted.
std::string apply(std::string_view source, const FileDiff& diff, bool reverse) {
  const std::vector<std::string_view> lines = split_lines(source);
  const char drop = reverse ? '+' : '-';
  std::string out;
  size_t cursor = 0;  // next unconsumed source line, 0-based
  for (size_t h = 0; h < diff.hunks.size(); ++h) {
    const Hunk& hunk = diff.hunks[h];
    const size_t start = reverse ? hunk.new_start : hunk.old_start;
    const size_t count = reverse ? hunk.new_count : hunk.old_count;
    // A zero-length side names the line after which the hunk applies.
    const size_t first = count == 0 ? start : start - 1;
    if (start == 0 && count != 0) {
      fail(ErrorCode::kUnreconstructable, "hunk " + std::to_string(h + 1) + " starts at line 0");
    }
    if (first < cursor || first > lines.size()) {
      fail(ErrorCode::kUnreconstructable,
           "hunk " + std::to_string(h + 1) + " is out of order or past the end");
    }
    for (; cursor < first; ++cursor) out += lines[cursor];
    for (const HunkLine& l : hunk.lines) {
      if (l.kind == ' ' || l.kind == drop) {
        if (cursor >= lines.size() || lines[cursor] != l.text) {
          fail(ErrorCode::kUnreconstructable,
               "hunk " + std::to_string(h + 1) + " does not match line " +
                   std::to_string(cursor + 1));
        }
        if (l.kind == ' ') out += lines[cursor];
        ++cursor;
      } else {
        out += l.text;
      }
    }
  }
  for (; cursor < lines.size(); ++cursor) out += lines[cursor];
  return out;
}

}  // namespace

PatchSet parse_unified_diff(std::string_view text, std::string commit) {
  PatchSet patch;
  patch.commit = std::move(commit);
  const std::vector<std::string_view> lines = split_lines(text);
  FileDiff* file = nullptr;
  Hunk* hunk = nullptr;
  size_t old_left = 0, new_left = 0;
  HunkLine* last = nullptr;

  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    const size_t line_no = i + 1;
    if (hunk != nullptr && (old_left > 0 || new_left > 0)) {
      const char kind = line.front();
      if (strip_newline(line).empty()) {
        // Some tools drop the leading space of blank context lines.
        hunk->lines.push_back({' ', std::string(line)});
      } else if (kind == ' ' || kind == '-' || kind == '+') {
        hunk->lines.push_back({kind, std::string(line.substr(1))});
      } else if (kind == '\\') {
        if (last == nullptr) bad_diff(line_no, "stray no-newline marker");
        if (last->text.ends_with('\n')) last->text.pop_back();
        continue;
      } else {
        bad_diff(line_no, "hunk shorter than its header says");
      }
      last = &hunk->lines.back();
      const char k = last->kind;
      if (k != '+') {
        if (old_left == 0) bad_diff(line_no, "hunk longer than its header says");
        --old_left;
      }
      if (k != '-') {
        if (new_left == 0) bad_diff(line_no, "hunk longer than its header says");
        --new_left;
      }
      continue;
    }
    if (line.starts_with("\\")) {
      if (last == nullptr) bad_diff(line_no, "stray no-newline marker");
      if (last->text.ends_with('\n')) last->text.pop_back();
      continue;
    }
    last = nullptr;
    if (line.starts_with("diff ")) {
      patch.files.emplace_back();
      file = &patch.files.back();
      hunk = nullptr;
    } else if (line.starts_with("--- ")) {
      const bool fresh = file == nullptr || !file->hunks.empty() || !file->old_path.empty();
      if (fresh) {
        patch.files.emplace_back();
        file = &patch.files.back();
      }
      file->old_path = header_path(strip_newline(line.substr(4)));
      hunk = nullptr;
    } else if (line.starts_with("+++ ")) {
      if (file == nullptr || file->old_path.empty()) bad_diff(line_no, "'+++' without '---'");
      file->new_path = header_path(strip_newline(line.substr(4)));
    } else if (line.starts_with("@@")) {
      if (file == nullptr || file->new_path.empty()) bad_diff(line_no, "hunk before file header");
      file->hunks.push_back(parse_hunk_header(line, line_no));
      hunk = &file->hunks.back();
      old_left = hunk->old_count;
      new_left = hunk->new_count;
    }
    // Other lines (index, mode, rename, similarity, commit text) are ignored.
  }
  if (old_left > 0 || new_left > 0) {
    bad_diff(lines.size(), "diff ends inside a hunk");
  }
  std::erase_if(patch.files, [](const FileDiff& f) { return f.old_path.empty(); });
  return patch;
}

std::string apply_diff(std::string_view pre, const FileDiff& diff) {
  return apply(pre, diff, false);
}

std::string reverse_apply_diff(std::string_view post, const FileDiff& diff) {
  return apply(post, diff, true);
}

Versions reconstruct_versions(std::string_view pre_image, const FileDiff& diff) {
  Versions v{std::string(pre_image), apply_diff(pre_image, diff)};
  if (reverse_apply_diff(v.post, diff) != v.pre) {
    fail(ErrorCode::kUnreconstructable, "reverse application does not recover the pre-image");
  }
  return v;
}

ChangedLines changed_lines(const FileDiff& diff) {
  ChangedLines out;
  for (const Hunk& hunk : diff.hunks) {
    size_t old_line = hunk.old_count == 0 ? hunk.old_start + 1 : hunk.old_start;
    for (const HunkLine& l : hunk.lines) {
      if (l.kind == '+') {
        out.insertions.insert(old_line);
      } else {
        if (l.kind == '-') out.removed.insert(old_line);
        ++old_line;
      }
    }
  }
  return out;
}

bool touches(const ChangedLines& changes, size_t first_line, size_t last_line) {
  if (first_line == 0 || last_line < first_line) return false;
  const auto r = changes.removed.lower_bound(first_line);
  if (r != changes.removed.end() && *r <= last_line) return true;
  const auto ins = changes.insertions.upper_bound(first_line);
  return ins != changes.insertions.end() && *ins <= last_line;
}

}  // namespace vulaste::dataset
