#include <algorithm>
#include <ostream>

#include <nlohmann/json.hpp>

#include "vulaste/dataset.hpp"
#include "vulaste/digest.hpp"
#include "vulaste/error.hpp"

namespace vulaste::dataset {
namespace {

// 1-based line number of a byte offset.
class LineIndex {
 public:
  explicit LineIndex(std::string_view text) {
    for (size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '\n') breaks_.push_back(i);
    }
  }
  size_t line_of(size_t offset) const {
    return static_cast<size_t>(std::lower_bound(breaks_.begin(), breaks_.end(), offset) -
                               breaks_.begin()) +
           1;
  }

 private:
  std::vector<size_t> breaks_;
};

bool safe_relative(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.empty() || p.is_absolute()) return false;
  for (const auto& part : p) {
    if (part == "..") return false;
  }
  return true;
}

}  // namespace

std::string_view to_string(Side side) { return side == Side::kPre ? "pre" : "post"; }

std::string sample_id(std::string_view language, std::string_view source) {
  std::string key(language);
  key.push_back('\0');
  key.append(source);
  return sha256_hex(key);
}

std::vector<SampleRecord> emit_samples(std::string_view pre, std::string_view post,
                                       std::string_view language, const FileDiff& diff,
                                       const Provenance& origin,
                                       const syntax::ParserRegistry& registry,
                                       const LabelOptions& options) {
  const ChangedLines changes = changed_lines(diff);
  const bool patched = !diff.hunks.empty();
  std::vector<SampleRecord> out;
  auto emit_side = [&](std::string_view source, Side side) {
    const syntax::SyntaxTree tree = syntax::parse(registry, source, language);
    const LineIndex lines(source);
    for (const syntax::FunctionSlice& fn :
         syntax::extract_functions(tree, source, registry.function_kinds(language))) {
      if (fn.span.empty()) continue;
      Provenance p = origin;
      p.function = fn.name;
      p.side = side;
      p.first_line = lines.line_of(fn.span.begin);
      p.last_line = lines.line_of(fn.span.end - 1);
      SampleRecord rec;
      rec.language = std::string(language);
      rec.source = fn.source;
      rec.id = sample_id(language, fn.source);
      rec.vulnerable = side == Side::kPre &&
                       (options.whole_file ? patched
                                           : touches(changes, p.first_line, p.last_line));
      rec.provenance.push_back(std::move(p));
      out.push_back(std::move(rec));
    }
  };
  emit_side(pre, Side::kPre);
  emit_side(post, Side::kPost);
  return out;
}

void SampleSet::add(SampleRecord sample) {
  const auto it = index_.find(sample.id);
  if (it == index_.end()) {
    index_.emplace(sample.id, samples_.size());
    samples_.push_back(std::move(sample));
    return;
  }
  SampleRecord& kept = samples_[it->second];
  if (kept.vulnerable != sample.vulnerable) {
    ++conflicts_;
    kept.vulnerable = true;
  }
  for (Provenance& p : sample.provenance) {
    if (std::find(kept.provenance.begin(), kept.provenance.end(), p) == kept.provenance.end()) {
      kept.provenance.push_back(std::move(p));
    }
  }
}

std::vector<std::string> verify_labels(
    std::span<const SampleRecord> samples,
    const std::function<std::optional<FileDiff>(const Provenance&)>& diff_for) {
  std::vector<std::string> bad;
  for (const SampleRecord& s : samples) {
    if (!s.vulnerable) continue;
    const bool ok = std::any_of(s.provenance.begin(), s.provenance.end(), [&](const Provenance& p) {
      if (p.side != Side::kPre) return false;
      const std::optional<FileDiff> diff = diff_for(p);
      return diff && touches(changed_lines(*diff), p.first_line, p.last_line);
    });
    if (!ok) bad.push_back(s.id);
  }
  return bad;
}

BuildResult build_dataset(const AdvisoryLoad& advisories,
                          const std::filesystem::path& patch_dir, const BuildOptions& options,
                          const syntax::ParserRegistry& registry) {
  if (options.languages.empty()) {
    fail(ErrorCode::kInvalidInput, "no target languages given");
  }
  BuildResult result;
  BuildReport& report = result.report;
  report.advisories = advisories.records.size();
  report.excluded_without_patch = advisories.excluded_without_patch;
  report.duplicate_ids = advisories.duplicates;
  report.warnings = advisories.warnings;

  std::vector<const AdvisoryRecord*> ordered;
  for (const AdvisoryRecord& r : advisories.records) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const AdvisoryRecord* a, const AdvisoryRecord* b) { return a->id < b->id; });

  SampleSet set;
  for (const AdvisoryRecord* rec : ordered) {
    for (const std::string& ref : rec->fix_refs) {
      const std::string commit = commit_for_ref(ref);
      const std::filesystem::path diff_path = patch_dir / (commit + ".diff");
      if (commit.empty() || !std::filesystem::exists(diff_path)) {
        ++report.missing_patches;
        report.warnings.push_back(rec->id + ": no patch file for " + ref);
        continue;
      }
      PatchSet patch;
      try {
        patch = parse_unified_diff(read_file(diff_path.string()), commit);
      } catch (const Error& e) {
        ++report.unreconstructable;
        report.warnings.push_back(rec->id + ": " + e.what());
        continue;
      }
      const PatchSet code = filter_code_files(patch, options.languages);
      report.files_filtered += patch.files.size() - code.files.size();

      for (const FileDiff& file : code.files) {
        const std::string language = *language_for_path(file.path());
        if (!registry.supports(language)) {
          ++report.files_unsupported;
          report.warnings.push_back(rec->id + ": no parser for " + file.path());
          continue;
        }
        std::string pre_image;
        if (file.old_path != kDevNull) {
          const std::filesystem::path pre_path = patch_dir / commit / file.old_path;
          if (!safe_relative(file.old_path) || !std::filesystem::exists(pre_path)) {
            ++report.unreconstructable;
            report.warnings.push_back(rec->id + ": no pre-image for " + file.old_path);
            continue;
          }
          pre_image = read_file(pre_path.string());
        }
        Versions versions;
        try {
          versions = reconstruct_versions(pre_image, file);
        } catch (const Error& e) {
          ++report.unreconstructable;
          report.warnings.push_back(rec->id + ": " + file.path() + ": " + e.what());
          continue;
        }
        ++report.files_kept;
        Provenance origin{rec->id, commit, file.path(), {}, Side::kPre, 0, 0};
        for (SampleRecord& s : emit_samples(versions.pre, versions.post, language, file,
                                            origin, registry, options.label)) {
          set.add(std::move(s));
        }
      }
    }
  }
  result.samples = set.samples();
  report.label_conflicts = set.label_conflicts();
  report.samples = result.samples.size();
  for (const SampleRecord& s : result.samples) {
    (s.vulnerable ? report.vulnerable : report.non_vulnerable)++;
  }
  return result;
}

void write_samples(std::ostream& out, std::span<const SampleRecord> samples) {
  for (const SampleRecord& s : samples) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["language"] = s.language;
    j["label"] = s.vulnerable ? "vulnerable" : "non-vulnerable";
    j["source_b64"] = base64_encode(s.source);
    nlohmann::ordered_json prov = nlohmann::ordered_json::array();
    for (const Provenance& p : s.provenance) {
      nlohmann::ordered_json e;
      e["advisory"] = p.advisory;
      e["commit"] = p.commit;
      e["path"] = p.path;
      e["function"] = p.function;
      e["side"] = std::string(to_string(p.side));
      e["lines"] = {p.first_line, p.last_line};
      prov.push_back(std::move(e));
    }
    j["provenance"] = std::move(prov);
    out << j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace) << '\n';
  }
}

std::vector<SampleRecord> read_samples(std::string_view text) {
  std::vector<SampleRecord> out;
  size_t line_no = 0;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "dataset line " + std::to_string(line_no) + ": ";
    SampleRecord s;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      s.id = j.at("id").get<std::string>();
      s.language = j.at("language").get<std::string>();
      const std::string label = j.at("label").get<std::string>();
      if (label != "vulnerable" && label != "non-vulnerable") {
        fail(ErrorCode::kInvalidDataset, where + "unknown label '" + label + "'");
      }
      s.vulnerable = label == "vulnerable";
      s.source = base64_decode(j.at("source_b64").get<std::string>());
      for (const auto& e : j.at("provenance")) {
        Provenance p;
        p.advisory = e.at("advisory").get<std::string>();
        p.commit = e.at("commit").get<std::string>();
        p.path = e.at("path").get<std::string>();
        p.function = e.at("function").get<std::string>();
        const std::string side = e.at("side").get<std::string>();
        if (side != "pre" && side != "post") {
          fail(ErrorCode::kInvalidDataset, where + "unknown side '" + side + "'");
        }
        p.side = side == "pre" ? Side::kPre : Side::kPost;
        const auto lines = e.value("lines", std::vector<size_t>{0, 0});
        if (lines.size() != 2) fail(ErrorCode::kInvalidDataset, where + "bad line range");
        p.first_line = lines[0];
        p.last_line = lines[1];
        s.provenance.push_back(std::move(p));
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kInvalidDataset, where + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInvalidDataset) throw;
      fail(ErrorCode::kInvalidDataset, where + e.what());
    }
    if (s.id != sample_id(s.language, s.source)) {
      fail(ErrorCode::kInvalidDataset, where + "id does not match the content");
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SampleRecord> load_samples(const std::filesystem::path& path) {
  return read_samples(read_file(path.string()));
}

}  // namespace vulaste::dataset
