#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "vulaste/dataset.hpp"
#include "vulaste/digest.hpp"
#include "vulaste/error.hpp"

namespace vulaste::dataset {

AdvisoryLoad parse_advisories(std::string_view text) {
  AdvisoryLoad out;
  std::set<std::string, std::less<>> seen;
  size_t line_no = 0;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    AdvisoryRecord rec;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      if (!j.is_object()) fail(ErrorCode::kParse, "not an object");
      if (j.at("v").get<int>() != kAdvisorySchemaVersion) {
        fail(ErrorCode::kParse, "unsupported schema version");
      }
      rec.id = j.at("id").get<std::string>();
      rec.languages = j.value("languages", std::vector<std::string>{});
      rec.fix_refs = j.value("fix_refs", std::vector<std::string>{});
      rec.published = j.value("published", std::string{});
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParse, "advisory record " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      fail(ErrorCode::kParse, "advisory record " + std::to_string(line_no) + ": " + e.what());
    }
    if (rec.id.empty()) {
      fail(ErrorCode::kParse, "advisory record " + std::to_string(line_no) + ": empty id");
    }
    if (!seen.insert(rec.id).second) {
      ++out.duplicates;
      out.warnings.push_back("duplicate advisory " + rec.id + " at record " +
                             std::to_string(line_no) + " ignored");
      continue;
    }
    std::erase_if(rec.fix_refs, [](const std::string& r) {
      return r.find_first_not_of(" \t") == std::string::npos;
    });
    if (rec.fix_refs.empty()) {
      ++out.excluded_without_patch;
      continue;
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

AdvisoryLoad load_advisories(const std::filesystem::path& path) {
  return parse_advisories(read_file(path.string()));
}

std::string commit_for_ref(std::string_view ref) {
  while (ref.ends_with('/')) ref.remove_suffix(1);
  const size_t slash = ref.find_last_of('/');
  if (slash != std::string_view::npos) ref = ref.substr(slash + 1);
  for (std::string_view suffix : {".diff", ".patch"}) {
    if (ref.ends_with(suffix)) ref.remove_suffix(suffix.size());
  }
  return std::string(ref);
}

std::optional<std::string> language_for_path(std::string_view path) {
  const size_t slash = path.find_last_of('/');
  const std::string_view name = slash == std::string_view::npos ? path : path.substr(slash + 1);
  const size_t dot = name.find_last_of('.');
  if (dot == std::string_view::npos || dot == 0) return std::nullopt;
  std::string ext(name.substr(dot + 1));
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == "c" || ext == "h") return "c";
  if (ext == "cc" || ext == "cpp" || ext == "cxx" || ext == "hpp" || ext == "hh" ||
      ext == "hxx") {
    return "cpp";
  }
  if (ext == "java") return "java";
  if (ext == "py") return "python";
  if (ext == "go") return "go";
  return std::nullopt;
}

PatchSet filter_code_files(const PatchSet& patch, const std::set<std::string>& targets) {
  PatchSet out;
  out.commit = patch.commit;
  for (const FileDiff& f : patch.files) {
    const auto lang = language_for_path(f.path());
    if (lang && targets.contains(*lang)) out.files.push_back(f);
  }
  return out;
}

}  // namespace vulaste::dataset
