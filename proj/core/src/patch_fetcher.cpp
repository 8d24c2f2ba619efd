#include "vulaste/fetcher.hpp"

#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "vulaste/dataset.hpp"
#include "vulaste/digest.hpp"
#include "vulaste/error.hpp"

namespace vulaste::dataset {
namespace {

struct CommitRef {
  std::string owner, repo, sha;
};

CommitRef parse_commit_url(std::string_view url) {
  constexpr std::string_view prefix = "https://github.com/";
  if (!url.starts_with(prefix)) {
    fail(ErrorCode::kInvalidInput, "not a GitHub commit URL: " + std::string(url));
  }
  url.remove_prefix(prefix.size());
  std::vector<std::string> parts;
  size_t start = 0;
  while (start <= url.size()) {
    const size_t slash = url.find('/', start);
    const size_t end = slash == std::string_view::npos ? url.size() : slash;
    if (end > start) parts.emplace_back(url.substr(start, end - start));
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  if (parts.size() != 4 || parts[2] != "commit") {
    fail(ErrorCode::kInvalidInput, "not a GitHub commit URL: " + std::string(url));
  }
  return {parts[0], parts[1], commit_for_ref(parts[3])};
}

}  // namespace

HttpTransport https_transport(std::string user_agent, std::string token) {
  return [user_agent = std::move(user_agent), token = std::move(token)](const std::string& url) {
    const size_t scheme_end = url.find("://");
    const size_t path_start =
        scheme_end == std::string::npos ? std::string::npos : url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
      fail(ErrorCode::kInvalidInput, "bad URL: " + url);
    }
    const std::string origin = url.substr(0, path_start);
    httplib::Client client(origin);
    client.set_follow_location(true);
    httplib::Headers headers{{"User-Agent", user_agent}};
    if (!token.empty() && origin == "https://api.github.com") {
      headers.emplace("Authorization", "Bearer " + token);
    }
    auto res = client.Get(url.substr(path_start), headers);
    if (!res) {
      fail(ErrorCode::kIo, "request to " + url + " failed: " + httplib::to_string(res.error()));
    }
    return HttpResponse{res->status, res->body};
  };
}

PatchFetcher::PatchFetcher(HttpTransport transport, FetcherOptions options, Sleep sleep)
    : transport_(std::move(transport)), options_(std::move(options)), sleep_(std::move(sleep)) {
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string PatchFetcher::get(const std::string& url) {
  std::filesystem::path cached;
  if (!options_.cache_dir.empty()) {
    cached = options_.cache_dir / sha256_hex(url);
    if (std::filesystem::exists(cached)) return read_file(cached.string());
  }
  if (any_request_) {
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - last_);
    if (elapsed < options_.min_interval) sleep_(options_.min_interval - elapsed);
  }
  any_request_ = true;
  ++requests_;
  const HttpResponse res = transport_(url);
  last_ = std::chrono::steady_clock::now();
  if (res.status != 200) {
    fail(ErrorCode::kIo, "GET " + url + " returned " + std::to_string(res.status));
  }
  if (!cached.empty()) {
    std::filesystem::create_directories(options_.cache_dir);
    write_file(cached.string(), res.body);
  }
  return res.body;
}

std::string PatchFetcher::fetch(std::string_view commit_url,
                                const std::filesystem::path& patch_dir) {
  const CommitRef ref = parse_commit_url(commit_url);
  const std::string base = "https://github.com/" + ref.owner + "/" + ref.repo;
  const std::string diff = get(base + "/commit/" + ref.sha + ".diff");

  std::string parent;
  try {
    const auto meta = nlohmann::json::parse(
        get("https://api.github.com/repos/" + ref.owner + "/" + ref.repo + "/commits/" + ref.sha));
    parent = meta.at("parents").at(0).at("sha").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kIo, "commit metadata for " + ref.sha + ": " + e.what());
  }

  std::filesystem::create_directories(patch_dir);
  for (const FileDiff& file : parse_unified_diff(diff, ref.sha).files) {
    if (file.old_path == kDevNull) continue;
    const std::filesystem::path rel(file.old_path);
    if (rel.is_absolute() || rel.lexically_normal().string().starts_with("..")) {
      fail(ErrorCode::kInvalidInput, "unsafe path in diff: " + file.old_path);
    }
    const std::string body = get("https://raw.githubusercontent.com/" + ref.owner + "/" +
                                 ref.repo + "/" + parent + "/" + file.old_path);
    const std::filesystem::path out = patch_dir / ref.sha / rel;
    std::filesystem::create_directories(out.parent_path());
    write_file(out.string(), body);
  }
  write_file((patch_dir / (ref.sha + ".diff")).string(), diff);
  return ref.sha;
}

}  // namespace vulaste::dataset
