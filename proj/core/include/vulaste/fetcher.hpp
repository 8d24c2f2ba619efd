#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace vulaste::dataset {

struct HttpResponse {
  int status = 0;
  std::string body;
};

// GET of an absolute URL.
using HttpTransport = std::function<HttpResponse(const std::string& url)>;

// HTTPS transport that follows redirects. `token`, when set, is sent as a
// bearer token (only to api.github.com).
HttpTransport https_transport(std::string user_agent = "vulaste", std::string token = {});

struct FetcherOptions {
  std::filesystem::path cache_dir;  // empty: no cache
  std::chrono::milliseconds min_interval{1000};
};

// Downloads fix commits from GitHub into the patch bundle layout read by
// build_dataset: the commit diff plus the parent-side pre-image of every
// modified file. Responses are cached on disk by URL and network requests are
// spaced at least `min_interval` apart.
class PatchFetcher {
 public:
  using Sleep = std::function<void(std::chrono::milliseconds)>;

  PatchFetcher(HttpTransport transport, FetcherOptions options, Sleep sleep = {});

  // `commit_url` is https://github.com/<owner>/<repo>/commit/<sha>. Returns
  // the commit id. Throws Error(kInvalidInput) on other URLs and Error(kIo) on
  // failed requests.
  std::string fetch(std::string_view commit_url, const std::filesystem::path& patch_dir);

  // Cached, rate-limited GET returning the body of a 200 response.
  std::string get(const std::string& url);

  size_t network_requests() const { return requests_; }

 private:
  HttpTransport transport_;
  FetcherOptions options_;
  Sleep sleep_;
  std::chrono::steady_clock::time_point last_{};
  bool any_request_ = false;
  size_t requests_ = 0;
};

}  // namespace vulaste::dataset
