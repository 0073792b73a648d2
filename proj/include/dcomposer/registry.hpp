#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace dcomposer {

struct HttpResponse {
  int status = 0;
  std::string body;
};

// GET-only transport so tests can replay recorded responses offline.
// Implementations throw Error(NetworkError) when no response was received.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse get(const std::string& path,
                           const std::multimap<std::string, std::string>& query) = 0;
};

inline constexpr const char* kDefaultRegistryUrl = "https://hub.docker.com";

// Base URL from DCOMPOSER_REGISTRY_URL, else the public Hub.
std::string registry_url_from_env();

// `base_url` is scheme://host[:port]. Every request carries `timeout` for
// connect, read and write.
std::unique_ptr<HttpTransport> make_http_transport(
    const std::string& base_url,
    std::chrono::milliseconds timeout = std::chrono::seconds(10));

struct ImageSummary {
  std::string repository;
  std::string description;
  bool is_official = false;
  std::uint64_t star_count = 0;
  std::uint64_t pull_count = 0;
  bool operator==(const ImageSummary&) const = default;
};

struct SearchResult {
  std::vector<ImageSummary> images;
  bool stale = false;
};

struct TagList {
  std::vector<std::string> tags;
  bool stale = false;
};

struct RegistryOptions {
  std::chrono::seconds ttl = std::chrono::minutes(10);
  std::function<std::chrono::steady_clock::time_point()> clock =
      [] { return std::chrono::steady_clock::now(); };
};

// Docker Hub v2 search and tag listing with a TTL cache. When the transport
// fails and an expired entry exists, that entry is returned with stale=true.
// Safe for concurrent use; requests are not serialized.
class RegistryClient {
 public:
  explicit RegistryClient(std::shared_ptr<HttpTransport> transport,
                          RegistryOptions options = {});

  // page >= 1, page_size in 1..100. Throws EmptyQuery, InvalidValue,
  // NetworkError, RegistryError.
  SearchResult search_images(const std::string& query, int page = 1,
                             int page_size = 25);

  // Official images are addressed as "library/<name>". Throws
  // UnknownRepository, InvalidValue, NetworkError, RegistryError.
  TagList list_tags(const std::string& repository, int page = 1,
                    int page_size = 100);

 private:
  struct Entry {
    std::string body;
    std::chrono::steady_clock::time_point fetched_at;
  };

  // Returns the response body and whether it came from an expired entry.
  // Bodies are cached only after `check` accepts them.
  std::pair<std::string, bool> fetch(
      const std::string& cache_key, const std::string& path,
      const std::multimap<std::string, std::string>& query, bool not_found_is_unknown,
      const std::function<void(const std::string&)>& check);

  std::shared_ptr<HttpTransport> transport_;
  RegistryOptions options_;
  std::mutex mutex_;
  std::map<std::string, Entry> cache_;
};

}  // namespace dcomposer
