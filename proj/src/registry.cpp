#include "dcomposer/registry.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "dcomposer/error.hpp"

namespace dcomposer {

namespace {

using nlohmann::json;

class HttplibTransport final : public HttpTransport {
 public:
  HttplibTransport(std::string base_url, std::chrono::milliseconds timeout)
      : base_url_(std::move(base_url)), timeout_(timeout) {
    if (!httplib::Client(base_url_).is_valid()) {
      throw Error(Errc::NetworkError, "unusable registry URL '" + base_url_ + "'");
    }
  }

  HttpResponse get(const std::string& path,
                   const std::multimap<std::string, std::string>& query) override {
    // One client per request: httplib::Client is not safe for concurrent use.
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    client.set_follow_location(true);
    const httplib::Params params(query.begin(), query.end());
    auto res = client.Get(httplib::append_query_params(path, params));
    if (!res) {
      throw Error(Errc::NetworkError,
                  "registry request failed: " + httplib::to_string(res.error()));
    }
    return HttpResponse{res->status, res->body};
  }

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

std::string trim(const std::string& s) {
  const auto b = std::find_if_not(s.begin(), s.end(),
                                  [](unsigned char c) { return std::isspace(c); });
  const auto e = std::find_if_not(s.rbegin(), s.rend(),
                                  [](unsigned char c) { return std::isspace(c); })
                     .base();
  return b < e ? std::string(b, e) : std::string{};
}

[[noreturn]] void bad_payload(const std::string& why) {
  throw Error(Errc::RegistryError, "unexpected registry response: " + why);
}

std::vector<ImageSummary> parse_search(const std::string& body) {
  std::vector<ImageSummary> out;
  try {
    const auto j = json::parse(body);
    for (const auto& r : j.at("results")) {
      ImageSummary s;
      s.repository = r.at("repo_name").get<std::string>();
      if (s.repository.empty()) bad_payload("empty repo_name");
      if (const auto d = r.find("short_description"); d != r.end() && d->is_string()) {
        s.description = d->get<std::string>();
      }
      s.is_official = r.value("is_official", false);
      s.star_count = r.value("star_count", std::uint64_t{0});
      s.pull_count = r.value("pull_count", std::uint64_t{0});
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    bad_payload(e.what());
  }
  return out;
}

std::vector<std::string> parse_tags(const std::string& body) {
  std::vector<std::string> out;
  try {
    const auto j = json::parse(body);
    for (const auto& r : j.at("results")) out.push_back(r.at("name").get<std::string>());
  } catch (const json::exception& e) {
    bad_payload(e.what());
  }
  return out;
}

void check_page(int page, int page_size, int max_size) {
  if (page < 1) throw Error(Errc::InvalidValue, "page must be >= 1");
  if (page_size < 1 || page_size > max_size) {
    throw Error(Errc::InvalidValue,
                "page_size must be in 1.." + std::to_string(max_size));
  }
}

}  // namespace

std::string registry_url_from_env() {
  const char* env = std::getenv("DCOMPOSER_REGISTRY_URL");
  return env && *env ? std::string(env) : std::string(kDefaultRegistryUrl);
}

std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url,
                                                   std::chrono::milliseconds timeout) {
  return std::make_unique<HttplibTransport>(base_url, timeout);
}

RegistryClient::RegistryClient(std::shared_ptr<HttpTransport> transport,
                               RegistryOptions options)
    : transport_(std::move(transport)), options_(std::move(options)) {}

std::pair<std::string, bool> RegistryClient::fetch(
    const std::string& cache_key, const std::string& path,
    const std::multimap<std::string, std::string>& query, bool not_found_is_unknown,
    const std::function<void(const std::string&)>& check) {
  {
    std::lock_guard lock(mutex_);
    const auto it = cache_.find(cache_key);
    if (it != cache_.end() &&
        options_.clock() - it->second.fetched_at < options_.ttl) {
      return {it->second.body, false};
    }
  }

  HttpResponse res;
  try {
    res = transport_->get(path, query);
  } catch (const Error& e) {
    if (e.code() != Errc::NetworkError) throw;
    std::lock_guard lock(mutex_);
    const auto it = cache_.find(cache_key);
    if (it == cache_.end()) throw;
    return {it->second.body, true};
  }

  if (res.status == 404 && not_found_is_unknown) {
    throw Error(Errc::UnknownRepository, "repository not found: " + res.body.substr(0, 500));
  }
  if (res.status < 200 || res.status >= 300) {
    throw Error(Errc::RegistryError, "registry returned HTTP " +
                                         std::to_string(res.status) + ": " +
                                         res.body.substr(0, 500));
  }
  check(res.body);
  std::lock_guard lock(mutex_);
  cache_[cache_key] = Entry{res.body, options_.clock()};
  return {res.body, false};
}

SearchResult RegistryClient::search_images(const std::string& query, int page,
                                           int page_size) {
  const auto q = trim(query);
  if (q.empty()) throw Error(Errc::EmptyQuery, "search query is empty");
  check_page(page, page_size, 100);
  const auto [body, stale] = fetch(
      "search\n" + q + "\n" + std::to_string(page) + "\n" + std::to_string(page_size),
      "/v2/search/repositories/",
      {{"query", q}, {"page", std::to_string(page)}, {"page_size", std::to_string(page_size)}},
      false, [](const std::string& b) { (void)parse_search(b); });
  auto images = parse_search(body);
  if (images.size() > static_cast<std::size_t>(page_size)) images.resize(page_size);
  return SearchResult{std::move(images), stale};
}

TagList RegistryClient::list_tags(const std::string& repository, int page,
                                  int page_size) {
  const auto repo = trim(repository);
  if (repo.empty()) throw Error(Errc::UnknownRepository, "repository name is empty");
  const bool valid_name = std::all_of(repo.begin(), repo.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '.' || c == '_' || c == '-' || c == '/';
  });
  if (!valid_name) throw Error(Errc::UnknownRepository, "invalid repository name '" + repo + "'");
  check_page(page, page_size, 100);
  const auto full = repo.find('/') == std::string::npos ? "library/" + repo : repo;
  const auto [body, stale] = fetch(
      "tags\n" + full + "\n" + std::to_string(page) + "\n" + std::to_string(page_size),
      "/v2/repositories/" + full + "/tags",
      {{"page", std::to_string(page)}, {"page_size", std::to_string(page_size)}}, true,
      [](const std::string& b) { (void)parse_tags(b); });
  return TagList{parse_tags(body), stale};
}

}  // namespace dcomposer
