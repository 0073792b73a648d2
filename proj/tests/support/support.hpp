#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dcomposer/layout.hpp"
#include "dcomposer/model.hpp"

namespace testsupport {

std::filesystem::path data_dir();
std::filesystem::path corpus_dir();
// Sorted *.yml files of the round-trip corpus.
std::vector<std::filesystem::path> corpus_files();
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

struct RandomStackOptions {
  int max_services = 6;
  int max_resources = 3;  // per non-service class
  int max_edges = 12;
};
dcomposer::Stack random_stack(std::mt19937_64& rng, RandomStackOptions opts = {});

// Services only, random depends_on edges between them.
dcomposer::Stack random_dependency_graph(std::mt19937_64& rng, int nodes, double density);

// ---- oracles --------------------------------------------------------------

// Exhaustive search over every way to split `text` into <number><unit> terms.
// nullopt means the text is rejected.
std::optional<std::int64_t> oracle_duration(const std::string& text);
std::optional<std::uint64_t> oracle_byte_size(const std::string& text);

// Groups of services that lie on a common depends_on cycle, found by
// pairwise reachability. Same ordering contract as detect_cycles.
std::vector<std::vector<dcomposer::ArtifactId>> oracle_cycles(const dcomposer::Stack& stack);

// Number of artifacts sharing their (class, key) with another artifact.
std::size_t oracle_duplicate_keys(const dcomposer::Stack& stack);

// Names of the auto-layout properties `d` breaks for `s`: "coverage",
// "overlap", "band", "monotonic", "canvas". Empty when all hold.
std::vector<std::string> layout_violations(const dcomposer::Stack& s, const dcomposer::Diagram& d,
                                           const dcomposer::LayoutConfig& cfg = {});

// Generates `count` random editor ops that succeed when applied in order,
// applying each to `stack`/`diagram` as it goes.
std::vector<nlohmann::json> record_op_script(dcomposer::Stack& stack, dcomposer::Diagram& diagram,
                                             std::mt19937_64& rng, int count);

// ---- HTTP -----------------------------------------------------------------

struct Reply {
  int status = 0;
  std::string body;
  std::string content_type;
};
Reply http_get(int port, const std::string& path);
Reply http_post(int port, const std::string& path, const std::string& json_body);
Reply http_delete(int port, const std::string& path);

// Minimal HTTP server on 127.0.0.1 answering GETs from a fixed table;
// unknown paths get 404. `delay_ms` stalls every response.
class StubServer {
 public:
  struct Route {
    int status = 200;
    std::string body;
  };
  explicit StubServer(std::map<std::string, Route> routes, int delay_ms = 0);
  ~StubServer();
  [[nodiscard]] int port() const { return port_; }
  [[nodiscard]] std::string base_url() const;
  // Query strings seen so far, per path.
  [[nodiscard]] std::vector<std::string> requests() const;

 private:
  struct Impl;
  Impl* impl_;
  int port_ = 0;
};

struct SseEvent {
  std::uint64_t id = 0;
  std::string data;
};
// Reads events until `count` have arrived or `timeout_ms` passes.
std::vector<SseEvent> sse_collect(int port, const std::string& path, std::size_t count,
                                  int timeout_ms);

}  // namespace testsupport
