#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "dcomposer/error.hpp"
#include "dcomposer/registry.hpp"
#include "dcomposer/runtime.hpp"

namespace dcomposer {

struct ServerConfig {
  std::string host = "127.0.0.1";
  // 0 picks a free port; see ApiServer::port().
  int port = 8080;
  // Project files and per-project working directories live under here.
  std::filesystem::path root = ".";
  std::string registry_url = kDefaultRegistryUrl;
  // Overrides registry_url when set (tests).
  std::shared_ptr<HttpTransport> registry_transport;
  // Defaults to the process adapter for compose_command_from_env().
  std::shared_ptr<RuntimeAdapter> adapter;
  std::chrono::milliseconds poll_interval = std::chrono::seconds(1);
  // Optional directory served at "/" (the editor build).
  std::filesystem::path static_dir;
};

// Reads DCOMPOSER_ADDR (host:port), DCOMPOSER_ROOT and DCOMPOSER_REGISTRY_URL
// over the defaults.
ServerConfig server_config_from_env();

// Maps an error code onto the HTTP status used in error responses.
int http_status_for(Errc code) noexcept;

// Local HTTP API under /v1 (plus /healthz). Error bodies are
// {"error": {"code", "message"}}.
class ApiServer {
 public:
  explicit ApiServer(ServerConfig config);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Throws Error(BindError) if the address is unavailable.
  void bind();
  [[nodiscard]] int port() const noexcept;

  // Serves until shutdown(); bind() must have succeeded.
  void run();
  // run() on a background thread.
  void start();
  // Issues down for every active run, ends event streams and stops serving.
  void shutdown();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dcomposer
