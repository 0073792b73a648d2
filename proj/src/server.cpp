#include "dcomposer/server.hpp"

#include <atomic>
#include <cstdlib>
#include <map>
#include <thread>

#include <httplib.h>

#include "dcomposer/error.hpp"
#include "dcomposer/graph.hpp"
#include "dcomposer/ops.hpp"
#include "dcomposer/project.hpp"
#include "dcomposer/report.hpp"
#include "dcomposer/validation.hpp"

namespace dcomposer {

namespace {

using httplib::Request;
using httplib::Response;

constexpr std::size_t kEventBacklog = 10'000;

void send_json(Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(Response& res, int status, std::string_view code, std::string_view message) {
  send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

template <typename F>
void guarded(Response& res, F&& body) {
  try {
    body();
  } catch (const Error& e) {
    send_error(res, http_status_for(e.code()), to_string(e.code()), e.what());
  } catch (const json::exception& e) {
    send_error(res, 422, "InvalidValue", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "Internal", e.what());
  }
}

json body_json(const Request& req) {
  if (req.body.empty()) return json::object();
  auto j = json::parse(req.body, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::InvalidValue, "request body is not JSON");
  if (!j.is_object()) throw Error(Errc::InvalidValue, "request body must be an object");
  return j;
}

int int_param(const Request& req, const char* name, int fallback) {
  if (!req.has_param(name)) return fallback;
  const auto text = req.get_param_value(name);
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(name);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::InvalidValue, std::string("'") + name + "' must be an integer");
  }
}

struct Session {
  std::string id;
  std::mutex mutex;
  std::uint64_t revision = 0;
  Stack stack;
  Diagram diagram;
  ProjectSettings settings;
  std::vector<ParseNotice> notices;
  RingStream<json> events{kEventBacklog};
  std::unique_ptr<RuntimeController> runtime;

  json snapshot_locked() const {
    return {{"id", id},
            {"revision", revision},
            {"stack", to_json(stack)},
            {"diagram", to_json(diagram)},
            {"settings", to_json(settings)},
            {"notices", to_json(notices)},
            {"warnings", to_json(validate(stack))}};
  }

  void push_warnings_locked() {
    events.push({{"kind", "warnings"},
                 {"source", "warnings"},
                 {"revision", revision},
                 {"warnings", to_json(validate(stack))}});
  }
};

}  // namespace

int http_status_for(Errc code) noexcept {
  switch (code) {
    case Errc::UnknownService:
    case Errc::UnknownRepository: return 404;
    case Errc::AlreadyRunning:
    case Errc::NotRunning: return 409;
    case Errc::NetworkError:
    case Errc::RegistryError:
    case Errc::AdapterError: return 502;
    case Errc::IoError:
    case Errc::SpawnError:
    case Errc::BindError: return 500;
    default: return 422;
  }
}

ServerConfig server_config_from_env() {
  ServerConfig c;
  if (const char* addr = std::getenv("DCOMPOSER_ADDR"); addr && *addr) {
    const std::string a(addr);
    const auto colon = a.rfind(':');
    if (colon == std::string::npos) {
      c.host = a;
    } else {
      c.host = a.substr(0, colon);
      c.port = std::atoi(a.c_str() + colon + 1);
    }
  }
  if (const char* root = std::getenv("DCOMPOSER_ROOT"); root && *root) c.root = root;
  c.registry_url = registry_url_from_env();
  return c;
}

struct ApiServer::Impl {
  ServerConfig config;
  httplib::Server http;
  RegistryClient registry;
  std::shared_ptr<RuntimeAdapter> adapter;
  std::mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::uint64_t next_session = 1;
  std::atomic<bool> stopping{false};
  int bound_port = -1;
  std::thread runner;

  explicit Impl(ServerConfig c)
      : config(std::move(c)),
        registry(config.registry_transport ? config.registry_transport
                                           : std::shared_ptr<HttpTransport>(
                                                 make_http_transport(config.registry_url))),
        adapter(config.adapter ? config.adapter
                               : make_process_adapter(compose_command_from_env())) {
    http.new_task_queue = [] { return new httplib::ThreadPool(64); };
    // The library default adds SO_REUSEPORT, which lets a second server bind
    // a port that is already taken.
    http.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
    if (!config.static_dir.empty()) http.set_mount_point("/", config.static_dir.string());
  }

  std::shared_ptr<Session> session(const Request& req) {
    const auto id = req.matches[1].str();
    std::lock_guard lock(sessions_mutex);
    const auto it = sessions.find(id);
    if (it == sessions.end()) return nullptr;
    return it->second;
  }

  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : config.root / p;
  }

  std::filesystem::path workdir_locked(const Session& s) const {
    if (!s.settings.working_directory.empty()) return resolve(s.settings.working_directory);
    const auto dir = config.root / "projects" / s.id;
    std::filesystem::create_directories(dir);
    return dir;
  }

  RuntimeController& runtime_locked(Session& s) {
    if (!s.runtime) {
      RuntimeOptions options;
      options.poll_interval = config.poll_interval;
      options.file_name = s.settings.export_settings.file_name;
      options.serialize.omit_defaults = s.settings.export_settings.omit_defaults;
      Session* raw = &s;
      options.on_status = [raw](const StackStatus& st) {
        raw->events.push({{"kind", "status"}, {"source", "status"}, {"status", to_json(st)}});
      };
      options.on_log = [raw](const LogEvent& ev) {
        auto j = to_json(ev);
        j["kind"] = "log";
        j["source"] = ev.service ? *ev.service : std::string("General");
        raw->events.push(std::move(j));
      };
      s.runtime = std::make_unique<RuntimeController>(adapter, std::move(options));
    }
    return *s.runtime;
  }

  // Runs `f` with the session locked, or answers 404.
  template <typename F>
  void with_session(const Request& req, Response& res, F&& f) {
    guarded(res, [&] {
      auto s = session(req);
      if (!s) {
        send_error(res, 404, "UnknownProject", "no project '" + req.matches[1].str() + "'");
        return;
      }
      f(*s);
    });
  }

  void routes() {
    http.Get("/healthz", [](const Request&, Response& res) {
      send_json(res, 200, {{"ok", true}});
    });
    http.Get("/v1/healthz", [](const Request&, Response& res) {
      send_json(res, 200, {{"ok", true}});
    });
    http.Get("/v1/meta", [](const Request&, Response& res) { send_json(res, 200, meta_json()); });

    http.Post("/v1/projects", [this](const Request& req, Response& res) {
      guarded(res, [&] {
        const auto body = body_json(req);
        auto s = std::make_shared<Session>();
        const auto name = body.value("name", std::string{});
        if (body.contains("yaml") && !body.at("yaml").is_null()) {
          auto parsed = parse_compose(body.at("yaml").get<std::string>(), name);
          s->stack = std::move(parsed.stack);
          s->notices = std::move(parsed.notices);
        } else {
          s->stack = new_stack(name);
        }
        s->diagram = auto_layout(s->stack);
        {
          std::lock_guard lock(sessions_mutex);
          s->id = "p" + std::to_string(next_session++);
          sessions[s->id] = s;
        }
        std::lock_guard lock(s->mutex);
        send_json(res, 201, s->snapshot_locked());
      });
    });

    http.Get(R"(/v1/projects/([^/]+))", [this](const Request& req, Response& res) {
      with_session(req, res, [&](Session& s) {
        std::lock_guard lock(s.mutex);
        send_json(res, 200, s.snapshot_locked());
      });
    });

    http.Delete(R"(/v1/projects/([^/]+))", [this](const Request& req, Response& res) {
      with_session(req, res, [&](Session& s) {
        if (s.runtime) s.runtime->shutdown();
        s.events.close();
        std::lock_guard lock(sessions_mutex);
        sessions.erase(s.id);
        send_json(res, 200, {{"deleted", s.id}});
      });
    });

    http.Post(R"(/v1/projects/([^/]+)/ops)", [this](const Request& req, Response& res) {
      with_session(req, res, [&](Session& s) {
        const auto body = body_json(req);
        const auto& base = body.at("base_revision");
        if (!base.is_number_integer()) {
          throw Error(Errc::InvalidValue, "base_revision must be an integer");
        }
        std::lock_guard lock(s.mutex);
        if (base.get<std::int64_t>() != static_cast<std::int64_t>(s.revision)) {
          send_json(res, 409,
                    {{"error",
                      {{"code", "RevisionConflict"},
                       {"message", "base_revision " + base.dump() + " is not current"}}},
                     {"revision", s.revision}});
          return;
        }
        Stack stack = s.stack;
        Diagram diagram = s.diagram;
        const auto result = apply_op(stack, diagram, body.at("op"));
        s.stack = std::move(stack);
        s.diagram = std::move(diagram);
        ++s.revision;
        s.push_warnings_locked();
        send_json(res, 200,
                  {{"revision", s.revision},
                   {"result", result},
                   {"warnings", to_json(validate(s.stack))}});
      });
    });

    http.Post(R"(/v1/projects/([^/]+)/layout)", [this](const Request& req, Response& res) {
      with_session(req, res, [&](Session& s) {
        std::lock_guard lock(s.mutex);
        s.diagram = auto_layout(s.stack);
        ++s.revision;
        send_json(res, 200, {{"revision", s.revision}, {"diagram", to_json(s.diagram)}});
      });
    });

    http.Get(R"(/v1/projects/([^/]+)/validate)", [this](const Request& req, Response& res) {
      with_session(req, res, [&](Session& s) {
        ValidationOptions options;
        options.host_port_collisions = req.has_param("host_ports") &&
                                       req.get_param_value("host_ports") != "0";
        std::lock_guard lock(s.mutex);
        send_json(res, 200,
                  {{"revision", s.revision}, {"warnings", to_json(validate(s.stack, options))}});
      });
    });

    http.Get(R"(/v1/projects/([^/]+)/export)", [this](const Request& req, Response& res) {
      with_session(req, res, [&](Session& s) {
        std::lock_guard lock(s.mutex);
        const auto out = serialize_compose(
            s.stack, SerializeOptions{s.settings.export_settings.omit_defaults});
        if (req.has_param("format") && req.get_param_value("format") == "json") {
          send_json(res, 200,
                    {{"revision", s.revision}, {"yaml", out.yaml}, {"notices", to_json(out.notices)}});
        } else {
          res.status = 200;
          res.set_content(out.yaml, "application/yaml");
        }
      });
    });

    http.Get(R"(/v1/projects/([^/]+)/graph)", [this](const Request& req, Response& res) {
      with_session(req, res, [&](Session& s) {
        std::lock_guard lock(s.mutex);
        if (req.has_param("format") && req.get_param_value("format") == "dot") {
          res.status = 200;
          res.set_content(graph_dot(s.stack), "text/vnd.graphviz");
        } else {
          send_json(res, 200, graph_json(s.stack, s.diagram));
        }
      });
    });

    http.Post(R"(/v1/projects/([^/]+)/settings)", [this](const Request& req, Response& res) {
      with_session(req, res, [&](Session& s) {
        const auto body = body_json(req);
        std::lock_guard lock(s.mutex);
        auto merged = to_json(s.settings);
        merged.merge_patch(body);
        s.settings = settings_from_json(merged);
        if (s.runtime) {
          const auto p = s.runtime->handle() ? s.runtime->handle()->phase() : RunPhase::Stopped;
          if (p != RunPhase::Starting && p != RunPhase::Up) s.runtime.reset();
        }
        send_json(res, 200, {{"settings", to_json(s.settings)}});
      });
    });

    http.Post(R"(/v1/projects/([^/]+)/save)", [this](const Request& req, Response& res) {
      with_session(req, res, [&](Session& s) {
        const auto body = body_json(req);
        std::lock_guard lock(s.mutex);
        const auto path = body.contains("path")
                              ? resolve(body.at("path").get<std::string>())
                              : config.root / (s.id + ".dcproj.json");
        save_project(s.stack, s.diagram, s.settings, path);
        send_json(res, 200, {{"path", path.string()}, {"revision", s.revision}});
      });
    });

    http.Post(R"(/v1/projects/([^/]+)/load)", [this](const Request& req, Response& res) {
      with_session(req, res, [&](Session& s) {
        const auto body = body_json(req);
        const auto path = body.contains("path")
                              ? resolve(body.at("path").get<std::string>())
                              : config.root / (req.matches[1].str() + ".dcproj.json");
        auto project = load_project(path);
        std::lock_guard lock(s.mutex);
        s.stack = std::move(project.stack);
        s.diagram = std::move(project.diagram);
        s.settings = std::move(project.settings);
        s.notices.clear();
        ++s.revision;
        s.push_warnings_locked();
        send_json(res, 200, s.snapshot_locked());
      });
    });

    http.Get("/v1/registry/search", [this](const Request& req, Response& res) {
      guarded(res, [&] {
        const auto q = req.has_param("q") ? req.get_param_value("q") : std::string{};
        const auto result =
            registry.search_images(q, int_param(req, "page", 1), int_param(req, "page_size", 25));
        json images = json::array();
        for (const auto& i : result.images) images.push_back(to_json(i));
        send_json(res, 200, {{"results", images}, {"stale", result.stale}});
      });
    });

    http.Get("/v1/registry/tags", [this](const Request& req, Response& res) {
      guarded(res, [&] {
        const auto repo = req.has_param("repo") ? req.get_param_value("repo") : std::string{};
        const auto result = registry.list_tags(repo, int_param(req, "page", 1),
                                               int_param(req, "page_size", 100));
        send_json(res, 200, {{"tags", result.tags}, {"stale", result.stale}});
      });
    });

    http.Post(R"(/v1/projects/([^/]+)/up)", [this](const Request& req, Response& res) {
      with_session(req, res, [&](Session& s) {
        std::unique_lock lock(s.mutex);
        const Stack stack = s.stack;
        const auto dir = workdir_locked(s);
        auto& runtime = runtime_locked(s);
        lock.unlock();
        runtime.up(stack, dir);
        send_json(res, 202, {{"status", to_json(runtime.status())}});
      });
    });

    http.Post(R"(/v1/projects/([^/]+)/(stop|down))", [this](const Request& req, Response& res) {
      with_session(req, res, [&](Session& s) {
        std::unique_lock lock(s.mutex);
        if (!s.runtime) throw Error(Errc::NotRunning, "nothing is running");
        auto& runtime = *s.runtime;
        lock.unlock();
        if (req.matches[2].str() == "stop") {
          runtime.stop();
        } else {
          runtime.down();
        }
        send_json(res, 200, {{"status", to_json(runtime.status())}});
      });
    });

    http.Get(R"(/v1/projects/([^/]+)/status)", [this](const Request& req, Response& res) {
      with_session(req, res, [&](Session& s) {
        std::lock_guard lock(s.mutex);
        send_json(res, 200, to_json(s.runtime ? s.runtime->status() : StackStatus{}));
      });
    });

    http.Get(R"(/v1/projects/([^/]+)/logs)", [this](const Request& req, Response& res) {
      with_session(req, res, [&](Session& s) {
        std::shared_ptr<RunHandle> handle;
        {
          std::lock_guard lock(s.mutex);
          if (s.runtime) handle = s.runtime->handle();
        }
        std::optional<std::string> source;
        if (req.has_param("source") && req.get_param_value("source") != "General") {
          source = req.get_param_value("source");
        }
        json lines = json::array();
        if (handle) {
          auto sub = handle->subscribe_logs(source);
          LogEvent ev;
          while (sub.next(ev, std::chrono::milliseconds(0)) == LogSubscription::Status::Item) {
            lines.push_back(to_json(ev));
          }
        } else if (source) {
          throw Error(Errc::UnknownService, "no log source for service '" + *source + "'");
        }
        send_json(res, 200, {{"lines", lines}});
      });
    });

    http.Get(R"(/v1/projects/([^/]+)/events)", [this](const Request& req, Response& res) {
      auto s = session(req);
      if (!s) {
        send_error(res, 404, "UnknownProject", "no project '" + req.matches[1].str() + "'");
        return;
      }
      auto cursor = std::make_shared<std::uint64_t>(0);
      if (req.has_param("since")) {
        guarded(res, [&] { *cursor = static_cast<std::uint64_t>(int_param(req, "since", 0)); });
      }
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream", [this, s, cursor](std::size_t, httplib::DataSink& sink) {
            if (stopping) {
              sink.done();
              return true;
            }
            json ev;
            const auto st = s->events.next(*cursor, ev, std::chrono::milliseconds(500));
            if (st == RingStream<json>::Status::End) {
              sink.done();
              return true;
            }
            const std::string chunk =
                st == RingStream<json>::Status::Item
                    ? "id: " + std::to_string(*cursor - 1) + "\ndata: " + ev.dump() + "\n\n"
                    : std::string(": keepalive\n\n");
            return sink.write(chunk.data(), chunk.size());
          });
    });
  }

  void shutdown() {
    if (stopping.exchange(true)) return;
    std::vector<std::shared_ptr<Session>> all;
    {
      std::lock_guard lock(sessions_mutex);
      for (auto& [id, s] : sessions) all.push_back(s);
    }
    for (auto& s : all) {
      if (s->runtime) s->runtime->shutdown();
      s->events.close();
    }
    http.stop();
    if (runner.joinable() && runner.get_id() != std::this_thread::get_id()) runner.join();
  }
};

ApiServer::ApiServer(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

ApiServer::~ApiServer() { shutdown(); }

void ApiServer::bind() {
  auto& c = impl_->config;
  if (c.port == 0) {
    impl_->bound_port = impl_->http.bind_to_any_port(c.host);
  } else if (impl_->http.bind_to_port(c.host, c.port)) {
    impl_->bound_port = c.port;
  } else {
    impl_->bound_port = -1;
  }
  if (impl_->bound_port <= 0) {
    throw Error(Errc::BindError,
                "cannot bind " + c.host + ":" + std::to_string(c.port));
  }
}

int ApiServer::port() const noexcept { return impl_->bound_port; }

void ApiServer::run() {
  if (impl_->bound_port <= 0) throw Error(Errc::BindError, "server is not bound");
  impl_->http.listen_after_bind();
}

void ApiServer::start() {
  if (impl_->bound_port <= 0) throw Error(Errc::BindError, "server is not bound");
  impl_->runner = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
}

void ApiServer::shutdown() { impl_->shutdown(); }

}  // namespace dcomposer
