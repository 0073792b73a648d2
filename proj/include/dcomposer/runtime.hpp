#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dcomposer/compose_io.hpp"
#include "dcomposer/stream.hpp"

namespace dcomposer {

// ---- process adapter ------------------------------------------------------

struct ProcessCallbacks {
  // Called once per output line, without the trailing newline, from an
  // adapter-owned thread.
  std::function<void(const std::string&)> on_stdout;
  std::function<void(const std::string&)> on_stderr;
};

class ProcessHandle {
 public:
  virtual ~ProcessHandle() = default;
  // Blocks until exit and until every output line has been delivered.
  virtual int wait() = 0;
  virtual void terminate() = 0;
  [[nodiscard]] virtual bool running() = 0;
};

// argv[0] is always "compose"; the adapter maps it onto the real command.
// spawn throws Error(SpawnError) if the process could not be started.
class RuntimeAdapter {
 public:
  virtual ~RuntimeAdapter() = default;
  virtual std::unique_ptr<ProcessHandle> spawn(const std::vector<std::string>& argv,
                                               const std::filesystem::path& workdir,
                                               ProcessCallbacks callbacks) = 0;
};

// `command` replaces the leading "compose", e.g. {"docker", "compose"} or
// {"docker-compose"}.
std::shared_ptr<RuntimeAdapter> make_process_adapter(std::vector<std::string> command);

// DCOMPOSER_COMPOSE_BIN split on spaces, else "docker compose".
std::vector<std::string> compose_command_from_env();

// Scripted stand-in for tests. Every spawn is recorded; the script decides
// exit code and output. Follow-mode processes stay alive until terminated and
// can be fed lines through emit().
class FakeRuntimeAdapter final : public RuntimeAdapter {
 public:
  struct Reply {
    int exit_code = 0;
    std::vector<std::string> out;
    std::vector<std::string> err;
    bool follow = false;
  };
  using Script = std::function<Reply(const std::vector<std::string>& argv)>;

  explicit FakeRuntimeAdapter(Script script = {});

  std::unique_ptr<ProcessHandle> spawn(const std::vector<std::string>& argv,
                                       const std::filesystem::path& workdir,
                                       ProcessCallbacks callbacks) override;

  [[nodiscard]] std::vector<std::vector<std::string>> transcript() const;
  [[nodiscard]] std::vector<std::filesystem::path> workdirs() const;
  // Delivers `line` to the live follow-mode process whose last argv element
  // is `service`. Returns false if there is none.
  bool emit(const std::string& service, const std::string& line, bool to_stderr = false);
  [[nodiscard]] std::size_t terminate_calls() const;
  [[nodiscard]] std::size_t live_processes() const;
  void set_script(Script script);
  // Makes the next spawn throw SpawnError.
  void fail_next_spawn();

  struct Live;

 private:
  mutable std::mutex mutex_;
  Script script_;
  std::vector<std::vector<std::string>> transcript_;
  std::vector<std::filesystem::path> workdirs_;
  std::vector<std::shared_ptr<Live>> live_;
  std::shared_ptr<std::atomic<std::size_t>> terminates_;
  bool fail_next_ = false;
};

// ---- logs -----------------------------------------------------------------

struct LogEvent {
  // Service the line came from; empty for controller and control-command
  // output, which only appears in General.
  std::optional<std::string> service;
  std::string line;
  std::int64_t timestamp_us = 0;
  bool operator==(const LogEvent&) const = default;
};

class LogSubscription;

// One General stream plus one stream per service. Every service line is
// also appended to General. Each stream retains the newest `capacity` lines.
class LogHub {
 public:
  LogHub(std::vector<std::string> services, std::size_t capacity);

  void publish(const std::optional<std::string>& service, std::string line);
  // Ends every stream; subscribers drain the backlog and then see End.
  void close();
  [[nodiscard]] bool closed() const;
  [[nodiscard]] bool has_source(const std::string& service) const;

  // nullopt selects General. Throws UnknownService.
  LogSubscription subscribe(const std::optional<std::string>& source);

  std::function<void(const LogEvent&)> on_publish;

 private:
  friend class LogSubscription;
  std::shared_ptr<RingStream<LogEvent>> general_;
  std::map<std::string, std::shared_ptr<RingStream<LogEvent>>> services_;
};

class LogSubscription {
 public:
  using Status = RingStream<LogEvent>::Status;
  Status next(LogEvent& out, std::chrono::milliseconds timeout);

 private:
  friend class LogHub;
  explicit LogSubscription(std::shared_ptr<RingStream<LogEvent>> stream)
      : stream_(std::move(stream)) {}
  std::shared_ptr<RingStream<LogEvent>> stream_;
  std::uint64_t cursor_ = 0;
};

// ---- status ---------------------------------------------------------------

enum class Aggregate { Stopped, Starting, Running, Degraded, Error };
enum class ServiceState { Created, Running, Exited, Errored };

[[nodiscard]] std::string_view to_string(Aggregate a) noexcept;
[[nodiscard]] std::string_view to_string(ServiceState s) noexcept;
// Indicator colour for the toolbar.
[[nodiscard]] std::string_view status_color(Aggregate a) noexcept;

struct StackStatus {
  Aggregate aggregate = Aggregate::Stopped;
  std::map<std::string, ServiceState> per_service;
  // Microseconds since the epoch of the last aggregate change.
  std::int64_t last_transition_us = 0;
  bool operator==(const StackStatus&) const = default;
};

// Parses `compose ps --format json` output: a JSON array or one object per
// line. Unknown states are ignored.
std::map<std::string, ServiceState> parse_ps_output(const std::string& text);

enum class RunPhase { Starting, Up, Failed, Stopped, Down };

struct DerivationInput {
  RunPhase phase = RunPhase::Stopped;
  bool polled = false;
  std::vector<std::string> services;
  std::map<std::string, ServiceState> per_service;
};
[[nodiscard]] Aggregate derive_aggregate(const DerivationInput& in) noexcept;

// ---- controller -----------------------------------------------------------

struct RuntimeOptions {
  // 0 disables background polling; poll_status() can still be called.
  std::chrono::milliseconds poll_interval = std::chrono::seconds(1);
  std::size_t log_capacity = 10'000;
  std::string file_name = "docker-compose.yml";
  SerializeOptions serialize;
  // Invoked (from any thread) on every status change and every log line.
  // Status listeners run in change order and must not call back into the
  // run handle.
  std::function<void(const StackStatus&)> on_status;
  std::function<void(const LogEvent&)> on_log;
};

class RunHandle {
 public:
  ~RunHandle();
  RunHandle(const RunHandle&) = delete;
  RunHandle& operator=(const RunHandle&) = delete;

  [[nodiscard]] StackStatus status() const;
  [[nodiscard]] RunPhase phase() const;
  // The exact bytes written to the working directory.
  [[nodiscard]] const std::string& compose_yaml() const noexcept { return yaml_; }
  [[nodiscard]] const std::filesystem::path& workdir() const noexcept { return workdir_; }
  [[nodiscard]] const std::vector<std::string>& services() const noexcept {
    return services_;
  }

  // nullopt selects General. Throws UnknownService.
  LogSubscription subscribe_logs(const std::optional<std::string>& source);

  // Blocks until the up command has finished and log followers are running.
  void wait_started();
  // One synchronous `compose ps` round; a failed poll leaves status as is.
  void poll_status();

 private:
  friend class RuntimeController;
  RunHandle(std::shared_ptr<RuntimeAdapter> adapter, const RuntimeOptions& options,
            std::filesystem::path workdir, std::string yaml,
            std::vector<std::string> services, RunPhase phase);

  void start_up();
  void run_up(std::unique_ptr<ProcessHandle> proc);
  void control(const std::vector<std::string>& argv, RunPhase on_success);
  void start_followers();
  void stop_background();
  void poll_loop();
  void set_phase(RunPhase phase);
  void publish_status_locked(std::unique_lock<std::mutex>& lock);
  ProcessCallbacks general_callbacks();

  std::shared_ptr<RuntimeAdapter> adapter_;
  RuntimeOptions options_;
  std::filesystem::path workdir_;
  std::string yaml_;
  std::vector<std::string> services_;
  LogHub hub_;

  mutable std::mutex mutex_;
  std::mutex notify_mutex_;
  RunPhase phase_;
  bool polled_ = false;
  StackStatus status_;

  std::mutex control_mutex_;
  std::mutex up_mutex_;
  std::thread up_thread_;
  std::vector<std::unique_ptr<ProcessHandle>> followers_;

  std::thread poller_;
  std::mutex poll_mutex_;
  std::condition_variable poll_cv_;
  bool stop_polling_ = false;
};

// Owns at most one active run for a project.
class RuntimeController {
 public:
  RuntimeController(std::shared_ptr<RuntimeAdapter> adapter, RuntimeOptions options = {});
  ~RuntimeController();

  // Writes the canonical YAML to workdir/<file_name> and starts
  // `compose up --detach` in the background. Throws IoError, AlreadyRunning,
  // SpawnError.
  std::shared_ptr<RunHandle> up(const Stack& stack, const std::filesystem::path& workdir);

  // Adopts a stack that is already deployed (e.g. started by another
  // process) so that stop and down can be issued. Writes the YAML like up.
  std::shared_ptr<RunHandle> attach(const Stack& stack,
                                    const std::filesystem::path& workdir);

  // Throw NotRunning, AdapterError. stop keeps a stopped run eligible for
  // down.
  void stop();
  void down();

  // Issues down if a run is active, then releases all processes.
  void shutdown();

  [[nodiscard]] std::shared_ptr<RunHandle> handle() const;
  // Stopped when nothing has been started.
  [[nodiscard]] StackStatus status() const;

 private:
  std::shared_ptr<RunHandle> create(const Stack& stack,
                                    const std::filesystem::path& workdir, RunPhase phase);

  std::shared_ptr<RuntimeAdapter> adapter_;
  RuntimeOptions options_;
  mutable std::mutex mutex_;
  std::shared_ptr<RunHandle> current_;
};

}  // namespace dcomposer
