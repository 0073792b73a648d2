#include "dcomposer/runtime.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dcomposer/error.hpp"

namespace dcomposer {

namespace {

std::int64_t now_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// Strictly increasing across the whole process, so status events never tie.
std::int64_t next_transition_us() {
  static std::atomic<std::int64_t> last{0};
  auto prev = last.load();
  std::int64_t next;
  do {
    next = std::max(now_us(), prev + 1);
  } while (!last.compare_exchange_weak(prev, next));
  return next;
}

std::optional<ServiceState> map_state(const std::string& state, int exit_code) {
  if (state == "running") return ServiceState::Running;
  if (state == "created") return ServiceState::Created;
  if (state == "exited") return exit_code == 0 ? ServiceState::Exited : ServiceState::Errored;
  if (state == "restarting" || state == "dead") return ServiceState::Errored;
  if (state == "paused" || state == "removing") return ServiceState::Exited;
  return std::nullopt;
}

void apply_ps_entry(const nlohmann::json& j, std::map<std::string, ServiceState>& out) {
  if (!j.is_object()) return;
  const auto service = j.find("Service");
  const auto state = j.find("State");
  if (service == j.end() || state == j.end() || !service->is_string() ||
      !state->is_string()) {
    return;
  }
  int exit_code = 0;
  if (const auto e = j.find("ExitCode"); e != j.end() && e->is_number_integer()) {
    exit_code = e->get<int>();
  }
  auto s = state->get<std::string>();
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  const auto mapped = map_state(s, exit_code);
  if (!mapped) return;
  const auto key = service->get<std::string>();
  // With several replicas the worst state wins.
  const auto it = out.find(key);
  if (it == out.end() || static_cast<int>(*mapped) > static_cast<int>(it->second)) {
    out[key] = *mapped;
  }
}

}  // namespace

// ---- logs -----------------------------------------------------------------

LogHub::LogHub(std::vector<std::string> services, std::size_t capacity)
    : general_(std::make_shared<RingStream<LogEvent>>(capacity)) {
  for (auto& s : services) {
    services_.emplace(std::move(s), std::make_shared<RingStream<LogEvent>>(capacity));
  }
}

void LogHub::publish(const std::optional<std::string>& service, std::string line) {
  LogEvent ev{service, std::move(line), now_us()};
  if (service) {
    if (const auto it = services_.find(*service); it != services_.end()) {
      it->second->push(ev);
    }
  }
  general_->push(ev);
  if (on_publish) on_publish(ev);
}

void LogHub::close() {
  general_->close();
  for (auto& [key, stream] : services_) stream->close();
}

bool LogHub::closed() const { return general_->closed(); }

bool LogHub::has_source(const std::string& service) const {
  return services_.count(service) > 0;
}

LogSubscription LogHub::subscribe(const std::optional<std::string>& source) {
  if (!source) return LogSubscription(general_);
  const auto it = services_.find(*source);
  if (it == services_.end()) {
    throw Error(Errc::UnknownService, "no log source for service '" + *source + "'");
  }
  return LogSubscription(it->second);
}

LogSubscription::Status LogSubscription::next(LogEvent& out,
                                              std::chrono::milliseconds timeout) {
  return stream_->next(cursor_, out, timeout);
}

// ---- status ---------------------------------------------------------------

std::string_view to_string(Aggregate a) noexcept {
  switch (a) {
    case Aggregate::Stopped: return "Stopped";
    case Aggregate::Starting: return "Starting";
    case Aggregate::Running: return "Running";
    case Aggregate::Degraded: return "Degraded";
    case Aggregate::Error: return "Error";
  }
  return "Stopped";
}

std::string_view to_string(ServiceState s) noexcept {
  switch (s) {
    case ServiceState::Created: return "Created";
    case ServiceState::Running: return "Running";
    case ServiceState::Exited: return "Exited";
    case ServiceState::Errored: return "Errored";
  }
  return "Created";
}

std::string_view status_color(Aggregate a) noexcept {
  switch (a) {
    case Aggregate::Stopped: return "grey";
    case Aggregate::Starting: return "amber";
    case Aggregate::Running: return "green";
    case Aggregate::Degraded:
    case Aggregate::Error: return "red";
  }
  return "grey";
}

std::map<std::string, ServiceState> parse_ps_output(const std::string& text) {
  std::map<std::string, ServiceState> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return out;
  if (text[first] == '[') {
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_array()) {
      for (const auto& e : j) apply_ps_entry(e, out);
    }
    return out;
  }
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_discarded()) apply_ps_entry(j, out);
  }
  return out;
}

Aggregate derive_aggregate(const DerivationInput& in) noexcept {
  switch (in.phase) {
    case RunPhase::Failed: return Aggregate::Error;
    case RunPhase::Stopped:
    case RunPhase::Down: return Aggregate::Stopped;
    case RunPhase::Starting: return Aggregate::Starting;
    case RunPhase::Up: break;
  }
  if (!in.polled) return Aggregate::Starting;
  const bool all_running = std::all_of(in.services.begin(), in.services.end(), [&](const auto& s) {
    const auto it = in.per_service.find(s);
    return it != in.per_service.end() && it->second == ServiceState::Running;
  });
  if (all_running) return Aggregate::Running;
  int live = 0;
  int ended = 0;
  int errored = 0;
  for (const auto& [key, state] : in.per_service) {
    if (state == ServiceState::Running || state == ServiceState::Created) ++live;
    if (state == ServiceState::Exited) ++ended;
    if (state == ServiceState::Errored) ++errored;
  }
  if (live == 0 && errored == 0) return Aggregate::Stopped;
  if (ended == 0 && errored == 0) return Aggregate::Starting;
  return Aggregate::Degraded;
}

// ---- run handle -----------------------------------------------------------

RunHandle::RunHandle(std::shared_ptr<RuntimeAdapter> adapter, const RuntimeOptions& options,
                     std::filesystem::path workdir, std::string yaml,
                     std::vector<std::string> services, RunPhase phase)
    : adapter_(std::move(adapter)),
      options_(options),
      workdir_(std::move(workdir)),
      yaml_(std::move(yaml)),
      services_(std::move(services)),
      hub_(services_, options.log_capacity),
      phase_(phase) {
  hub_.on_publish = options_.on_log;
}

RunHandle::~RunHandle() {
  wait_started();
  stop_background();
}

StackStatus RunHandle::status() const {
  std::lock_guard lock(mutex_);
  return status_;
}

RunPhase RunHandle::phase() const {
  std::lock_guard lock(mutex_);
  return phase_;
}

LogSubscription RunHandle::subscribe_logs(const std::optional<std::string>& source) {
  return hub_.subscribe(source);
}

ProcessCallbacks RunHandle::general_callbacks() {
  auto sink = [this](const std::string& line) { hub_.publish(std::nullopt, line); };
  return ProcessCallbacks{sink, sink};
}

void RunHandle::publish_status_locked(std::unique_lock<std::mutex>& lock) {
  StackStatus next;
  next.per_service = status_.per_service;
  next.aggregate = derive_aggregate(DerivationInput{phase_, polled_, services_, next.per_service});
  if (next.aggregate == status_.aggregate && next.per_service == status_.per_service &&
      status_.last_transition_us != 0) {
    return;
  }
  next.last_transition_us = next_transition_us();
  status_ = next;
  // Listeners see changes in the order they were made.
  std::unique_lock notify(notify_mutex_);
  lock.unlock();
  if (options_.on_status) options_.on_status(next);
}

void RunHandle::set_phase(RunPhase phase) {
  std::unique_lock lock(mutex_);
  phase_ = phase;
  if (phase == RunPhase::Stopped || phase == RunPhase::Down) {
    status_.per_service.clear();
    polled_ = false;
  }
  publish_status_locked(lock);
}

void RunHandle::start_up() {
  auto proc = adapter_->spawn({"compose", "up", "--detach"}, workdir_, general_callbacks());
  set_phase(RunPhase::Starting);
  std::lock_guard lock(up_mutex_);
  up_thread_ = std::thread([this, p = std::move(proc)]() mutable { run_up(std::move(p)); });
}

void RunHandle::run_up(std::unique_ptr<ProcessHandle> proc) {
  const int code = proc->wait();
  if (code != 0) {
    hub_.publish(std::nullopt, "compose up exited with code " + std::to_string(code));
    set_phase(RunPhase::Failed);
    return;
  }
  try {
    start_followers();
  } catch (const Error& e) {
    hub_.publish(std::nullopt, std::string("log follower failed: ") + e.what());
  }
  set_phase(RunPhase::Up);
  if (options_.poll_interval.count() > 0) {
    poller_ = std::thread([this] { poll_loop(); });
  }
}

void RunHandle::wait_started() {
  std::lock_guard lock(up_mutex_);
  if (up_thread_.joinable()) up_thread_.join();
}

void RunHandle::start_followers() {
  for (const auto& key : services_) {
    auto sink = [this, key](const std::string& line) { hub_.publish(key, line); };
    followers_.push_back(adapter_->spawn(
        {"compose", "logs", "--follow", "--no-color", "--no-log-prefix", key}, workdir_,
        ProcessCallbacks{sink, sink}));
  }
}

void RunHandle::poll_loop() {
  std::unique_lock lock(poll_mutex_);
  while (!stop_polling_) {
    lock.unlock();
    poll_status();
    lock.lock();
    poll_cv_.wait_for(lock, options_.poll_interval, [&] { return stop_polling_; });
  }
}

void RunHandle::poll_status() {
  std::string out;
  ProcessCallbacks cb{[&out](const std::string& line) { out += line + "\n"; }, {}};
  int code = 0;
  try {
    auto proc = adapter_->spawn({"compose", "ps", "--all", "--format", "json"}, workdir_,
                                std::move(cb));
    code = proc->wait();
  } catch (const Error&) {
    return;
  }
  if (code != 0) return;
  auto states = parse_ps_output(out);
  std::unique_lock lock(mutex_);
  if (phase_ != RunPhase::Up) return;
  status_.per_service = std::move(states);
  polled_ = true;
  publish_status_locked(lock);
}

void RunHandle::stop_background() {
  {
    std::lock_guard lock(poll_mutex_);
    stop_polling_ = true;
  }
  poll_cv_.notify_all();
  if (poller_.joinable() && poller_.get_id() != std::this_thread::get_id()) poller_.join();
  for (auto& f : followers_) {
    f->terminate();
    f->wait();
  }
  followers_.clear();
}

void RunHandle::control(const std::vector<std::string>& argv, RunPhase on_success) {
  std::lock_guard control(control_mutex_);
  std::vector<std::string> errors;
  std::mutex errors_mutex;
  ProcessCallbacks cb{
      [this](const std::string& line) { hub_.publish(std::nullopt, line); },
      [this, &errors, &errors_mutex](const std::string& line) {
        {
          std::lock_guard lock(errors_mutex);
          errors.push_back(line);
        }
        hub_.publish(std::nullopt, line);
      }};
  const auto verb = argv.size() > 1 ? argv[1] : std::string("?");
  int code = 0;
  try {
    code = adapter_->spawn(argv, workdir_, std::move(cb))->wait();
  } catch (const Error& e) {
    hub_.publish(std::nullopt, e.what());
    set_phase(RunPhase::Failed);
    throw Error(Errc::AdapterError, std::string("compose ") + verb + ": " + e.what());
  }
  if (code != 0) {
    hub_.publish(std::nullopt,
                 "compose " + verb + " exited with code " + std::to_string(code));
    set_phase(RunPhase::Failed);
    std::string detail;
    for (const auto& line : errors) detail += (detail.empty() ? "" : "\n") + line;
    throw Error(Errc::AdapterError, "compose " + verb + " exited with code " +
                                        std::to_string(code) +
                                        (detail.empty() ? "" : ": " + detail));
  }
  stop_background();
  set_phase(on_success);
  hub_.close();
}

// ---- controller -----------------------------------------------------------

RuntimeController::RuntimeController(std::shared_ptr<RuntimeAdapter> adapter,
                                     RuntimeOptions options)
    : adapter_(std::move(adapter)), options_(std::move(options)) {}

RuntimeController::~RuntimeController() = default;

std::shared_ptr<RunHandle> RuntimeController::create(const Stack& stack,
                                                     const std::filesystem::path& workdir,
                                                     RunPhase phase) {
  const auto yaml = serialize_compose(stack, options_.serialize).yaml;
  std::error_code ec;
  if (!std::filesystem::is_directory(workdir, ec)) {
    throw Error(Errc::IoError, "working directory " + workdir.string() + " does not exist");
  }
  const auto path = workdir / options_.file_name;
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
    out << yaml;
    out.close();
    if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
  }
  const auto keys = emitted_keys(stack);
  std::vector<std::string> services;
  for (const auto& s : stack.services()) services.push_back(keys.at(s.id));
  return std::shared_ptr<RunHandle>(
      new RunHandle(adapter_, options_, workdir, yaml, std::move(services), phase));
}

std::shared_ptr<RunHandle> RuntimeController::up(const Stack& stack,
                                                 const std::filesystem::path& workdir) {
  std::lock_guard lock(mutex_);
  if (current_) {
    const auto p = current_->phase();
    if (p == RunPhase::Starting || p == RunPhase::Up) {
      throw Error(Errc::AlreadyRunning, "the stack is already running");
    }
  }
  auto handle = create(stack, workdir, RunPhase::Stopped);
  handle->start_up();
  current_ = handle;
  return handle;
}

std::shared_ptr<RunHandle> RuntimeController::attach(const Stack& stack,
                                                     const std::filesystem::path& workdir) {
  std::lock_guard lock(mutex_);
  if (current_) {
    const auto p = current_->phase();
    if (p == RunPhase::Starting || p == RunPhase::Up) {
      throw Error(Errc::AlreadyRunning, "the stack is already running");
    }
  }
  current_ = create(stack, workdir, RunPhase::Up);
  return current_;
}

void RuntimeController::stop() {
  const auto h = handle();
  if (!h) throw Error(Errc::NotRunning, "nothing is running");
  h->wait_started();
  const auto p = h->phase();
  if (p == RunPhase::Stopped || p == RunPhase::Down) {
    throw Error(Errc::NotRunning, "the stack is not running");
  }
  h->control({"compose", "stop"}, RunPhase::Stopped);
}

void RuntimeController::down() {
  const auto h = handle();
  if (!h) throw Error(Errc::NotRunning, "nothing is running");
  h->wait_started();
  if (h->phase() == RunPhase::Down) throw Error(Errc::NotRunning, "the stack is already down");
  h->control({"compose", "down"}, RunPhase::Down);
}

void RuntimeController::shutdown() {
  const auto h = handle();
  if (!h) return;
  h->wait_started();
  const auto p = h->phase();
  if (p == RunPhase::Up || p == RunPhase::Failed) {
    try {
      down();
    } catch (const Error&) {
    }
  }
  h->stop_background();
}

std::shared_ptr<RunHandle> RuntimeController::handle() const {
  std::lock_guard lock(mutex_);
  return current_;
}

StackStatus RuntimeController::status() const {
  const auto h = handle();
  return h ? h->status() : StackStatus{};
}

}  // namespace dcomposer
