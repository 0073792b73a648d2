#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <sstream>

#include "dcomposer/error.hpp"
#include "dcomposer/runtime.hpp"

extern char** environ;

namespace dcomposer {

namespace {

class LineSplitter {
 public:
  explicit LineSplitter(std::function<void(const std::string&)> sink)
      : sink_(std::move(sink)) {}

  void feed(const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      if (data[i] == '\n') {
        flush();
      } else {
        partial_.push_back(data[i]);
      }
    }
  }

  void finish() {
    if (!partial_.empty()) flush();
  }

 private:
  void flush() {
    if (!partial_.empty() && partial_.back() == '\r') partial_.pop_back();
    if (sink_) sink_(partial_);
    partial_.clear();
  }

  std::function<void(const std::string&)> sink_;
  std::string partial_;
};

class PosixProcess final : public ProcessHandle {
 public:
  PosixProcess(pid_t pid, int out_fd, int err_fd, ProcessCallbacks callbacks)
      : pid_(pid) {
    reader_ = std::thread([this, out_fd, err_fd, cb = std::move(callbacks)] {
      read_all(out_fd, err_fd, cb);
    });
    waiter_ = std::thread([this] { reap(); });
  }

  ~PosixProcess() override {
    terminate();
    wait();
  }

  int wait() override {
    std::lock_guard join_lock(join_mutex_);
    if (reader_.joinable()) reader_.join();
    if (waiter_.joinable()) waiter_.join();
    std::lock_guard lock(mutex_);
    return *exit_code_;
  }

  void terminate() override {
    std::lock_guard lock(mutex_);
    if (!exit_code_) ::kill(pid_, SIGTERM);
  }

  bool running() override {
    std::lock_guard lock(mutex_);
    return !exit_code_.has_value();
  }

 private:
  static void read_all(int out_fd, int err_fd, const ProcessCallbacks& cb) {
    LineSplitter out(cb.on_stdout);
    LineSplitter err(cb.on_stderr);
    std::array<pollfd, 2> fds{pollfd{out_fd, POLLIN, 0}, pollfd{err_fd, POLLIN, 0}};
    std::array<LineSplitter*, 2> sinks{&out, &err};
    int open = 2;
    std::array<char, 4096> buf{};
    while (open > 0) {
      if (::poll(fds.data(), fds.size(), -1) < 0) {
        if (errno == EINTR) continue;
        break;
      }
      for (std::size_t i = 0; i < fds.size(); ++i) {
        if (fds[i].fd < 0 || fds[i].revents == 0) continue;
        const auto n = ::read(fds[i].fd, buf.data(), buf.size());
        if (n > 0) {
          sinks[i]->feed(buf.data(), static_cast<std::size_t>(n));
        } else if (n == 0 || errno != EINTR) {
          ::close(fds[i].fd);
          fds[i].fd = -1;
          --open;
        }
      }
    }
    for (auto& f : fds) {
      if (f.fd >= 0) ::close(f.fd);
    }
    out.finish();
    err.finish();
  }

  void reap() {
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
    const int code = WIFEXITED(status)     ? WEXITSTATUS(status)
                     : WIFSIGNALED(status) ? 128 + WTERMSIG(status)
                                           : 1;
    std::lock_guard lock(mutex_);
    exit_code_ = code;
  }

  const pid_t pid_;
  std::mutex mutex_;
  std::optional<int> exit_code_;
  std::mutex join_mutex_;
  std::thread reader_;
  std::thread waiter_;
};

class ProcessAdapter final : public RuntimeAdapter {
 public:
  explicit ProcessAdapter(std::vector<std::string> command)
      : command_(std::move(command)) {
    if (command_.empty()) throw Error(Errc::InvalidValue, "empty compose command");
  }

  std::unique_ptr<ProcessHandle> spawn(const std::vector<std::string>& argv,
                                       const std::filesystem::path& workdir,
                                       ProcessCallbacks callbacks) override {
    if (argv.empty() || argv.front() != "compose") {
      throw Error(Errc::SpawnError, "adapter argv must start with 'compose'");
    }
    std::vector<std::string> full = command_;
    full.insert(full.end(), argv.begin() + 1, argv.end());
    std::vector<char*> cargv;
    for (auto& a : full) cargv.push_back(a.data());
    cargv.push_back(nullptr);

    int out[2];
    int err[2];
    if (::pipe2(out, O_CLOEXEC) != 0) {
      throw Error(Errc::SpawnError, std::string("pipe: ") + std::strerror(errno));
    }
    if (::pipe2(err, O_CLOEXEC) != 0) {
      ::close(out[0]);
      ::close(out[1]);
      throw Error(Errc::SpawnError, std::string("pipe: ") + std::strerror(errno));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, 0, "/dev/null", O_RDONLY, 0);
    posix_spawn_file_actions_adddup2(&actions, out[1], 1);
    posix_spawn_file_actions_adddup2(&actions, err[1], 2);
    const auto dir = workdir.string();
    if (!dir.empty()) posix_spawn_file_actions_addchdir_np(&actions, dir.c_str());

    pid_t pid = 0;
    const int rc = ::posix_spawnp(&pid, cargv[0], &actions, nullptr, cargv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(out[1]);
    ::close(err[1]);
    if (rc != 0) {
      ::close(out[0]);
      ::close(err[0]);
      throw Error(Errc::SpawnError,
                  "cannot start '" + full.front() + "': " + std::strerror(rc));
    }
    return std::make_unique<PosixProcess>(pid, out[0], err[0], std::move(callbacks));
  }

 private:
  std::vector<std::string> command_;
};

}  // namespace

std::shared_ptr<RuntimeAdapter> make_process_adapter(std::vector<std::string> command) {
  return std::make_shared<ProcessAdapter>(std::move(command));
}

std::vector<std::string> compose_command_from_env() {
  const char* env = std::getenv("DCOMPOSER_COMPOSE_BIN");
  std::vector<std::string> words;
  if (env) {
    std::istringstream in(env);
    for (std::string w; in >> w;) words.push_back(w);
  }
  if (words.empty()) words = {"docker", "compose"};
  return words;
}

// ---- fake -----------------------------------------------------------------

struct FakeRuntimeAdapter::Live {
  std::vector<std::string> argv;
  ProcessCallbacks callbacks;
  std::mutex mutex;
  std::condition_variable cv;
  bool done = false;
  int exit_code = 0;
};

namespace {

class FakeProcess final : public ProcessHandle {
 public:
  FakeProcess(std::shared_ptr<FakeRuntimeAdapter::Live> live,
              std::shared_ptr<std::atomic<std::size_t>> terminates)
      : live_(std::move(live)), terminates_(std::move(terminates)) {}

  int wait() override {
    std::unique_lock lock(live_->mutex);
    live_->cv.wait(lock, [&] { return live_->done; });
    return live_->exit_code;
  }

  void terminate() override {
    {
      std::lock_guard lock(live_->mutex);
      if (live_->done) return;
      live_->done = true;
      live_->exit_code = 128 + SIGTERM;
      ++*terminates_;
    }
    live_->cv.notify_all();
  }

  bool running() override {
    std::lock_guard lock(live_->mutex);
    return !live_->done;
  }

 private:
  std::shared_ptr<FakeRuntimeAdapter::Live> live_;
  std::shared_ptr<std::atomic<std::size_t>> terminates_;
};

FakeRuntimeAdapter::Reply default_reply(const std::vector<std::string>& argv) {
  FakeRuntimeAdapter::Reply r;
  if (argv.size() > 1 && argv[1] == "logs") r.follow = true;
  if (argv.size() > 1 && argv[1] == "ps") r.out = {"[]"};
  return r;
}

}  // namespace

FakeRuntimeAdapter::FakeRuntimeAdapter(Script script)
    : script_(std::move(script)),
      terminates_(std::make_shared<std::atomic<std::size_t>>(0)) {}

std::unique_ptr<ProcessHandle> FakeRuntimeAdapter::spawn(
    const std::vector<std::string>& argv, const std::filesystem::path& workdir,
    ProcessCallbacks callbacks) {
  Script script;
  {
    std::lock_guard lock(mutex_);
    if (fail_next_) {
      fail_next_ = false;
      throw Error(Errc::SpawnError, "scripted spawn failure");
    }
    transcript_.push_back(argv);
    workdirs_.push_back(workdir);
    script = script_;
  }
  const auto reply = script ? script(argv) : default_reply(argv);
  auto live = std::make_shared<Live>();
  live->argv = argv;
  live->callbacks = std::move(callbacks);
  for (const auto& line : reply.out) {
    if (live->callbacks.on_stdout) live->callbacks.on_stdout(line);
  }
  for (const auto& line : reply.err) {
    if (live->callbacks.on_stderr) live->callbacks.on_stderr(line);
  }
  if (reply.follow) {
    std::lock_guard lock(mutex_);
    live_.push_back(live);
  } else {
    live->done = true;
    live->exit_code = reply.exit_code;
  }
  return std::make_unique<FakeProcess>(live, terminates_);
}

std::vector<std::vector<std::string>> FakeRuntimeAdapter::transcript() const {
  std::lock_guard lock(mutex_);
  return transcript_;
}

std::vector<std::filesystem::path> FakeRuntimeAdapter::workdirs() const {
  std::lock_guard lock(mutex_);
  return workdirs_;
}

bool FakeRuntimeAdapter::emit(const std::string& service, const std::string& line,
                              bool to_stderr) {
  std::vector<std::shared_ptr<Live>> candidates;
  {
    std::lock_guard lock(mutex_);
    for (const auto& l : live_) {
      if (!l->argv.empty() && l->argv.back() == service) candidates.push_back(l);
    }
  }
  for (const auto& l : candidates) {
    std::lock_guard lock(l->mutex);
    if (l->done) continue;
    const auto& sink = to_stderr ? l->callbacks.on_stderr : l->callbacks.on_stdout;
    if (sink) sink(line);
    return true;
  }
  return false;
}

std::size_t FakeRuntimeAdapter::terminate_calls() const { return terminates_->load(); }

std::size_t FakeRuntimeAdapter::live_processes() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& l : live_) {
    std::lock_guard live_lock(l->mutex);
    if (!l->done) ++n;
  }
  return n;
}

void FakeRuntimeAdapter::set_script(Script script) {
  std::lock_guard lock(mutex_);
  script_ = std::move(script);
}

void FakeRuntimeAdapter::fail_next_spawn() {
  std::lock_guard lock(mutex_);
  fail_next_ = true;
}

}  // namespace dcomposer
