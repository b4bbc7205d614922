#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <condition_variable>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "anaforge/sim.hpp"

extern char** environ;

namespace anaforge {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

std::optional<fs::path> which(const std::string& program) {
  if (program.find('/') != std::string::npos) {
    return fs::exists(program) ? std::optional<fs::path>(program) : std::nullopt;
  }
  const char* path = std::getenv("PATH");
  std::istringstream dirs(path ? path : "");
  std::string dir;
  while (std::getline(dirs, dir, ':')) {
    if (dir.empty()) continue;
    fs::path candidate = fs::path(dir) / program;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate;
  }
  return std::nullopt;
}

bool is_script(const std::string& executable) {
  auto ext = fs::path(executable).extension().string();
  return ext == ".mjs" || ext == ".js";
}

// argv prefix that starts the engine: [node, script] or [engine].
std::vector<std::string> launcher(const EngineConfig& config) {
  if (config.executable.empty()) throw EngineNotFound("no SPICE engine configured (set ANAFORGE_SPICE)");
  if (is_script(config.executable)) {
    if (!fs::exists(config.executable)) throw EngineNotFound("engine script not found: " + config.executable);
    auto node = which("node");
    if (!node) throw EngineNotFound("node is required to run " + config.executable);
    return {node->string(), config.executable};
  }
  auto exe = which(config.executable);
  if (!exe) throw EngineNotFound("SPICE engine not found: " + config.executable);
  return {exe->string()};
}

std::vector<char*> as_argv(std::vector<std::string>& args) {
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  return argv;
}

// Environment for engine children: ask native ngspice for ASCII raw output.
std::vector<std::string> child_environment() {
  std::vector<std::string> env;
  for (char** e = environ; *e; ++e) {
    if (std::string_view(*e).starts_with("SPICE_ASCIIRAWFILE=")) continue;
    env.emplace_back(*e);
  }
  env.emplace_back("SPICE_ASCIIRAWFILE=1");
  return env;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class SpawnActions {
 public:
  SpawnActions() { posix_spawn_file_actions_init(&actions_); }
  ~SpawnActions() { posix_spawn_file_actions_destroy(&actions_); }
  posix_spawn_file_actions_t* get() { return &actions_; }

 private:
  posix_spawn_file_actions_t actions_;
};

pid_t spawn(std::vector<std::string> args, SpawnActions& actions) {
  auto env_strings = child_environment();
  auto argv = as_argv(args);
  auto envp = as_argv(env_strings);
  pid_t pid = 0;
  int rc = ::posix_spawn(&pid, argv[0], actions.get(), nullptr, argv.data(), envp.data());
  if (rc != 0) throw EngineNotFound("cannot start " + args[0] + ": " + std::strerror(rc));
  return pid;
}

// Waits for `pid` until the deadline; kills it and throws on timeout.
int wait_with_deadline(pid_t pid, Clock::time_point deadline, const std::string& what) {
  int status = 0;
  auto pause = std::chrono::milliseconds(2);
  for (;;) {
    pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0) throw Error("waitpid failed for " + what);
    if (Clock::now() >= deadline) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      throw SimulationTimeout(what + " exceeded the simulation timeout");
    }
    std::this_thread::sleep_for(pause);
    pause = std::min(pause * 2, std::chrono::milliseconds(50));
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

class BatchEngine final : public SpiceEngine {
 public:
  explicit BatchEngine(EngineConfig config) : config_(std::move(config)), argv0_(launcher(config_)) {}

  EngineRun execute(const fs::path& deck, const fs::path& raw, const fs::path& log) override {
    std::vector<std::string> args = argv0_;
    args.insert(args.end(), {"-b", deck.string(), "-r", raw.string()});
    SpawnActions actions;
    posix_spawn_file_actions_addopen(actions.get(), STDIN_FILENO, "/dev/null", O_RDONLY, 0);
    posix_spawn_file_actions_addopen(actions.get(), STDOUT_FILENO, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    posix_spawn_file_actions_adddup2(actions.get(), STDOUT_FILENO, STDERR_FILENO);
    posix_spawn_file_actions_addchdir_np(actions.get(), deck.parent_path().c_str());
    pid_t pid = spawn(args, actions);
    int status = wait_with_deadline(pid, Clock::now() + config_.timeout, "engine run for " + deck.string());
    return {status, read_file(log)};
  }

  std::string describe() const override { return "batch:" + config_.executable; }

 private:
  EngineConfig config_;
  std::vector<std::string> argv0_;
};

// One long-lived `--server` child.
class ServerProcess {
 public:
  ServerProcess(const std::vector<std::string>& argv0, std::chrono::milliseconds timeout) {
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) throw Error("pipe() failed");
    ::fcntl(to_child[1], F_SETFD, FD_CLOEXEC);
    ::fcntl(from_child[0], F_SETFD, FD_CLOEXEC);
    SpawnActions actions;
    posix_spawn_file_actions_adddup2(actions.get(), to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(actions.get(), from_child[1], STDOUT_FILENO);
    posix_spawn_file_actions_addopen(actions.get(), STDERR_FILENO, "/dev/null", O_WRONLY, 0);
    std::vector<std::string> args = argv0;
    args.push_back("--server");
    try {
      pid_ = spawn(args, actions);
    } catch (...) {
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
      throw;
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    in_ = to_child[1];
    out_ = from_child[0];
    auto hello = read_line(Clock::now() + timeout);
    if (!hello || hello->find("ready") == std::string::npos) {
      terminate();
      throw EngineNotFound("SPICE server did not start: " + args[0]);
    }
  }

  ~ServerProcess() { terminate(); }
  ServerProcess(const ServerProcess&) = delete;
  ServerProcess& operator=(const ServerProcess&) = delete;

  bool alive() const { return pid_ > 0; }

  /// Sends one request; nullopt when the reply did not arrive in time.
  std::optional<std::string> request(const std::string& line, Clock::time_point deadline) {
    std::string payload = line + "\n";
    std::size_t sent = 0;
    while (sent < payload.size()) {
      ssize_t n = ::write(in_, payload.data() + sent, payload.size() - sent);
      if (n <= 0) return std::nullopt;
      sent += static_cast<std::size_t>(n);
    }
    return read_line(deadline);
  }

  void terminate() {
    if (in_ >= 0) ::close(in_);
    if (out_ >= 0) ::close(out_);
    in_ = out_ = -1;
    if (pid_ > 0) {
      ::kill(pid_, SIGKILL);
      int status = 0;
      ::waitpid(pid_, &status, 0);
    }
    pid_ = -1;
  }

 private:
  std::optional<std::string> read_line(Clock::time_point deadline) {
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
      if (remaining <= 0) return std::nullopt;
      pollfd pfd{out_, POLLIN, 0};
      int r = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining, 1000)));
      if (r < 0 && errno != EINTR) return std::nullopt;
      if (r <= 0) continue;
      char chunk[4096];
      ssize_t n = ::read(out_, chunk, sizeof chunk);
      if (n <= 0) return std::nullopt;
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  pid_t pid_ = -1;
  int in_ = -1;
  int out_ = -1;
  std::string buffer_;
};

class ServerEngine final : public SpiceEngine {
 public:
  explicit ServerEngine(EngineConfig config) : config_(std::move(config)), argv0_(launcher(config_)) {
    // A crashed server must surface as a failed write, not kill the caller.
    ::signal(SIGPIPE, SIG_IGN);
    slots_.resize(static_cast<std::size_t>(std::max(1, config_.workers)));
    free_.assign(slots_.size(), true);
  }

  EngineRun execute(const fs::path& deck, const fs::path& raw, const fs::path& log) override {
    std::size_t slot = acquire();
    struct Release {
      ServerEngine* self;
      std::size_t slot;
      ~Release() { self->release(slot); }
    } release{this, slot};

    auto& proc = slots_[slot];
    // Start-up is excluded from the per-run deadline.
    if (!proc || !proc->alive()) proc = std::make_unique<ServerProcess>(argv0_, config_.timeout);
    nlohmann::json req{{"deck", fs::absolute(deck).string()},
                       {"raw", fs::absolute(raw).string()},
                       {"log", fs::absolute(log).string()}};
    auto reply = proc->request(req.dump(), Clock::now() + config_.timeout);
    if (!reply) {
      proc.reset();
      throw SimulationTimeout("engine run for " + deck.string() + " exceeded the simulation timeout");
    }
    int status = 3;
    try {
      status = nlohmann::json::parse(*reply).at("status").get<int>();
    } catch (const std::exception&) {
      proc.reset();
      throw Error("malformed reply from SPICE server: " + *reply);
    }
    return {status, read_file(log)};
  }

  std::string describe() const override { return "server:" + config_.executable; }

 private:
  std::size_t acquire() {
    std::unique_lock lock(mutex_);
    std::size_t found = 0;
    cv_.wait(lock, [&] {
      for (std::size_t i = 0; i < free_.size(); ++i) {
        if (free_[i]) {
          found = i;
          return true;
        }
      }
      return false;
    });
    free_[found] = false;
    return found;
  }

  void release(std::size_t slot) {
    {
      std::lock_guard lock(mutex_);
      free_[slot] = true;
    }
    cv_.notify_one();
  }

  EngineConfig config_;
  std::vector<std::string> argv0_;
  std::vector<std::unique_ptr<ServerProcess>> slots_;
  std::vector<bool> free_;
  std::mutex mutex_;
  std::condition_variable cv_;
};

}  // namespace

EngineConfig engine_config_from_env(const std::optional<fs::path>& search_root) {
  EngineConfig config;
  if (const char* mode = std::getenv("ANAFORGE_SPICE_MODE")) {
    config.mode = std::string_view(mode) == "server" ? EngineMode::server : EngineMode::batch;
  }
  if (const char* timeout = std::getenv("ANAFORGE_SPICE_TIMEOUT")) {
    config.timeout = std::chrono::milliseconds(static_cast<long long>(std::atof(timeout) * 1000.0));
  }
  if (const char* path = std::getenv("ANAFORGE_SPICE"); path && *path) {
    config.executable = path;
    return config;
  }
  if (which("ngspice")) {
    config.executable = "ngspice";
    return config;
  }
  std::vector<fs::path> roots;
  if (search_root) roots.push_back(*search_root);
  roots.push_back(fs::current_path());
  for (const auto& root : roots) {
    for (fs::path dir = fs::absolute(root); !dir.empty(); dir = dir.parent_path()) {
      fs::path candidate = dir / "tools" / "ngspice-wasm" / "ngspice-wasm.mjs";
      if (fs::exists(candidate) && fs::exists(candidate.parent_path() / "node_modules")) {
        config.executable = candidate.string();
        if (!std::getenv("ANAFORGE_SPICE_MODE")) config.mode = EngineMode::server;
        return config;
      }
      if (dir == dir.parent_path()) break;
    }
  }
  return config;
}

std::shared_ptr<SpiceEngine> make_batch_engine(const EngineConfig& config) {
  return std::make_shared<BatchEngine>(config);
}

std::shared_ptr<SpiceEngine> make_server_engine(const EngineConfig& config) {
  return std::make_shared<ServerEngine>(config);
}

std::shared_ptr<SpiceEngine> make_engine(const EngineConfig& config) {
  return config.mode == EngineMode::server ? make_server_engine(config) : make_batch_engine(config);
}

}  // namespace anaforge
