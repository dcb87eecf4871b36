#pragma once

#include <cerrno>
#include <cstring>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "refscan/error.hpp"

extern char** environ;

namespace refscan::detail {

struct ProcessResult {
  int exit_status = -1;
  std::string out;
  std::string err;
};

class Pipe {
 public:
  Pipe() {
    if (::pipe2(fds_, O_CLOEXEC) != 0) {
      throw Error(ErrorCode::kGitInvocationFailure, std::string("pipe: ") + std::strerror(errno));
    }
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  Pipe(const Pipe&) = delete;
  Pipe& operator=(const Pipe&) = delete;

  int read_end() const { return fds_[0]; }
  int write_end() const { return fds_[1]; }
  void close_read() { close_fd(fds_[0]); }
  void close_write() { close_fd(fds_[1]); }

 private:
  static void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
  int fds_[2] = {-1, -1};
};

inline std::vector<std::string> merged_environment(
    const std::map<std::string, std::string>& overrides) {
  std::vector<std::string> env;
  for (char** e = environ; e && *e; ++e) {
    std::string_view entry(*e);
    const auto eq = entry.find('=');
    const std::string key(entry.substr(0, eq));
    if (!overrides.contains(key)) env.emplace_back(entry);
  }
  for (const auto& [k, v] : overrides) env.push_back(k + "=" + v);
  return env;
}

inline std::vector<char*> c_strings(std::vector<std::string>& items) {
  std::vector<char*> out;
  out.reserve(items.size() + 1);
  for (auto& s : items) out.push_back(s.data());
  out.push_back(nullptr);
  return out;
}

/// Spawned child with optional stdin pipe; stdout and stderr are captured.
class Child {
 public:
  Child(std::vector<std::string> argv, const std::map<std::string, std::string>& env,
        bool with_stdin) {
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    if (with_stdin) {
      posix_spawn_file_actions_adddup2(&actions, in_.read_end(), STDIN_FILENO);
    } else {
      posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
    }
    posix_spawn_file_actions_adddup2(&actions, out_.write_end(), STDOUT_FILENO);
    posix_spawn_file_actions_adddup2(&actions, err_.write_end(), STDERR_FILENO);
    auto env_strings = merged_environment(env);
    auto envp = c_strings(env_strings);
    auto args = c_strings(argv);
    const int rc = ::posix_spawnp(&pid_, args[0], &actions, nullptr, args.data(), envp.data());
    posix_spawn_file_actions_destroy(&actions);
    in_.close_read();
    out_.close_write();
    err_.close_write();
    if (!with_stdin) in_.close_write();
    if (rc != 0) {
      pid_ = -1;
      throw Error(ErrorCode::kGitInvocationFailure,
                  "cannot spawn " + argv[0] + ": " + std::strerror(rc));
    }
  }

  ~Child() {
    if (pid_ > 0) {
      in_.close_write();
      int status = 0;
      ::waitpid(pid_, &status, 0);
    }
  }

  Child(const Child&) = delete;
  Child& operator=(const Child&) = delete;

  void write_all(std::string_view data) {
    while (!data.empty()) {
      const ssize_t n = ::write(in_.write_end(), data.data(), data.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::kGitInvocationFailure,
                    std::string("write to child: ") + std::strerror(errno));
      }
      data.remove_prefix(static_cast<std::size_t>(n));
    }
  }

  // Reads exactly n bytes from the child's stdout.
  std::string read_exact(std::size_t n) {
    std::string buf;
    buf.reserve(n);
    while (buf.size() < n) {
      fill();
      const std::size_t take = std::min(n - buf.size(), pending_.size() - pending_pos_);
      buf.append(pending_, pending_pos_, take);
      pending_pos_ += take;
    }
    return buf;
  }

  std::string read_line() {
    std::string line;
    for (;;) {
      fill();
      const auto nl = pending_.find('\n', pending_pos_);
      if (nl != std::string::npos) {
        line.append(pending_, pending_pos_, nl - pending_pos_);
        pending_pos_ = nl + 1;
        return line;
      }
      line.append(pending_, pending_pos_, std::string::npos);
      pending_pos_ = pending_.size();
    }
  }

  /// Closes stdin, drains both output streams and reaps the child.
  ProcessResult finish() {
    in_.close_write();
    ProcessResult result;
    result.out.assign(pending_, pending_pos_, std::string::npos);
    pending_.clear();
    pending_pos_ = 0;
    pollfd fds[2] = {{out_.read_end(), POLLIN, 0}, {err_.read_end(), POLLIN, 0}};
    std::string* sinks[2] = {&result.out, &result.err};
    int open_count = 2;
    char buf[65536];
    while (open_count > 0) {
      if (::poll(fds, 2, -1) < 0) {
        if (errno == EINTR) continue;
        break;
      }
      for (int i = 0; i < 2; ++i) {
        if (fds[i].fd < 0 || fds[i].revents == 0) continue;
        const ssize_t n = ::read(fds[i].fd, buf, sizeof buf);
        if (n > 0) {
          sinks[i]->append(buf, static_cast<std::size_t>(n));
        } else if (n == 0 || errno != EINTR) {
          fds[i].fd = -1;
          --open_count;
        }
      }
    }
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
    pid_ = -1;
    result.exit_status = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    return result;
  }

 private:
  void fill() {
    if (pending_pos_ < pending_.size()) return;
    pending_.clear();
    pending_pos_ = 0;
    char buf[65536];
    for (;;) {
      const ssize_t n = ::read(out_.read_end(), buf, sizeof buf);
      if (n > 0) {
        pending_.append(buf, static_cast<std::size_t>(n));
        return;
      }
      if (n < 0 && errno == EINTR) continue;
      throw Error(ErrorCode::kGitInvocationFailure, "child closed its output early");
    }
  }

  Pipe in_;
  Pipe out_;
  Pipe err_;
  pid_t pid_ = -1;
  std::string pending_;
  std::size_t pending_pos_ = 0;
};

inline ProcessResult run_process(std::vector<std::string> argv,
                                 const std::map<std::string, std::string>& env = {}) {
  Child child(std::move(argv), env, false);
  return child.finish();
}

}  // namespace refscan::detail
