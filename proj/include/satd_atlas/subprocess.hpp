#pragma once

#include "satd_atlas/error.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

extern char** environ;

namespace satd {

/// A child process with piped stdin/stdout. Not copyable; the destructor
/// closes the pipes and reaps the child.
class Subprocess {
public:
    explicit Subprocess(const std::vector<std::string>& argv, bool quiet_stderr = true) {
        if (argv.empty()) throw Error(ErrorCode::Config, "empty command line");
        int in_pipe[2], out_pipe[2];
        if (pipe2(in_pipe, O_CLOEXEC) != 0 || pipe2(out_pipe, O_CLOEXEC) != 0)
            throw Error(ErrorCode::Io, std::string("pipe: ") + std::strerror(errno));

        posix_spawn_file_actions_t actions;
        posix_spawn_file_actions_init(&actions);
        posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
        posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
        if (quiet_stderr) posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, "/dev/null", O_WRONLY, 0);

        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        int rc = posix_spawnp(&pid_, args[0], &actions, nullptr, args.data(), environ);
        posix_spawn_file_actions_destroy(&actions);
        ::close(in_pipe[0]);
        ::close(out_pipe[1]);
        if (rc != 0) {
            ::close(in_pipe[1]);
            ::close(out_pipe[0]);
            throw Error(ErrorCode::Io, "cannot start '" + argv[0] + "': " + std::strerror(rc));
        }
        stdin_fd_ = in_pipe[1];
        stdout_fd_ = out_pipe[0];
    }

    Subprocess(const Subprocess&) = delete;
    Subprocess& operator=(const Subprocess&) = delete;

    ~Subprocess() {
        close_stdin();
        if (stdout_fd_ >= 0) ::close(stdout_fd_);
        if (pid_ > 0 && !exit_code_) {
            ::kill(pid_, SIGTERM);
            int status = 0;
            ::waitpid(pid_, &status, 0);
        }
    }

    /// Returns false when the child has closed its end.
    bool write(std::string_view data) {
        if (stdin_fd_ < 0) return false;
        struct sigaction ignore{}, old{};
        ignore.sa_handler = SIG_IGN;
        ::sigaction(SIGPIPE, &ignore, &old);
        bool ok = true;
        while (!data.empty()) {
            ssize_t w = ::write(stdin_fd_, data.data(), data.size());
            if (w < 0) {
                if (errno == EINTR) continue;
                ok = false;
                break;
            }
            data.remove_prefix(static_cast<std::size_t>(w));
        }
        ::sigaction(SIGPIPE, &old, nullptr);
        return ok;
    }

    void close_stdin() {
        if (stdin_fd_ >= 0) {
            ::close(stdin_fd_);
            stdin_fd_ = -1;
        }
    }

    /// Next line without the trailing newline; nullopt at EOF.
    std::optional<std::string> read_line() {
        std::string line;
        while (true) {
            auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            if (!fill()) {
                if (buffer_.empty()) return std::nullopt;
                line.swap(buffer_);
                return line;
            }
        }
    }

    std::string read_exact(std::size_t n) {
        while (buffer_.size() < n)
            if (!fill()) throw Error(ErrorCode::Io, "unexpected end of child output");
        std::string out = buffer_.substr(0, n);
        buffer_.erase(0, n);
        return out;
    }

    std::string read_all() {
        while (fill()) {
        }
        std::string out;
        out.swap(buffer_);
        return out;
    }

    int wait() {
        if (exit_code_) return *exit_code_;
        close_stdin();
        int status = 0;
        while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
        }
        exit_code_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
        return *exit_code_;
    }

private:
    bool fill() {
        if (stdout_fd_ < 0) return false;
        char buf[65536];
        while (true) {
            ssize_t r = ::read(stdout_fd_, buf, sizeof buf);
            if (r < 0 && errno == EINTR) continue;
            if (r <= 0) {
                ::close(stdout_fd_);
                stdout_fd_ = -1;
                return false;
            }
            buffer_.append(buf, static_cast<std::size_t>(r));
            return true;
        }
    }

    pid_t pid_ = -1;
    int stdin_fd_ = -1;
    int stdout_fd_ = -1;
    std::string buffer_;
    std::optional<int> exit_code_;
};

struct CommandResult {
    int exit_code = 0;
    std::string out;
};

inline CommandResult run_command(const std::vector<std::string>& argv) {
    Subprocess p(argv);
    p.close_stdin();
    CommandResult r;
    r.out = p.read_all();
    r.exit_code = p.wait();
    return r;
}

} // namespace satd
