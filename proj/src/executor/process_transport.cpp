#include "core/error.hpp"
#include "executor/executor.hpp"

#include <nlohmann/json.hpp>

#include <cerrno>
#include <condition_variable>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <mutex>
#include <pthread.h>
#include <spawn.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

extern char** environ;

namespace plotpath::executor {

using nlohmann::json;

std::string job_payload(const SandboxJob& job)
{
    json files = json::array();
    for (const auto& f : job.data_files) {
        files.push_back({{"name", f.name}, {"path", f.path.string()}});
    }
    return json{{"script", job.script}, {"data_files", files}, {"figure_dir", job.figure_dir.string()}}
        .dump(-1, ' ', false, json::error_handler_t::replace);
}

RawResult parse_runner_output(std::string_view bytes)
{
    const auto violation = [&] {
        constexpr std::size_t kQuote = 2000;
        std::string quoted(bytes.substr(0, kQuote));
        if (bytes.size() > kQuote) {
            quoted += "...";
        }
        return RawResult{RawStatus::error, {},
                         "protocol violation: runner stdout was not a single protocol object; raw output:\n" + quoted};
    };
    json j;
    try {
        j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception&) {
        return violation();
    }
    if (!j.is_object() || !j.contains("status") || !j.at("status").is_string()) {
        return violation();
    }
    const auto status = j.at("status").get<std::string>();
    if (status == "ok") {
        if (!j.contains("figures") || !j.at("figures").is_array()) {
            return violation();
        }
        RawResult raw{RawStatus::ok, {}, {}};
        for (const auto& f : j.at("figures")) {
            if (!f.is_string()) {
                return violation();
            }
            raw.figures.emplace_back(f.get<std::string>());
        }
        return raw;
    }
    if (status == "error") {
        if (!j.contains("traceback") || !j.at("traceback").is_string()) {
            return violation();
        }
        return RawResult{RawStatus::error, {}, j.at("traceback").get<std::string>()};
    }
    return violation();
}

namespace {

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }
    void reset()
    {
        if (fd >= 0) {
            ::close(fd);
        }
        fd = -1;
    }
};

class ProcessHandle : public RunHandle {
public:
    ProcessHandle(pid_t pid, int stdin_fd, int stdout_fd, std::string payload)
        : pid_(pid)
    {
        worker_ = std::thread([this, stdin_fd, stdout_fd, payload = std::move(payload)] {
            sigset_t block;
            sigemptyset(&block);
            sigaddset(&block, SIGPIPE);
            pthread_sigmask(SIG_BLOCK, &block, nullptr);

            Fd in(stdin_fd);
            Fd out(stdout_fd);
            std::size_t written = 0;
            while (written < payload.size()) {
                const auto n = ::write(in.fd, payload.data() + written, payload.size() - written);
                if (n < 0) {
                    if (errno == EINTR) {
                        continue;
                    }
                    break;
                }
                written += static_cast<std::size_t>(n);
            }
            in.reset();

            std::string captured;
            char buf[8192];
            while (true) {
                const auto n = ::read(out.fd, buf, sizeof buf);
                if (n < 0 && errno == EINTR) {
                    continue;
                }
                if (n <= 0) {
                    break;
                }
                captured.append(buf, static_cast<std::size_t>(n));
            }
            int status = 0;
            while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
            }

            std::lock_guard lock(mutex_);
            reaped_ = true;
            if (!killed_) {
                if (captured.find_first_not_of(" \t\r\n") == std::string::npos) {
                    std::string why = WIFSIGNALED(status) ? "signal " + std::to_string(WTERMSIG(status))
                                                          : "exit code " + std::to_string(WEXITSTATUS(status));
                    result_ = RawResult{RawStatus::error, {}, "protocol violation: runner produced no output (" + why + ")"};
                } else {
                    result_ = parse_runner_output(captured);
                }
            }
            cv_.notify_all();
        });
    }

    ~ProcessHandle() override
    {
        kill();
        if (worker_.joinable()) {
            worker_.join();
        }
    }

    std::optional<RawResult> wait_for(milliseconds timeout) override
    {
        std::unique_lock lock(mutex_);
        cv_.wait_for(lock, timeout, [&] { return reaped_; });
        return result_;
    }

    void kill() override
    {
        std::lock_guard lock(mutex_);
        if (!reaped_) {
            killed_ = true;
            ::kill(-pid_, SIGKILL);
            ::kill(pid_, SIGKILL);
        }
    }

private:
    pid_t pid_;
    std::mutex mutex_;
    std::condition_variable cv_;
    bool reaped_ = false;
    bool killed_ = false;
    std::optional<RawResult> result_;
    std::thread worker_;
};

} // namespace

ProcessTransport::ProcessTransport(std::vector<std::string> argv) : argv_(std::move(argv))
{
    if (argv_.empty() || argv_.front().empty()) {
        throw Error(ErrorCode::config, "runner command is empty");
    }
}

std::unique_ptr<RunHandle> ProcessTransport::launch(const SandboxJob& job)
{
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) {
        throw Error(ErrorCode::transport_unavailable, std::string("pipe: ") + std::strerror(errno));
    }
    Fd in_read(in_pipe[0]);
    Fd in_write(in_pipe[1]);
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
        throw Error(ErrorCode::transport_unavailable, std::string("pipe: ") + std::strerror(errno));
    }
    Fd out_read(out_pipe[0]);
    Fd out_write(out_pipe[1]);
    const auto err_path = job.work_dir / "runner.stderr";
    Fd err(::open(err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644));
    if (err.fd < 0) {
        err.fd = ::open("/dev/null", O_WRONLY | O_CLOEXEC);
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_read.fd, STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_write.fd, STDOUT_FILENO);
    posix_spawn_file_actions_adddup2(&actions, err.fd, STDERR_FILENO);
    if (!job.work_dir.empty()) {
        posix_spawn_file_actions_addchdir_np(&actions, job.work_dir.c_str());
    }
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);

    std::vector<char*> argv;
    for (auto& arg : argv_) {
        argv.push_back(arg.data());
    }
    argv.push_back(nullptr);

    pid_t pid = 0;
    const int rc = ::posix_spawnp(&pid, argv_.front().c_str(), &actions, &attr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    posix_spawnattr_destroy(&attr);
    if (rc != 0) {
        throw Error(ErrorCode::transport_unavailable,
                    "cannot start runner '" + argv_.front() + "': " + std::strerror(rc));
    }
    in_read.reset();
    out_write.reset();
    err.reset();

    auto handle = std::make_unique<ProcessHandle>(pid, in_write.fd, out_read.fd, job_payload(job));
    in_write.fd = -1; // owned by the handle now
    out_read.fd = -1;
    return handle;
}

} // namespace plotpath::executor
