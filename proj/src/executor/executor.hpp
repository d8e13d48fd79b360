#pragma once

#include "core/types.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace plotpath::executor {

using std::chrono::milliseconds;

struct SandboxJob {
    std::string script;
    std::vector<DataFile> data_files;
    std::filesystem::path work_dir;
    std::filesystem::path figure_dir;
    milliseconds timeout{60'000};
};

enum class RawStatus { ok, error };

/// What a runner reports for one job. Figure paths may be relative to the
/// job's figure_dir.
struct RawResult {
    RawStatus status = RawStatus::error;
    std::vector<std::filesystem::path> figures;
    std::string traceback;
};

/// A launched job. At most one result per job; kill() must stop it.
class RunHandle {
public:
    virtual ~RunHandle() = default;
    /// nullopt on timeout.
    virtual std::optional<RawResult> wait_for(milliseconds timeout) = 0;
    virtual void kill() = 0;
};

class RunnerTransport {
public:
    virtual ~RunnerTransport() = default;
    /// Throws Error{transport_unavailable} when the runner cannot be started.
    virtual std::unique_ptr<RunHandle> launch(const SandboxJob& job) = 0;
};

/// Keeps the last `limit` bytes (never splitting a UTF-8 sequence) behind an
/// ellipsis marker; shorter text is returned unchanged.
std::string truncate_error(std::string_view text, std::size_t limit);

inline constexpr std::string_view kEllipsis = "...[truncated]\n";

/// Runs one job and routes the raw result: a successful run with at least
/// one readable figure becomes a rendered outcome, everything else (errors,
/// timeouts, missing figures) a failed one with truncated error text.
ExecutionOutcome execute(const SandboxJob& job, RunnerTransport& transport, std::size_t max_error_chars);

/// Creates a fresh private directory per job under `root`, copies the data
/// files in, executes, reads the figures into memory and deletes the
/// directory again. Safe to use from several threads.
class Sandbox {
public:
    Sandbox(std::filesystem::path root, RunnerTransport& transport, milliseconds timeout,
            std::size_t max_error_chars);

    ExecutionOutcome run(const CandidateScript& script, const std::vector<DataFile>& data_files);

    [[nodiscard]] const std::filesystem::path& root() const noexcept { return root_; }

private:
    std::filesystem::path root_;
    RunnerTransport& transport_;
    milliseconds timeout_;
    std::size_t max_error_chars_;
};

/// Default scratch root: $TMPDIR/plotpath-<pid>.
std::filesystem::path default_scratch_root();

// ---- transports ----------------------------------------------------------

/// Behavior of one stubbed job.
struct StubBehavior {
    enum class Kind { render, fail, hang, no_figure, garbage };
    Kind kind = Kind::render;
    int figures = 1;
    std::string traceback = "Traceback (most recent call last):\nRuntimeError: stub failure";
    milliseconds delay{0};
};

/// Reads "# stub: <directive>" lines from the script:
///   error <text>   fail with a traceback ending in <text>
///   hang           never finish
///   nofig          succeed without figures
///   figs <n>       render n figures
///   garbage        violate the wire protocol
///   delay <ms>     sleep before finishing
/// A script without directives renders one figure.
StubBehavior directive_behavior(const SandboxJob& job);

/// In-process transport. Each job runs on its own thread, writes
/// deterministic PNGs derived from the script text and honors kill().
class StubTransport : public RunnerTransport {
public:
    using Policy = std::function<StubBehavior(const SandboxJob&)>;

    explicit StubTransport(Policy policy = directive_behavior);

    std::unique_ptr<RunHandle> launch(const SandboxJob& job) override;

private:
    Policy policy_;
};

/// Spawns the runner executable per job, writes the job as one JSON object
/// on its stdin and parses one JSON object from its stdout. Runner stderr is
/// kept in <work_dir>/runner.stderr.
class ProcessTransport : public RunnerTransport {
public:
    explicit ProcessTransport(std::vector<std::string> argv);

    std::unique_ptr<RunHandle> launch(const SandboxJob& job) override;

private:
    std::vector<std::string> argv_;
};

/// The wire payload for `job`.
std::string job_payload(const SandboxJob& job);

/// Parses runner stdout. Anything other than exactly one conforming JSON
/// object becomes an error result quoting the raw bytes.
RawResult parse_runner_output(std::string_view stdout_bytes);

} // namespace plotpath::executor
