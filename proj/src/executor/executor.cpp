#include "executor/executor.hpp"

#include "core/bytes.hpp"
#include "core/error.hpp"

#include <atomic>
#include <random>
#include <set>
#include <unistd.h>

namespace plotpath::executor {

namespace fs = std::filesystem;

std::string truncate_error(std::string_view text, std::size_t limit)
{
    if (text.size() <= limit) {
        return std::string(text);
    }
    auto start = text.size() - limit;
    while (start < text.size() && (static_cast<unsigned char>(text[start]) & 0xC0) == 0x80) {
        ++start;
    }
    return std::string(kEllipsis) + std::string(text.substr(start));
}

ExecutionOutcome execute(const SandboxJob& job, RunnerTransport& transport, std::size_t max_error_chars)
{
    if (job.timeout.count() <= 0) {
        throw Error(ErrorCode::invalid_argument, "sandbox timeout must be > 0");
    }
    std::error_code ec;
    if (fs::exists(job.figure_dir, ec) && !fs::is_empty(job.figure_dir, ec)) {
        throw Error(ErrorCode::invalid_argument, "figure directory is not empty: " + job.figure_dir.string());
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto elapsed = [&] {
        return std::chrono::duration_cast<milliseconds>(std::chrono::steady_clock::now() - t0).count();
    };

    auto handle = transport.launch(job);
    auto raw = handle->wait_for(job.timeout);
    if (!raw) {
        handle->kill();
        const auto seconds = static_cast<double>(job.timeout.count()) / 1000.0;
        char msg[96];
        std::snprintf(msg, sizeof msg, "execution timed out after %gs and was killed", seconds);
        return ExecutionOutcome::failed(msg, elapsed(), true);
    }
    if (raw->status == RawStatus::error) {
        auto text = raw->traceback.empty() ? std::string("runner reported an error without a traceback")
                                           : raw->traceback;
        return ExecutionOutcome::failed(truncate_error(text, max_error_chars), elapsed());
    }

    std::vector<Figure> figures;
    std::set<fs::path> seen;
    auto figure_root = fs::weakly_canonical(job.figure_dir, ec);
    if (ec) {
        figure_root = job.figure_dir.lexically_normal();
    }
    for (const auto& reported : raw->figures) {
        const auto path = reported.is_absolute() ? reported : job.figure_dir / reported;
        auto canonical = fs::weakly_canonical(path, ec);
        if (ec) {
            canonical = path.lexically_normal();
        }
        const auto rel = canonical.lexically_relative(figure_root);
        if (rel.empty() || *rel.begin() == "..") {
            return ExecutionOutcome::failed("runner reported a figure outside the figure directory: " +
                                                reported.string(),
                                            elapsed());
        }
        if (!seen.insert(canonical).second) {
            continue;
        }
        Bytes png;
        try {
            png = read_file(path);
        } catch (const Error&) {
            return ExecutionOutcome::failed("runner reported a figure that does not exist: " + reported.string(),
                                            elapsed());
        }
        if (png.empty()) {
            return ExecutionOutcome::failed("runner reported an empty figure file: " + reported.string(), elapsed());
        }
        figures.push_back(Figure{reported.filename().string(), std::move(png)});
    }
    if (figures.empty()) {
        return ExecutionOutcome::failed("no figure produced", elapsed());
    }
    return ExecutionOutcome::rendered(std::move(figures), elapsed());
}

fs::path default_scratch_root()
{
    std::error_code ec;
    auto base = fs::temp_directory_path(ec);
    if (ec) {
        base = "/tmp";
    }
    return base / ("plotpath-" + std::to_string(::getpid()));
}

Sandbox::Sandbox(fs::path root, RunnerTransport& transport, milliseconds timeout, std::size_t max_error_chars)
    : root_(std::move(root)), transport_(transport), timeout_(timeout), max_error_chars_(max_error_chars)
{
}

namespace {

fs::path fresh_directory(const fs::path& root)
{
    static std::atomic<std::uint64_t> counter{0};
    thread_local std::mt19937_64 rng{std::random_device{}()};
    std::error_code ec;
    fs::create_directories(root, ec);
    for (int attempt = 0; attempt < 16; ++attempt) {
        const auto name = "job-" + std::to_string(counter.fetch_add(1)) + "-" + std::to_string(rng() % 1'000'000);
        const auto dir = root / name;
        if (fs::create_directory(dir, ec)) {
            return dir;
        }
    }
    throw Error(ErrorCode::storage_unavailable, "cannot create a sandbox directory under " + root.string());
}

struct ScopedRemove {
    fs::path dir;
    ~ScopedRemove()
    {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
};

} // namespace

ExecutionOutcome Sandbox::run(const CandidateScript& script, const std::vector<DataFile>& data_files)
{
    SandboxJob job;
    job.script = script.source;
    job.work_dir = fresh_directory(root_);
    ScopedRemove cleanup{job.work_dir};
    job.figure_dir = job.work_dir / "figures";
    job.timeout = timeout_;
    std::error_code ec;
    fs::create_directories(job.figure_dir, ec);
    for (const auto& file : data_files) {
        const auto target = job.work_dir / fs::path(file.name).filename();
        fs::copy_file(file.path, target, fs::copy_options::overwrite_existing, ec);
        if (ec) {
            return ExecutionOutcome::failed("could not stage data file '" + file.name + "': " + ec.message(), 0);
        }
        job.data_files.push_back(DataFile{file.name, target});
    }
    return execute(job, transport_, max_error_chars_);
}

} // namespace plotpath::executor
