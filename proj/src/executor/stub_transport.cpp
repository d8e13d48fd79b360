#include "core/bytes.hpp"
#include "core/error.hpp"
#include "executor/executor.hpp"

#include <condition_variable>
#include <mutex>
#include <sstream>
#include <thread>

namespace plotpath::executor {

namespace fs = std::filesystem;

StubBehavior directive_behavior(const SandboxJob& job)
{
    StubBehavior behavior;
    std::istringstream in(job.script);
    std::string line;
    constexpr std::string_view kTag = "# stub:";
    while (std::getline(in, line)) {
        const auto at = line.find(kTag);
        if (at == std::string::npos) {
            continue;
        }
        std::istringstream directive(line.substr(at + kTag.size()));
        std::string word;
        directive >> word;
        if (word == "error") {
            std::string rest;
            std::getline(directive, rest);
            const auto first = rest.find_first_not_of(' ');
            rest = first == std::string::npos ? "RuntimeError: stub failure" : rest.substr(first);
            behavior.kind = StubBehavior::Kind::fail;
            behavior.traceback = "Traceback (most recent call last):\n  File \"candidate.py\", line 1, in <module>\n" + rest;
        } else if (word == "hang") {
            behavior.kind = StubBehavior::Kind::hang;
        } else if (word == "nofig") {
            behavior.kind = StubBehavior::Kind::no_figure;
        } else if (word == "garbage") {
            behavior.kind = StubBehavior::Kind::garbage;
        } else if (word == "figs") {
            directive >> behavior.figures;
        } else if (word == "delay") {
            long ms = 0;
            directive >> ms;
            behavior.delay = milliseconds(ms);
        }
    }
    return behavior;
}

namespace {

Bytes stub_png(const std::string& script, int n)
{
    const auto digest = sha256_hex(script + "#" + std::to_string(n));
    constexpr int kSide = 16;
    std::vector<std::uint8_t> rgb(kSide * kSide * 3);
    for (std::size_t i = 0; i < rgb.size(); ++i) {
        rgb[i] = static_cast<std::uint8_t>(digest[i % digest.size()] * 7 + i);
    }
    return encode_png(kSide, kSide, rgb);
}

struct StubState {
    std::mutex mutex;
    std::condition_variable cv;
    std::optional<RawResult> result;
    bool killed = false;
};

class StubHandle : public RunHandle {
public:
    StubHandle(SandboxJob job, StubBehavior behavior) : state_(std::make_shared<StubState>())
    {
        worker_ = std::thread([state = state_, job = std::move(job), behavior = std::move(behavior)] {
            std::unique_lock lock(state->mutex);
            if (behavior.kind == StubBehavior::Kind::hang) {
                state->cv.wait(lock, [&] { return state->killed; });
                return;
            }
            if (state->cv.wait_for(lock, behavior.delay, [&] { return state->killed; })) {
                return;
            }
            lock.unlock();
            RawResult raw;
            switch (behavior.kind) {
            case StubBehavior::Kind::render:
                raw.status = RawStatus::ok;
                try {
                    for (int i = 1; i <= behavior.figures; ++i) {
                        const auto name = "fig_" + std::to_string(i) + ".png";
                        write_file_atomic(job.figure_dir / name, stub_png(job.script, i));
                        raw.figures.emplace_back(name);
                    }
                } catch (const std::exception& e) {
                    raw = RawResult{RawStatus::error, {}, std::string("stub could not write figure: ") + e.what()};
                }
                break;
            case StubBehavior::Kind::no_figure:
                raw.status = RawStatus::ok;
                break;
            case StubBehavior::Kind::fail:
                raw.status = RawStatus::error;
                raw.traceback = behavior.traceback;
                break;
            case StubBehavior::Kind::garbage:
                raw = parse_runner_output("Hello from the script\n{\"status\": ");
                break;
            case StubBehavior::Kind::hang:
                break;
            }
            lock.lock();
            state->result = std::move(raw);
            state->cv.notify_all();
        });
    }

    ~StubHandle() override
    {
        kill();
        if (worker_.joinable()) {
            worker_.join();
        }
    }

    std::optional<RawResult> wait_for(milliseconds timeout) override
    {
        std::unique_lock lock(state_->mutex);
        state_->cv.wait_for(lock, timeout, [&] { return state_->result.has_value() || state_->killed; });
        return state_->result;
    }

    void kill() override
    {
        std::lock_guard lock(state_->mutex);
        state_->killed = true;
        state_->cv.notify_all();
    }

private:
    std::shared_ptr<StubState> state_;
    std::thread worker_;
};

} // namespace

StubTransport::StubTransport(Policy policy) : policy_(std::move(policy))
{
    if (!policy_) {
        throw Error(ErrorCode::invalid_argument, "stub transport needs a policy");
    }
}

std::unique_ptr<RunHandle> StubTransport::launch(const SandboxJob& job)
{
    return std::make_unique<StubHandle>(job, policy_(job));
}

} // namespace plotpath::executor
