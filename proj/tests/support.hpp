#pragma once

#include "agents/prompts.hpp"
#include "gateway/backends.hpp"
#include "gateway/gateway.hpp"

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

namespace testing {

namespace fs = std::filesystem;

class TempDir {
public:
    TempDir()
    {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("plotpath-test-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
        fs::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline std::string fenced(const std::string& body)
{
    return "```python\n" + body + "\n```";
}

/// Every "# stub: ..." line of `text`, joined with newlines.
inline std::string stub_lines(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    std::string out;
    while (std::getline(in, line)) {
        const auto pos = line.find("# stub:");
        if (pos != std::string::npos) {
            out += line.substr(pos) + "\n";
        }
    }
    return out;
}

/// `k` plans; plan i carries directives[i] (if any) as a stub line.
inline std::string plans_reply(int k, const std::vector<std::string>& directives = {})
{
    std::string out;
    for (int i = 1; i <= k; ++i) {
        out += "PLAN " + std::to_string(i) + ":\nChart type: " + (i % 2 ? "line" : "bar") + "\nVariant " +
               std::to_string(i) + ".\n";
        if (static_cast<std::size_t>(i - 1) < directives.size() && !directives[i - 1].empty()) {
            out += "# stub: " + directives[i - 1] + "\n";
        }
        out += "\n";
    }
    return out;
}

inline const std::string kFeedbackReply = "SEMANTIC ALIGNMENT: matches the request\n"
                                          "DATA CORRECTNESS: right columns\n"
                                          "VISUAL QUALITY: readable\n"
                                          "VERDICT: usable";

/// Scripted answers for every role. Plans come from `plans_for(k)` reading
/// the requested count out of the prompt; the code agent copies any stub
/// directives of its plan into the script, so a plan controls its branch's
/// execution.
inline std::shared_ptr<plotpath::gateway::ScriptedBackend> standard_backend(
    std::vector<std::string> directives = {}, std::string final_directive = {})
{
    using plotpath::RoleTag;
    using plotpath::gateway::ChatRequest;
    auto backend = std::make_shared<plotpath::gateway::ScriptedBackend>();
    backend->add_rule(RoleTag::mpa, "", [directives](const ChatRequest& r) {
        static const std::regex want(R"(Write exactly (\d+) distinct plans)");
        std::smatch m;
        const auto& text = r.last_user_text();
        const int k = std::regex_search(text, m, want) ? std::stoi(m[1]) : 3;
        return plans_reply(k, directives);
    });
    backend->add_rule(RoleTag::code, "", [](const ChatRequest& r) {
        const auto& text = r.messages[1].text;
        return "Script:\n" + fenced(stub_lines(text) + "import matplotlib.pyplot as plt\nplt.plot([1, 2, 3])");
    });
    backend->add_rule(RoleTag::fb, "", std::string(kFeedbackReply));
    backend->add_rule(RoleTag::syn, "", [final_directive](const ChatRequest&) {
        return fenced((final_directive.empty() ? "" : "# stub: " + final_directive + "\n") +
                      "import matplotlib.pyplot as plt\nplt.bar([1, 2], [3, 4])");
    });
    backend->add_rule(RoleTag::baseline, "", fenced("import matplotlib.pyplot as plt\nplt.plot([0, 1])"));
    backend->add_rule(RoleTag::judge, "yes or no", std::string("yes"));
    backend->add_rule(RoleTag::judge, "", std::string("81"));
    return backend;
}

/// Answers one role through `responder` and delegates everything else.
class RoleOverride : public plotpath::gateway::ChatBackend {
public:
    using Responder = std::function<std::string(const plotpath::gateway::ChatRequest&)>;

    RoleOverride(std::shared_ptr<plotpath::gateway::ChatBackend> inner, plotpath::RoleTag role, Responder responder)
        : inner_(std::move(inner)), role_(role), responder_(std::move(responder))
    {
    }

    plotpath::gateway::ChatResponse send(const plotpath::gateway::ChatRequest& request) override
    {
        if (request.role == role_) {
            return plotpath::gateway::ChatResponse{responder_(request), {}, 1};
        }
        return inner_->send(request);
    }

private:
    std::shared_ptr<plotpath::gateway::ChatBackend> inner_;
    plotpath::RoleTag role_;
    Responder responder_;
};

inline plotpath::gateway::RetryPolicy fast_retry()
{
    return plotpath::gateway::RetryPolicy{3, std::chrono::milliseconds(1)};
}

inline fs::path source_dir()
{
    return fs::path(PLOTPATH_SOURCE_DIR);
}

} // namespace testing
