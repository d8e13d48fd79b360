#pragma once

#include "gateway/gateway.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <mutex>
#include <regex>
#include <unordered_map>

namespace plotpath::gateway {

/// Offline backend answering from registered rules. A rule matches on role tag
/// plus a regular expression searched in the last user message; the first
/// matching rule in registration order wins.
class ScriptedBackend : public ChatBackend {
public:
    using Responder = std::function<std::string(const ChatRequest&)>;

    void add_rule(RoleTag role, const std::string& pattern, std::string response);
    void add_rule(RoleTag role, const std::string& pattern, Responder responder);

    /// {"rules": [{"role": "code", "match": "regex", "response": "text"}]}
    /// "match" may be omitted to match everything for that role.
    static std::shared_ptr<ScriptedBackend> from_json(const nlohmann::json& j);

    ChatResponse send(const ChatRequest& request) override;

    /// Every request received so far, in arrival order.
    [[nodiscard]] std::vector<ChatRequest> requests() const;

private:
    struct Rule {
        RoleTag role;
        std::string pattern;
        std::regex re;
        Responder responder;
    };

    mutable std::mutex mutex_;
    std::vector<Rule> rules_;
    std::vector<ChatRequest> requests_;
};

struct CassetteEntry {
    std::string fingerprint;
    RoleTag role = RoleTag::code;
    std::string response_text;
    Usage usage;
};

/// JSON-lines file of recorded exchanges, one entry per line.
class Cassette {
public:
    Cassette() = default;

    /// Throws Error{storage_unavailable} if missing, Error{corrupt_record}
    /// with the line number on malformed content.
    static Cassette load(const std::filesystem::path& path);

    [[nodiscard]] const CassetteEntry* find(const std::string& fingerprint) const;
    [[nodiscard]] const std::vector<CassetteEntry>& entries() const noexcept { return entries_; }

    /// Adds the entry unless its fingerprint is already present. Returns
    /// whether it was added.
    bool add(CassetteEntry entry);

    static std::string to_line(const CassetteEntry& entry);

private:
    std::vector<CassetteEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Forwards to an inner backend and appends every new exchange to a cassette
/// file. An existing file is extended, never truncated.
class RecordingBackend : public ChatBackend {
public:
    RecordingBackend(std::shared_ptr<ChatBackend> inner, std::filesystem::path path);

    ChatResponse send(const ChatRequest& request) override;

private:
    std::shared_ptr<ChatBackend> inner_;
    std::filesystem::path path_;
    std::mutex mutex_;
    Cassette cassette_;
};

/// Answers strictly from a cassette; unknown fingerprints raise
/// Error{cassette_miss}.
class ReplayBackend : public ChatBackend {
public:
    explicit ReplayBackend(Cassette cassette) : cassette_(std::move(cassette)) {}
    explicit ReplayBackend(const std::filesystem::path& path) : cassette_(Cassette::load(path)) {}

    ChatResponse send(const ChatRequest& request) override;

private:
    Cassette cassette_;
};

struct LiveOptions {
    // scheme://host[:port][/prefix]; the chat endpoint is <prefix>/v1/chat/completions
    std::string base_url = "https://api.openai.com";
    std::string api_key;
    std::chrono::seconds timeout{120};
    int max_tokens = 4096;
};

/// Reads PLOTPATH_BASE_URL and PLOTPATH_API_KEY (falling back to
/// OPENAI_API_KEY).
LiveOptions live_options_from_env();

/// OpenAI-compatible chat-completions client. Images travel as base64 data
/// URLs. 429 and 5xx are retryable; other HTTP errors are not.
class OpenAiBackend : public ChatBackend {
public:
    explicit OpenAiBackend(LiveOptions options);

    ChatResponse send(const ChatRequest& request) override;

    /// The JSON body sent for `request`; exposed for tests.
    [[nodiscard]] nlohmann::json payload(const ChatRequest& request) const;

private:
    LiveOptions options_;
    std::string origin_;
    std::string prefix_;
};

} // namespace plotpath::gateway
