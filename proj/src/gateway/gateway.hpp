#pragma once

#include "core/error.hpp"
#include "core/types.hpp"

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace plotpath::gateway {

enum class Speaker { system, user };

struct ChatMessage {
    Speaker speaker = Speaker::user;
    std::string text;
    std::vector<Bytes> images; // PNG
};

struct ChatRequest {
    RoleTag role = RoleTag::code;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    std::string model_id;

    // Bookkeeping for the transcript; not part of the fingerprint.
    std::optional<int> path_index;
    bool reprompt = false;

    [[nodiscard]] int attachment_count() const noexcept;
    [[nodiscard]] const std::string& last_user_text() const;
};

struct Usage {
    int prompt_tokens = 0;
    int completion_tokens = 0;

    bool operator==(const Usage&) const = default;
};

struct ChatResponse {
    std::string text;
    Usage usage;
    std::int64_t latency_ms = 0;
};

/// Rejects requests whose first message is not the system prompt, and image
/// attachments on roles other than fb and judge. Throws Error{invalid_argument}.
void validate_request(const ChatRequest& request);

/// Hex SHA-256 over role, model, temperature and every message in order,
/// attachments included byte for byte.
std::string fingerprint(const ChatRequest& request);

/// Failure reported by a provider. Only retryable ones are retried.
class ProviderError : public Error {
public:
    ProviderError(const std::string& what, bool retryable)
        : Error(ErrorCode::provider, what), retryable_(retryable) {}

    [[nodiscard]] bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse send(const ChatRequest& request) = 0;
};

/// Append-only log of exchanges. Safe to append from several threads.
class Transcript {
public:
    void append(TranscriptEntry entry);
    [[nodiscard]] std::vector<TranscriptEntry> entries() const;
    [[nodiscard]] std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::vector<TranscriptEntry> entries_;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{500};
};

class Gateway {
public:
    explicit Gateway(std::shared_ptr<ChatBackend> backend, RetryPolicy retry = {});

    /// One exchange. Retryable provider errors are retried with exponential
    /// backoff up to the policy bound; everything else propagates at once.
    /// The exchange is appended to `log` whether it succeeds or not.
    ChatResponse complete(const ChatRequest& request, Transcript* log = nullptr);

    [[nodiscard]] const RetryPolicy& retry_policy() const noexcept { return retry_; }

private:
    std::shared_ptr<ChatBackend> backend_;
    RetryPolicy retry_;
};

std::string exchange_id(const ChatRequest& request, const std::string& fingerprint);

} // namespace plotpath::gateway
