#include "gateway/gateway.hpp"

#include "core/bytes.hpp"

#include <cstdio>
#include <thread>

namespace plotpath::gateway {

int ChatRequest::attachment_count() const noexcept
{
    int n = 0;
    for (const auto& m : messages) {
        n += static_cast<int>(m.images.size());
    }
    return n;
}

const std::string& ChatRequest::last_user_text() const
{
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->speaker == Speaker::user) {
            return it->text;
        }
    }
    static const std::string empty;
    return empty;
}

void validate_request(const ChatRequest& request)
{
    if (request.messages.empty() || request.messages.front().speaker != Speaker::system) {
        throw Error(ErrorCode::invalid_argument, "first message must be the system prompt");
    }
    if (request.role != RoleTag::fb && request.role != RoleTag::judge && request.attachment_count() > 0) {
        throw Error(ErrorCode::invalid_argument,
                    "image attachments are not allowed for role " + std::string(to_string(request.role)));
    }
}

namespace {

void put_field(std::string& buf, std::string_view tag, std::string_view value)
{
    buf.append(tag);
    buf.push_back(':');
    buf.append(std::to_string(value.size()));
    buf.push_back(':');
    buf.append(value);
}

} // namespace

std::string fingerprint(const ChatRequest& request)
{
    std::string buf;
    put_field(buf, "role", to_string(request.role));
    put_field(buf, "model", request.model_id);
    char temp[32];
    std::snprintf(temp, sizeof temp, "%.6f", request.temperature);
    put_field(buf, "temperature", temp);
    for (const auto& m : request.messages) {
        put_field(buf, "speaker", m.speaker == Speaker::system ? "system" : "user");
        put_field(buf, "text", m.text);
        for (const auto& image : m.images) {
            put_field(buf, "image", std::string_view(reinterpret_cast<const char*>(image.data()), image.size()));
        }
    }
    return sha256_hex(buf);
}

std::string exchange_id(const ChatRequest& request, const std::string& fp)
{
    std::string id(to_string(request.role));
    if (request.path_index) {
        id += "." + std::to_string(*request.path_index);
    }
    id += "-" + fp.substr(0, 16);
    if (request.reprompt) {
        id += "-reprompt";
    }
    return id;
}

void Transcript::append(TranscriptEntry entry)
{
    std::lock_guard lock(mutex_);
    entries_.push_back(std::move(entry));
}

std::vector<TranscriptEntry> Transcript::entries() const
{
    std::lock_guard lock(mutex_);
    return entries_;
}

std::size_t Transcript::size() const
{
    std::lock_guard lock(mutex_);
    return entries_.size();
}

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, RetryPolicy retry)
    : backend_(std::move(backend)), retry_(retry)
{
    if (!backend_) {
        throw Error(ErrorCode::config, "gateway needs a backend");
    }
    if (retry_.max_attempts < 1) {
        retry_.max_attempts = 1;
    }
}

ChatResponse Gateway::complete(const ChatRequest& request, Transcript* log)
{
    validate_request(request);
    const auto fp = fingerprint(request);
    TranscriptEntry entry;
    entry.id = exchange_id(request, fp);
    entry.role = request.role;
    entry.path_index = request.path_index;
    entry.attachments = request.attachment_count();
    entry.reprompt = request.reprompt;
    entry.attempts = 0;

    auto delay = retry_.base_delay;
    while (true) {
        ++entry.attempts;
        try {
            const auto t0 = std::chrono::steady_clock::now();
            auto response = backend_->send(request);
            if (response.latency_ms == 0) {
                response.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                          std::chrono::steady_clock::now() - t0)
                                          .count();
            }
            if (response.text.empty()) {
                throw ProviderError("provider returned an empty completion", true);
            }
            entry.ok = true;
            if (log) {
                log->append(entry);
            }
            return response;
        } catch (const ProviderError& e) {
            if (!e.retryable() || entry.attempts >= retry_.max_attempts) {
                entry.ok = false;
                if (log) {
                    log->append(entry);
                }
                throw;
            }
        } catch (const Error&) {
            entry.ok = false;
            if (log) {
                log->append(entry);
            }
            throw;
        }
        std::this_thread::sleep_for(delay);
        delay *= 2;
    }
}

} // namespace plotpath::gateway
