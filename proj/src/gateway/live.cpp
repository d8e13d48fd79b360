#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "core/bytes.hpp"
#include "gateway/backends.hpp"

#include <cstdlib>

namespace plotpath::gateway {

using nlohmann::json;

LiveOptions live_options_from_env()
{
    LiveOptions options;
    if (const char* url = std::getenv("PLOTPATH_BASE_URL"); url && *url) {
        options.base_url = url;
    }
    if (const char* key = std::getenv("PLOTPATH_API_KEY"); key && *key) {
        options.api_key = key;
    } else if (const char* fallback = std::getenv("OPENAI_API_KEY"); fallback && *fallback) {
        options.api_key = fallback;
    }
    return options;
}

OpenAiBackend::OpenAiBackend(LiveOptions options) : options_(std::move(options))
{
    const auto scheme_end = options_.base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::config, "base url needs a scheme: " + options_.base_url);
    }
    const auto path_start = options_.base_url.find('/', scheme_end + 3);
    origin_ = options_.base_url.substr(0, path_start);
    prefix_ = path_start == std::string::npos ? std::string{} : options_.base_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') {
        prefix_.pop_back();
    }
}

json OpenAiBackend::payload(const ChatRequest& request) const
{
    json messages = json::array();
    for (const auto& m : request.messages) {
        const char* role = m.speaker == Speaker::system ? "system" : "user";
        if (m.images.empty()) {
            messages.push_back({{"role", role}, {"content", m.text}});
            continue;
        }
        json parts = json::array();
        parts.push_back({{"type", "text"}, {"text", m.text}});
        for (const auto& image : m.images) {
            parts.push_back({{"type", "image_url"},
                             {"image_url", {{"url", "data:image/png;base64," + base64_encode(image)}}}});
        }
        messages.push_back({{"role", role}, {"content", parts}});
    }
    return {{"model", request.model_id},
            {"temperature", request.temperature},
            {"max_tokens", options_.max_tokens},
            {"messages", messages}};
}

ChatResponse OpenAiBackend::send(const ChatRequest& request)
{
    httplib::Client client(origin_);
    client.set_connection_timeout(std::chrono::seconds(15));
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    httplib::Headers headers;
    if (!options_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + options_.api_key);
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto body = payload(request).dump(-1, ' ', false, json::error_handler_t::replace);
    const auto result = client.Post(prefix_ + "/v1/chat/completions", headers, body, "application/json");
    if (!result) {
        throw ProviderError("transport failure: " + httplib::to_string(result.error()), true);
    }
    if (result->status == 429 || result->status >= 500) {
        throw ProviderError("HTTP " + std::to_string(result->status), true);
    }
    if (result->status != 200) {
        throw ProviderError("HTTP " + std::to_string(result->status) + ": " + result->body.substr(0, 500), false);
    }
    ChatResponse response;
    try {
        const auto reply = json::parse(result->body);
        const auto& content = reply.at("choices").at(0).at("message").at("content");
        response.text = content.is_string() ? content.get<std::string>() : std::string{};
        if (reply.contains("usage")) {
            response.usage.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
            response.usage.completion_tokens = reply["usage"].value("completion_tokens", 0);
        }
    } catch (const json::exception& e) {
        throw ProviderError(std::string("malformed provider response: ") + e.what(), false);
    }
    response.latency_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    return response;
}

} // namespace plotpath::gateway
