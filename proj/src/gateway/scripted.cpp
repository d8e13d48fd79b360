#include "gateway/backends.hpp"

namespace plotpath::gateway {

void ScriptedBackend::add_rule(RoleTag role, const std::string& pattern, std::string response)
{
    add_rule(role, pattern, [text = std::move(response)](const ChatRequest&) { return text; });
}

void ScriptedBackend::add_rule(RoleTag role, const std::string& pattern, Responder responder)
{
    std::regex re;
    try {
        re = std::regex(pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
        throw Error(ErrorCode::config, "bad rule pattern '" + pattern + "': " + e.what());
    }
    std::lock_guard lock(mutex_);
    rules_.push_back(Rule{role, pattern, std::move(re), std::move(responder)});
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const nlohmann::json& j)
{
    auto backend = std::make_shared<ScriptedBackend>();
    if (!j.is_object() || !j.contains("rules") || !j.at("rules").is_array()) {
        throw Error(ErrorCode::config, "scripted rules must be an object with a \"rules\" array");
    }
    std::size_t n = 0;
    for (const auto& rule : j.at("rules")) {
        ++n;
        try {
            const auto role = parse_role_tag(rule.at("role").get<std::string>());
            backend->add_rule(role, rule.value("match", std::string{}), rule.at("response").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::config, "rule " + std::to_string(n) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(ErrorCode::config, "rule " + std::to_string(n) + ": " + e.what());
        }
    }
    return backend;
}

ChatResponse ScriptedBackend::send(const ChatRequest& request)
{
    Responder responder;
    {
        std::lock_guard lock(mutex_);
        requests_.push_back(request);
        const auto& text = request.last_user_text();
        for (const auto& rule : rules_) {
            if (rule.role != request.role) {
                continue;
            }
            if (rule.pattern.empty() || std::regex_search(text, rule.re)) {
                responder = rule.responder;
                break;
            }
        }
    }
    if (!responder) {
        throw Error(ErrorCode::no_rule,
                    "no scripted rule for role " + std::string(to_string(request.role)));
    }
    ChatResponse response;
    response.text = responder(request);
    response.usage.completion_tokens = static_cast<int>(response.text.size() / 4);
    return response;
}

std::vector<ChatRequest> ScriptedBackend::requests() const
{
    std::lock_guard lock(mutex_);
    return requests_;
}

} // namespace plotpath::gateway
