#include "agents/prompts.hpp"

#include "core/bytes.hpp"
#include "core/error.hpp"
#include "prompts_embedded.hpp"

#include <algorithm>
#include <cctype>

namespace plotpath::agents {

namespace {

bool placeholder_char(char c)
{
    return std::islower(static_cast<unsigned char>(c)) != 0 || c == '_';
}

// Calls on_text for literal runs and on_name for each {name}.
template <typename OnText, typename OnName>
void scan(std::string_view text, OnText on_text, OnName on_name)
{
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto open = text.find('{', pos);
        if (open == std::string_view::npos) {
            break;
        }
        auto close = open + 1;
        while (close < text.size() && placeholder_char(text[close])) {
            ++close;
        }
        if (close < text.size() && text[close] == '}' && close > open + 1) {
            on_text(text.substr(pos, open - pos));
            on_name(text.substr(open + 1, close - open - 1));
            pos = close + 1;
        } else {
            on_text(text.substr(pos, open + 1 - pos));
            pos = open + 1;
        }
    }
    on_text(text.substr(pos));
}

std::string trim_newlines(std::string_view s)
{
    while (!s.empty() && (s.front() == '\n' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return std::string(s);
}

} // namespace

std::vector<std::string> placeholders(std::string_view text)
{
    std::vector<std::string> names;
    scan(
        text, [](std::string_view) {},
        [&](std::string_view name) {
            if (std::find(names.begin(), names.end(), name) == names.end()) {
                names.emplace_back(name);
            }
        });
    return names;
}

std::string PromptTemplate::render(const Bindings& bindings) const
{
    std::string out;
    out.reserve(user_template.size() * 2);
    scan(
        user_template, [&](std::string_view literal) { out.append(literal); },
        [&](std::string_view name) {
            const auto it = bindings.find(name);
            if (it == bindings.end()) {
                throw Error(ErrorCode::invalid_argument,
                            "prompt '" + this->name + "' has unbound placeholder {" + std::string(name) + "}");
            }
            out.append(it->second);
        });
    return out;
}

PromptTemplate PromptTemplate::parse(std::string name, std::string_view text)
{
    constexpr std::string_view kSystem = "[system]";
    constexpr std::string_view kUser = "[user]";
    const auto sys = text.find(kSystem);
    const auto user = text.find(std::string("\n") + std::string(kUser));
    if (sys == std::string_view::npos || user == std::string_view::npos || user < sys) {
        throw Error(ErrorCode::config, "prompt '" + name + "' needs a [system] section followed by a [user] section");
    }
    PromptTemplate t;
    t.name = std::move(name);
    t.system_text = trim_newlines(text.substr(sys + kSystem.size(), user - sys - kSystem.size()));
    t.user_template = trim_newlines(text.substr(user + 1 + kUser.size()));
    if (t.system_text.empty()) {
        throw Error(ErrorCode::config, "prompt '" + t.name + "' has an empty system prompt");
    }
    return t;
}

PromptSet PromptSet::builtin()
{
    PromptSet set;
    for (const auto& [name, text] : embedded_prompts()) {
        set.templates_.emplace(std::string(name), PromptTemplate::parse(std::string(name), text));
    }
    for (auto name : kNames) {
        if (!set.templates_.contains(name)) {
            throw Error(ErrorCode::config, "built-in prompt missing: " + std::string(name));
        }
    }
    return set;
}

PromptSet PromptSet::with_overrides(const std::filesystem::path& dir)
{
    auto set = builtin();
    for (auto name : kNames) {
        const auto file = dir / (std::string(name) + ".txt");
        std::error_code ec;
        if (std::filesystem::is_regular_file(file, ec)) {
            set.templates_.insert_or_assign(std::string(name),
                                            PromptTemplate::parse(std::string(name), read_text(file)));
        }
    }
    return set;
}

const PromptTemplate& PromptSet::get(std::string_view name) const
{
    const auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw Error(ErrorCode::config, "no prompt named " + std::string(name));
    }
    return it->second;
}

} // namespace plotpath::agents
