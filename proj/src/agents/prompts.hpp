#pragma once

#include "core/types.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace plotpath::agents {

using Bindings = std::map<std::string, std::string, std::less<>>;

/// One role's system prompt plus a user-message template with {name}
/// placeholders.
struct PromptTemplate {
    std::string name;
    std::string system_text;
    std::string user_template;

    /// Substitutes every {name} in the user template. Values are inserted
    /// verbatim and not rescanned. Throws Error{invalid_argument} naming the
    /// first unbound placeholder.
    [[nodiscard]] std::string render(const Bindings& bindings) const;

    /// Parses the on-disk form: a "[system]" section followed by a "[user]"
    /// section. Throws Error{config}.
    static PromptTemplate parse(std::string name, std::string_view text);
};

/// Placeholder names used in `text`, in order of first appearance.
std::vector<std::string> placeholders(std::string_view text);

/// The fixed set of prompt files, keyed by file stem (mpa, code, fb, ...).
class PromptSet {
public:
    static constexpr std::array<std::string_view, 9> kNames{
        "mpa", "code", "fb", "fb_binary", "syn", "syn_nofb", "zero_shot", "cot", "judge"};

    /// Prompts compiled into the library.
    static PromptSet builtin();

    /// Built-in prompts with every `<name>.txt` found in `dir` overriding its
    /// counterpart.
    static PromptSet with_overrides(const std::filesystem::path& dir);

    [[nodiscard]] const PromptTemplate& get(std::string_view name) const;

private:
    std::map<std::string, PromptTemplate, std::less<>> templates_;
};

} // namespace plotpath::agents
