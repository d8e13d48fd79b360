#pragma once

#include <span>
#include <string_view>

namespace plotpath::agents {

struct EmbeddedPrompt {
    std::string_view name;
    std::string_view text;
};

/// Contents of prompts/*.txt, generated at configure time.
std::span<const EmbeddedPrompt> embedded_prompts();

} // namespace plotpath::agents
