#pragma once

#include <string_view>

namespace synque::detail {

// Generated from prompts/<set>/<kind>.txt at configure time. Empty view when missing.
std::string_view embedded_prompt(std::string_view set, std::string_view kind);
extern const char* const kPromptSets[];
extern const std::size_t kPromptSetCount;

}  // namespace synque::detail
