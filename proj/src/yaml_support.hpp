#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <yaml-cpp/yaml.h>

// Canonical YAML emission helpers. yaml-cpp's own Dump drops the quoting of
// scalars ('no' comes back as the boolean-looking `no`), so opaque values are
// re-emitted through emit_node, which quotes every scalar that was not plain
// on input.
namespace dcomposer::yaml {

// True when `text` would read back as the same string if written plain.
[[nodiscard]] bool plain_safe(std::string_view text);

void emit_string(YAML::Emitter& out, std::string_view text);
void emit_node(YAML::Emitter& out, const YAML::Node& node);

[[nodiscard]] std::string canonical_text(const YAML::Node& node);
[[nodiscard]] YAML::Node load_text(const std::string& text);

[[nodiscard]] bool is_plain(const YAML::Node& node);
[[nodiscard]] std::optional<bool> as_bool(const YAML::Node& node);
// Non-negative decimal integer scalar.
[[nodiscard]] std::optional<long long> as_count(const YAML::Node& node);
[[nodiscard]] std::optional<std::string> as_text(const YAML::Node& node);

// POSIX-shell-style word splitting (quotes and backslashes, no expansion).
// Returns nullopt on unbalanced quotes.
[[nodiscard]] std::optional<std::vector<std::string>> split_words(
    std::string_view text);

}  // namespace dcomposer::yaml
