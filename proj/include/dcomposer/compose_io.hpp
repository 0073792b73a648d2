#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dcomposer/model.hpp"

namespace dcomposer {

enum class NoticeSeverity { Info, Warn };
enum class NoticeCode { UnsupportedKey, DanglingReference, DuplicateYamlKey };

[[nodiscard]] std::string_view to_string(NoticeSeverity s) noexcept;
[[nodiscard]] std::string_view to_string(NoticeCode c) noexcept;

// A parse-time (or serialization-time) finding. `path` is a dotted YAML path
// ("services.web.depends_on[0]"); line/column are 1-based and 0 when the
// notice has no source position (serialization notices).
struct ParseNotice {
  NoticeSeverity severity = NoticeSeverity::Info;
  NoticeCode code = NoticeCode::UnsupportedKey;
  std::string path;
  int line = 0;
  int column = 0;
  std::string message;
};

struct ParseResult {
  Stack stack;
  std::vector<ParseNotice> notices;
};

// Throws Error(YamlSyntaxError) or Error(NotAMapping).
[[nodiscard]] ParseResult parse_compose(std::string_view yaml_text,
                                        std::string stack_name = {});

struct SerializeOptions {
  bool omit_defaults = true;
};

struct SerializeResult {
  std::string yaml;
  std::vector<ParseNotice> notices;
};

[[nodiscard]] SerializeResult serialize_compose(const Stack& stack,
                                                SerializeOptions options = {});

// The key each artifact is written under. Duplicate keys within a class get
// "-2", "-3", ... suffixes (first free one) in insertion order.
[[nodiscard]] std::map<ArtifactId, std::string> emitted_keys(
    const Stack& stack);

// Id-free canonical description used for model equality: the artifact
// multiset (class, key, properties, sidecar) and the edge multiset.
[[nodiscard]] std::string canonical_form(const Stack& stack);
[[nodiscard]] bool model_equal(const Stack& a, const Stack& b);

}  // namespace dcomposer
