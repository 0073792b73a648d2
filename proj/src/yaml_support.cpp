#include "yaml_support.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>

namespace dcomposer::yaml {

namespace {

bool looks_numeric(std::string_view s) {
  static const std::regex kNumber(
      R"(^[-+]?(\.[0-9]+|[0-9][0-9_]*(\.[0-9_]*)?)([eE][-+]?[0-9]+)?$)");
  static const std::regex kRadix(R"(^[-+]?0(x[0-9a-fA-F_]+|o[0-7_]+|b[01_]+)$)");
  static const std::regex kSpecial(R"(^[-+]?\.(inf|Inf|INF|nan|NaN|NAN)$)");
  const std::string str(s);
  return std::regex_match(str, kNumber) || std::regex_match(str, kRadix) ||
         std::regex_match(str, kSpecial);
}

bool reserved_word(std::string_view s) {
  static constexpr std::array<std::string_view, 26> kWords = {
      "y",    "Y",    "yes",  "Yes",  "YES",   "n",     "N",
      "no",   "No",   "NO",   "true", "True",  "TRUE",  "false",
      "False", "FALSE", "on",  "On",   "ON",    "off",   "Off",
      "OFF",  "null", "Null", "NULL", "~"};
  return std::find(kWords.begin(), kWords.end(), s) != kWords.end();
}

}  // namespace

bool plain_safe(std::string_view text) {
  if (text.empty()) return false;
  bool has_letter = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const auto u = static_cast<unsigned char>(c);
    has_letter = has_letter || std::isalpha(u);
    if (c == ':') {
      // "a:b" is fine; ": " and a trailing colon start a mapping.
      if (i + 1 == text.size() || text[i + 1] == ' ') return false;
      continue;
    }
    if (!(std::isalnum(u) || c == '_' || c == '.' || c == '/' || c == '-' ||
          c == '+' || c == '=' || c == '@' || c == ',')) {
      return false;
    }
  }
  // Digit-and-colon strings read as base-60 numbers under YAML 1.1.
  if (text.find(':') != std::string_view::npos && !has_letter) return false;
  const char first = text.front();
  if (first == '-' || first == '@' || first == ',') return false;
  return !reserved_word(text) && !looks_numeric(text);
}

void emit_string(YAML::Emitter& out, std::string_view text) {
  if (plain_safe(text)) {
    out << std::string(text);
  } else {
    out << YAML::DoubleQuoted << std::string(text);
  }
}

bool is_plain(const YAML::Node& node) {
  return node.IsScalar() && node.Tag() == "?";
}

void emit_node(YAML::Emitter& out, const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Undefined:
    case YAML::NodeType::Null:
      out << YAML::Null;
      break;
    case YAML::NodeType::Scalar:
      if (is_plain(node)) {
        // Plain scalars keep their resolved type (bool, int, ...) when
        // written plain again; anything needing quotes stays a string.
        const auto& s = node.Scalar();
        if (plain_safe(s) || looks_numeric(s) || reserved_word(s)) {
          out << s;
        } else {
          out << YAML::DoubleQuoted << s;
        }
      } else {
        out << YAML::DoubleQuoted << node.Scalar();
      }
      break;
    case YAML::NodeType::Sequence:
      out << YAML::BeginSeq;
      for (const auto& item : node) emit_node(out, item);
      out << YAML::EndSeq;
      break;
    case YAML::NodeType::Map:
      out << YAML::BeginMap;
      for (const auto& kv : node) {
        out << YAML::Key;
        emit_node(out, kv.first);
        out << YAML::Value;
        emit_node(out, kv.second);
      }
      out << YAML::EndMap;
      break;
  }
}

std::string canonical_text(const YAML::Node& node) {
  YAML::Emitter out;
  emit_node(out, node);
  return out.c_str();
}

YAML::Node load_text(const std::string& text) { return YAML::Load(text); }

std::optional<bool> as_bool(const YAML::Node& node) {
  if (!is_plain(node)) return std::nullopt;
  const auto& s = node.Scalar();
  if (s == "true" || s == "True" || s == "TRUE" || s == "yes" || s == "Yes" ||
      s == "YES" || s == "on" || s == "On" || s == "ON") {
    return true;
  }
  if (s == "false" || s == "False" || s == "FALSE" || s == "no" || s == "No" ||
      s == "NO" || s == "off" || s == "Off" || s == "OFF") {
    return false;
  }
  return std::nullopt;
}

std::optional<long long> as_count(const YAML::Node& node) {
  if (!node.IsScalar()) return std::nullopt;
  const auto& s = node.Scalar();
  if (s.empty() || s.size() > 12) return std::nullopt;
  if (!std::all_of(s.begin(), s.end(),
                   [](unsigned char c) { return std::isdigit(c); })) {
    return std::nullopt;
  }
  return std::stoll(s);
}

std::optional<std::string> as_text(const YAML::Node& node) {
  if (!node.IsScalar()) return std::nullopt;
  return node.Scalar();
}

std::optional<std::vector<std::string>> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  bool in_word = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (in_word) {
        words.push_back(std::move(current));
        current.clear();
        in_word = false;
      }
    } else if (c == '\'') {
      in_word = true;
      const auto end = text.find('\'', i + 1);
      if (end == std::string_view::npos) return std::nullopt;
      current.append(text.substr(i + 1, end - i - 1));
      i = end;
    } else if (c == '"') {
      in_word = true;
      ++i;
      bool closed = false;
      for (; i < text.size(); ++i) {
        if (text[i] == '"') {
          closed = true;
          break;
        }
        if (text[i] == '\\' && i + 1 < text.size() &&
            (text[i + 1] == '"' || text[i + 1] == '\\' || text[i + 1] == '$' ||
             text[i + 1] == '`')) {
          ++i;
        }
        current.push_back(text[i]);
      }
      if (!closed) return std::nullopt;
    } else if (c == '\\') {
      in_word = true;
      if (i + 1 >= text.size()) return std::nullopt;
      current.push_back(text[++i]);
    } else {
      in_word = true;
      current.push_back(c);
    }
  }
  if (in_word) words.push_back(std::move(current));
  return words;
}

}  // namespace dcomposer::yaml
