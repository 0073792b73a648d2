#include "dcomposer/formats.hpp"

#include <cctype>
#include <limits>

#include "dcomposer/error.hpp"

namespace dcomposer {

namespace {

constexpr std::int64_t kMicros[] = {1, 1'000, 1'000'000, 60'000'000,
                                    3'600'000'000};

[[noreturn]] void bad_duration(std::string_view text, const char* why) {
  throw Error(Errc::InvalidFormat,
              "invalid duration '" + std::string(text) + "': " + why);
}

[[noreturn]] void bad_size(std::string_view text, const char* why) {
  throw Error(Errc::InvalidFormat,
              "invalid byte size '" + std::string(text) + "': " + why);
}

bool digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

Duration parse_duration(std::string_view text) {
  if (text.empty()) bad_duration(text, "empty");
  using Wide = unsigned __int128;
  constexpr Wide kMax = std::numeric_limits<std::int64_t>::max();
  Wide total = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!digit(text[i])) bad_duration(text, "expected a number");
    Wide whole = 0;
    while (i < text.size() && digit(text[i])) {
      whole = whole * 10 + static_cast<unsigned>(text[i] - '0');
      if (whole > kMax) bad_duration(text, "out of range");
      ++i;
    }
    Wide frac = 0;
    Wide scale = 1;
    if (i < text.size() && text[i] == '.') {
      ++i;
      if (i >= text.size() || !digit(text[i])) {
        bad_duration(text, "expected digits after '.'");
      }
      while (i < text.size() && digit(text[i])) {
        // Digits past 1e-18 cannot change a microsecond count.
        if (scale < static_cast<Wide>(1'000'000'000'000'000'000ULL)) {
          frac = frac * 10 + static_cast<unsigned>(text[i] - '0');
          scale *= 10;
        }
        ++i;
      }
    }
    std::int64_t unit = 0;
    const auto rest = text.substr(i);
    if (rest.starts_with("us")) {
      unit = kMicros[0];
      i += 2;
    } else if (rest.starts_with("ms")) {
      unit = kMicros[1];
      i += 2;
    } else if (rest.starts_with("s")) {
      unit = kMicros[2];
      i += 1;
    } else if (rest.starts_with("m")) {
      unit = kMicros[3];
      i += 1;
    } else if (rest.starts_with("h")) {
      unit = kMicros[4];
      i += 1;
    } else {
      bad_duration(text, rest.empty() ? "missing unit" : "unknown unit");
    }
    total += whole * static_cast<Wide>(unit) + frac * static_cast<Wide>(unit) / scale;
    if (total > kMax) bad_duration(text, "out of range");
  }
  return Duration{static_cast<std::int64_t>(total), std::string(text)};
}

ByteSize parse_byte_size(std::string_view text) {
  if (text.empty()) bad_size(text, "empty");
  std::size_t i = 0;
  std::uint64_t value = 0;
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  while (i < text.size() && digit(text[i])) {
    const auto d = static_cast<std::uint64_t>(text[i] - '0');
    if (value > (kMax - d) / 10) bad_size(text, "out of range");
    value = value * 10 + d;
    ++i;
  }
  if (i == 0) bad_size(text, "expected an integer");
  std::string unit;
  for (; i < text.size(); ++i) {
    unit.push_back(static_cast<char>(
        std::tolower(static_cast<unsigned char>(text[i]))));
  }
  std::uint64_t multiplier = 1;
  if (unit.empty() || unit == "b") {
    multiplier = 1;
  } else if (unit == "kb") {
    multiplier = 1ULL << 10;
  } else if (unit == "mb") {
    multiplier = 1ULL << 20;
  } else if (unit == "gb") {
    multiplier = 1ULL << 30;
  } else {
    bad_size(text, "unknown unit");
  }
  if (value > kMax / multiplier) bad_size(text, "out of range");
  return ByteSize{value * multiplier, std::string(text)};
}

std::string render_duration(std::int64_t microseconds) {
  if (microseconds < 0) {
    throw Error(Errc::InvalidFormat, "durations cannot be negative");
  }
  static constexpr const char* kUnits[] = {"us", "ms", "s", "m", "h"};
  for (int u = 4; u >= 0; --u) {
    if (microseconds % kMicros[u] == 0) {
      return std::to_string(microseconds / kMicros[u]) + kUnits[u];
    }
  }
  return std::to_string(microseconds) + "us";
}

std::string render_byte_size(std::uint64_t bytes) {
  static constexpr const char* kUnits[] = {"b", "kb", "mb", "gb"};
  for (int u = 3; u >= 1; --u) {
    const std::uint64_t m = 1ULL << (10 * u);
    if (bytes != 0 && bytes % m == 0) return std::to_string(bytes / m) + kUnits[u];
  }
  return std::to_string(bytes) + "b";
}

}  // namespace dcomposer
