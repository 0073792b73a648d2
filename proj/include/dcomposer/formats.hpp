#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dcomposer {

// Compose duration: one or more `<decimal><unit>` terms with unit in
// us|ms|s|m|h, no whitespace, no sign ("2.5s", "1m30s"). Each term is
// converted to whole microseconds (fraction truncated) and the terms summed.
struct Duration {
  std::int64_t microseconds = 0;
  std::string text;
};

// Compose byte size: a bare integer (bytes) or an integer followed by
// b|kb|mb|gb, case-insensitive, with binary (1024) multiples.
struct ByteSize {
  std::uint64_t bytes = 0;
  std::string text;
};

// Both throw Error(Errc::InvalidFormat).
[[nodiscard]] Duration parse_duration(std::string_view text);
[[nodiscard]] ByteSize parse_byte_size(std::string_view text);

// Shortest rendering in the largest unit that divides the value exactly.
[[nodiscard]] std::string render_duration(std::int64_t microseconds);
[[nodiscard]] std::string render_byte_size(std::uint64_t bytes);

}  // namespace dcomposer
