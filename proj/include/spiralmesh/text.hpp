#pragma once

// Small helpers shared by the text file formats.

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace spiralmesh::text {

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view token) {
  T value{};
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) return std::nullopt;
  return value;
}

inline std::optional<std::uint64_t> parse_hex(std::string_view token) {
  std::uint64_t value{};
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value, 16);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty())
    return std::nullopt;
  return value;
}

/// Shortest decimal that parses back to exactly the same double.
inline std::string format_double(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

inline std::string format_hex(std::uint64_t value) {
  char buffer[17];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value, 16);
  std::string s(buffer, ptr);
  return std::string(16 - s.size(), '0') + s;
}

}  // namespace spiralmesh::text
