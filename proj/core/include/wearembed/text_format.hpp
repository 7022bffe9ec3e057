// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

// Locale-independent number formatting for every text file we write.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wearembed {

/// 17 significant digits; parses back to the identical double.
std::string format_exact(double value);
/// Shortest text that parses back to the identical double.
std::string format_shortest(double value);
/// Fixed notation with `decimals` places.
std::string format_fixed(double value, int decimals);

std::optional<double> parse_double(std::string_view text);
std::optional<std::uint64_t> parse_u64(std::string_view text);
std::vector<std::string_view> split_view(std::string_view text, char sep);
std::string_view trim(std::string_view text);

struct IniEntry {
  std::string section;
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// `[section]` headers, `key = value` lines, blank lines and `#` comments.
/// Throws std::invalid_argument naming the line on anything else.
std::vector<IniEntry> parse_ini(std::string_view text);

}  // namespace wearembed
