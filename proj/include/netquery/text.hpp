// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace netquery::text {

std::string_view trim(std::string_view s);
std::string_view trim_right(std::string_view s);
std::string to_lower_ascii(std::string_view s);
bool is_blank(std::string_view s);

/// Splits on '\n', dropping a trailing '\r' from each line. A final newline
/// does not produce an empty last line.
std::vector<std::string_view> split_lines(std::string_view s);

std::size_t utf8_length(std::string_view s);
/// First `n` code points (whole input when shorter).
std::string_view utf8_prefix(std::string_view s, std::size_t n);
/// Last `n` code points (whole input when shorter).
std::string_view utf8_suffix(std::string_view s, std::size_t n);

/// Single-pass `{{NAME}}` substitution; substituted values are never rescanned.
/// Unknown placeholders are left as-is.
std::string substitute(std::string_view tmpl, const std::map<std::string, std::string>& values);
bool contains_placeholder(std::string_view tmpl, std::string_view name);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// UTC timestamp, ISO-8601 with a trailing 'Z' (second precision).
std::string utc_timestamp();

} // namespace netquery::text

namespace netquery::hashing {

std::uint64_t fnv1a64(std::string_view bytes);
std::string sha256_hex(std::string_view bytes);

} // namespace netquery::hashing
