#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace dimabsa {

// Copy of `s` without leading and trailing ASCII whitespace.
std::string trim_copy(std::string_view s);

// ASCII uppercase copy; bytes outside [a-z] are left untouched.
std::string upper_copy(std::string_view s);

// Formats `v` with exactly two decimal places using the current C runtime's
// correctly-rounded conversion (round-half-to-even on ties). This is the
// single place numeric output precision is decided.
std::string format_fixed2(double v);

// Value of format_fixed2(v) parsed back to double, so that formatting and
// numeric rounding can never disagree.
double round2(double v);

// Strict decimal parse: the whole trimmed string must be consumed and the
// result must be finite. Returns nullopt otherwise.
std::optional<double> parse_decimal(std::string_view s);

// Replaces ill-formed UTF-8 byte sequences with U+FFFD so that downstream
// text handling never sees invalid encoding.
std::string utf8_sanitize(std::string_view s);

// Whole-file read; throws DataError if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over the target, so readers
// never observe a partially written file. Creates parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace dimabsa
