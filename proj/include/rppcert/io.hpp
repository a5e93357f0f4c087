#pragma once

// File plumbing shared by every artifact writer: atomic replace, checksums,
// round-trip number formatting and the schema-version header.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rppcert::io {

inline constexpr int kSchemaMajor = 1;

/// Writes to `<path>.tmp.<pid>` and renames over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, printed as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Shortest form that round-trips (at most 17 significant digits).
std::string format_double(double v);

/// First line of CSV artifacts.
std::string csv_schema_line(std::string_view kind);

/// If `line` is a schema comment, checks the major version (ParseError on
/// an unknown major) and returns true.
bool check_csv_schema_line(std::string_view line, std::string_view kind);

std::vector<std::string_view> split_csv_line(std::string_view line);

/// Strict numeric parsing; `what` is used in the ParseError message.
double parse_double(std::string_view cell, const std::string& what);
std::uint64_t parse_u64(std::string_view cell, const std::string& what);

std::string_view trim(std::string_view s);

}  // namespace rppcert::io
