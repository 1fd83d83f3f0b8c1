#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace ecgdx {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

// Shortest round-trip decimal form.
std::string format_double(double value);

}  // namespace ecgdx
