#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>

namespace cbma {

/// Writes through a temporary sibling file and renames it into place, so
/// readers never observe a partially written artifact.
void write_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer);
void write_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Shortest text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace cbma
