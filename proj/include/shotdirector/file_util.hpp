#pragma once

#include <filesystem>
#include <string>

namespace shotdirector {

/// Reads a whole file. Throws IoError when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temporary file and renames it into place, so a
/// failed write never leaves a truncated output behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace shotdirector
