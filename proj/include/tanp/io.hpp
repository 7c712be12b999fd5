#pragma once

#include <filesystem>
#include <string>

namespace tanp {

/// Write `content` to a sibling temporary file, then rename it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace tanp
