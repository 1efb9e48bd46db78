#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace dgcf {

// Writes to "<path>.tmp" and renames over path.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Throws UserError when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

}  // namespace dgcf
