#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace p5 {

std::string read_file(const std::filesystem::path& path);
// Writes to a temporary sibling and renames it over `path`, so readers never see
// a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace p5
