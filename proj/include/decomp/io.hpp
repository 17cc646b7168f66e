#pragma once

#include <string>

namespace decomp {

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never see a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace decomp
