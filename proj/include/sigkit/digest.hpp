#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace sigkit {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
/// Throws std::runtime_error when the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace sigkit
