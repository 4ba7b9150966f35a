#pragma once

#include <string>

namespace termkit {

// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& data);

// Lowercase hex SHA-256 of a file's contents. Throws IoError if unreadable.
std::string sha256_file(const std::string& path);

}  // namespace termkit
