#pragma once

#include <string>
#include <string_view>

namespace vulaste {

// Lower-case hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);
// Throws Error(kParse) on malformed input.
std::string base64_decode(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace vulaste
