#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gnnseg {

// SHA-256 of a byte buffer, lowercase hex.
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& bytes);

std::string read_file_bytes(const std::string& path);

// Write to a temporary file in the same directory, then rename into place.
void write_file_atomic(const std::string& path, const void* data, std::size_t len);
void write_file_atomic(const std::string& path, const std::string& bytes);

std::string sha256_file(const std::string& path);

// e.g. "2026-08-10T12:34:56Z"
std::string iso8601_utc_now();

}  // namespace gnnseg
