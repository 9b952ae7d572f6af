#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace refvid {

uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL);
uint64_t fnv1a64(const std::string& s);
uint64_t fnv1a64_file(const std::filesystem::path& p);

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& p);
void write_file_bytes(const std::filesystem::path& p, const void* data, size_t len);
std::string read_file_text(const std::filesystem::path& p);
void write_file_text(const std::filesystem::path& p, const std::string& text);

/// Serialized floats are little-endian; refuse to run elsewhere.
void require_little_endian();

} // namespace refvid
