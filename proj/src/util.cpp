#include "refvid/util.hpp"

#include <bit>
#include <fstream>

#include "refvid/error.hpp"

namespace refvid {

uint64_t fnv1a64(const void* data, size_t len, uint64_t h) {
    const auto* p = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

uint64_t fnv1a64_file(const std::filesystem::path& p) {
    auto bytes = read_file_bytes(p);
    return fnv1a64(bytes.data(), bytes.size());
}

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot open " + p.string());
    f.seekg(0, std::ios::end);
    const auto size = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> out(static_cast<size_t>(size));
    if (size > 0) f.read(reinterpret_cast<char*>(out.data()), size);
    if (!f) throw IoError("failed reading " + p.string());
    return out;
}

void write_file_bytes(const std::filesystem::path& p, const void* data, size_t len) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + p.string() + " for writing");
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    if (!f) throw IoError("failed writing " + p.string());
}

std::string read_file_text(const std::filesystem::path& p) {
    auto bytes = read_file_bytes(p);
    return std::string(bytes.begin(), bytes.end());
}

void write_file_text(const std::filesystem::path& p, const std::string& text) {
    write_file_bytes(p, text.data(), text.size());
}

void require_little_endian() {
    if constexpr (std::endian::native != std::endian::little)
        throw StateError("this build only supports little-endian hosts");
}

} // namespace refvid
