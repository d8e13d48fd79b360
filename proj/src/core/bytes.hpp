#pragma once

#include "core/types.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace plotpath {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> data);

// Both throw Error{storage_unavailable}.
Bytes read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

/// Maps an opaque identifier onto a file name: [A-Za-z0-9._-] pass through,
/// everything else is %XX-escaped. Leading dots are escaped too.
std::string safe_file_name(std::string_view id);

/// Minimal RGB8 PNG encoder (zlib-compressed, no filtering).
Bytes encode_png(int width, int height, std::span<const std::uint8_t> rgb);
bool looks_like_png(std::span<const std::uint8_t> data) noexcept;

} // namespace plotpath
