// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mrpo {

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path &path);

std::string read_file(const std::filesystem::path &path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path &path, std::string_view bytes);

/// Appends doubles as IEEE-754 little-endian bytes.
void append_le_doubles(std::string &out, std::span<const double> values);
/// Decodes `count` little-endian doubles starting at `bytes[offset]`.
std::vector<double> read_le_doubles(std::string_view bytes, std::size_t offset, std::size_t count);

} // namespace mrpo
