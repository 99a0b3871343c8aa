// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fudoba {

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string_view trim(std::string_view s);

/// Splits one CSV record on commas. Double-quoted fields may contain commas
/// and "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace fudoba
