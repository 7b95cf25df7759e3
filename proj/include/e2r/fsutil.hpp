#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace e2r {

// Appends and fsyncs before returning.
void append_durable(const std::filesystem::path& path, std::string_view data);

// Writes `path.tmp`, fsyncs, then renames over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view data);

std::string read_text(const std::filesystem::path& path);

// Non-empty lines, LF separated.
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace e2r
