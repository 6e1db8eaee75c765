#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace storyframe {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, fsyncs, then renames over the target, so a
// reader never observes a partially written file. Parent dirs are created.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

// Removes leftover "*.tmp-*" files from interrupted atomic writes.
std::size_t remove_stale_temp_files(const std::filesystem::path& root);

}  // namespace storyframe
