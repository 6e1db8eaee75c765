#include "storyframe/fs_util.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

#include "storyframe/error.hpp"
#include "storyframe/fault_hooks.hpp"

namespace storyframe {

namespace {

std::atomic<std::uint64_t> g_temp_counter{0};
std::atomic<std::size_t> g_throttle_chunk{0};
std::atomic<std::int64_t> g_throttle_delay_us{0};

[[noreturn]] void throw_errno(const std::string& what, const std::filesystem::path& path) {
  throw Error(Errc::IoError, what + " " + path.string() + ": " + std::strerror(errno));
}

}  // namespace

namespace fault_hooks {

void set_write_throttle(std::size_t chunk_bytes, std::chrono::microseconds delay) {
  g_throttle_chunk = chunk_bytes;
  g_throttle_delay_us = delay.count();
}

}  // namespace fault_hooks

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return std::move(buffer).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(Errc::IoError, "cannot create " + path.parent_path().string());
  }
  std::filesystem::path temp = path;
  temp += ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(g_temp_counter++);

  const int fd = ::open(temp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw_errno("open", temp);

  const std::size_t chunk = g_throttle_chunk.load();
  const auto delay = std::chrono::microseconds(g_throttle_delay_us.load());
  std::size_t written = 0;
  while (written < data.size()) {
    std::size_t want = data.size() - written;
    if (chunk > 0) want = std::min(want, chunk);
    const ssize_t n = ::write(fd, data.data() + written, want);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw_errno("write", temp);
    }
    written += static_cast<std::size_t>(n);
    if (chunk > 0 && delay.count() > 0) std::this_thread::sleep_for(delay);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    throw_errno("fsync", temp);
  }
  ::close(fd);
  if (::rename(temp.c_str(), path.c_str()) != 0) throw_errno("rename", temp);
}

std::size_t remove_stale_temp_files(const std::filesystem::path& root) {
  std::error_code ec;
  if (!std::filesystem::exists(root, ec)) return 0;
  std::vector<std::filesystem::path> stale;
  for (auto it = std::filesystem::recursive_directory_iterator(root, ec);
       it != std::filesystem::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) break;
    if (!it->is_regular_file()) continue;
    if (it->path().filename().string().find(".tmp-") != std::string::npos) stale.push_back(it->path());
  }
  std::size_t removed = 0;
  for (const auto& p : stale) removed += std::filesystem::remove(p, ec) ? 1 : 0;
  return removed;
}

}  // namespace storyframe
