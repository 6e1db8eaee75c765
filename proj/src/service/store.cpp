#include "storyframe/service/store.hpp"

#include <algorithm>
#include <cctype>

#include "storyframe/encoding.hpp"
#include "storyframe/error.hpp"
#include "storyframe/fs_util.hpp"

namespace storyframe::service {

namespace fs = std::filesystem;

namespace {

const char* const kCollections[] = {"plans", "sheets", "frames", "reports", "jobs", "surveys", "blobs"};

}  // namespace

Store::Store(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  for (const char* c : kCollections) {
    fs::create_directories(root_ / c, ec);
    if (ec) throw Error(Errc::IoError, "cannot create " + (root_ / c).string() + ": " + ec.message());
  }
  remove_stale_temp_files(root_);
}

void Store::check_id(const std::string& id) {
  const bool ok = !id.empty() && id.size() <= 128 && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
  if (!ok) throw Error(Errc::InvalidArgument, "invalid id '" + id + "'");
}

void Store::put_json(const std::string& collection, const std::string& id, const nlohmann::json& value) {
  check_id(id);
  write_file_atomic(root_ / collection / (id + ".json"), value.dump(2) + "\n");
}

std::optional<nlohmann::json> Store::get_json(const std::string& collection, const std::string& id) const {
  check_id(id);
  const auto text = get_file(fs::path(collection) / (id + ".json"));
  if (!text) return std::nullopt;
  try {
    return nlohmann::json::parse(*text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::DecodeError, collection + "/" + id + ".json: " + e.what());
  }
}

bool Store::has_json(const std::string& collection, const std::string& id) const {
  check_id(id);
  return fs::exists(root_ / collection / (id + ".json"));
}

std::vector<std::string> Store::list(const std::string& collection) const {
  std::vector<std::string> ids;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(root_ / collection, ec)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name.size() > 5 && name.ends_with(".json")) ids.push_back(name.substr(0, name.size() - 5));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

void Store::put_file(const fs::path& relative, std::string_view data) { write_file_atomic(root_ / relative, data); }

std::optional<std::string> Store::get_file(const fs::path& relative) const {
  const fs::path p = root_ / relative;
  if (!fs::is_regular_file(p)) return std::nullopt;
  return read_file(p);
}

std::string Store::put_blob(std::span<const std::uint8_t> data) {
  return put_blob(std::string_view(reinterpret_cast<const char*>(data.data()), data.size()));
}

std::string Store::put_blob(std::string_view data) {
  const std::string hash = sha256_hex(data);
  const fs::path p = root_ / "blobs" / hash;
  if (!fs::exists(p)) write_file_atomic(p, data);
  return hash;
}

std::optional<std::string> Store::get_blob(const std::string& sha256) const {
  const bool hex = sha256.size() == 64 && std::all_of(sha256.begin(), sha256.end(), [](char c) {
                     return std::isdigit(static_cast<unsigned char>(c)) || (c >= 'a' && c <= 'f');
                   });
  if (!hex) return std::nullopt;
  return get_file(fs::path("blobs") / sha256);
}

std::unique_lock<std::mutex> Store::lock_entity(const std::string& id) {
  std::mutex* m = nullptr;
  {
    std::lock_guard guard(locks_mutex_);
    auto& slot = locks_[id];
    if (!slot) slot = std::make_unique<std::mutex>();
    m = slot.get();
  }
  return std::unique_lock(*m);
}

}  // namespace storyframe::service
