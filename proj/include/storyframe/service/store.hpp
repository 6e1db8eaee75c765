#pragma once

// Filesystem persistence for the service. Layout under root:
//   plans/<id>.json            scene plans
//   sheets/<id>.png, .json     composed sheets and their sidecars
//   frames/<id>/<k>.png        split frames, k from 1
//   reports/<id>.json, .csv, .md
//   jobs/<id>.json
//   surveys/<id>.json, <id>.responses.jsonl
//   blobs/<sha256>             immutable content-addressed bytes
// Every write goes through a temp file and rename.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace storyframe::service {

class Store {
 public:
  // Creates the directory layout and removes temp files left by a crash.
  explicit Store(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  // Ids must match [A-Za-z0-9_-]+; anything else throws InvalidArgument.
  static void check_id(const std::string& id);

  void put_json(const std::string& collection, const std::string& id, const nlohmann::json& value);
  std::optional<nlohmann::json> get_json(const std::string& collection, const std::string& id) const;
  bool has_json(const std::string& collection, const std::string& id) const;
  // Ids in a collection, sorted.
  std::vector<std::string> list(const std::string& collection) const;

  // Paths relative to root; written atomically.
  void put_file(const std::filesystem::path& relative, std::string_view data);
  std::optional<std::string> get_file(const std::filesystem::path& relative) const;
  std::filesystem::path path_of(const std::filesystem::path& relative) const { return root_ / relative; }

  // Returns the SHA-256 hex digest. Existing blobs are never rewritten.
  std::string put_blob(std::span<const std::uint8_t> data);
  std::string put_blob(std::string_view data);
  std::optional<std::string> get_blob(const std::string& sha256) const;

  // Serializes read-modify-write sequences on one entity.
  std::unique_lock<std::mutex> lock_entity(const std::string& id);

 private:
  std::filesystem::path root_;
  std::mutex locks_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

}  // namespace storyframe::service
