#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace storyframe {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);

struct Message {
  Role role = Role::User;
  std::string content;
  // Image references (store paths or blob ids) attached in order.
  std::vector<std::string> attachments;

  friend bool operator==(const Message&, const Message&) = default;
};

using MessageList = std::vector<Message>;

// Seam to a chat-completion model. Implementations throw Error(BackendError)
// on transport or service failure.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const MessageList& messages) = 0;
  // Number of calls the backend tolerates in flight at once.
  virtual int max_concurrency() const { return 1; }
};

void to_json(nlohmann::json& j, const Message& m);

}  // namespace storyframe
