#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "storyframe/chat.hpp"
#include "storyframe/scene_script.hpp"

namespace storyframe {

enum class PromptStrategy { Generic, InstructionOnly, InstructionWithExemplars };

std::string_view to_string(PromptStrategy strategy);
// Accepts "g"/"generic", "i"/"instruction", "ie"/"instruction+exemplars".
PromptStrategy parse_strategy(std::string_view text);

struct Exemplar {
  std::string scene_description;
  std::string script_text;  // must parse
};

// Throws Error(InvalidExemplar) if the script text does not parse.
Exemplar make_exemplar(std::string scene_description, std::string script_text);

// Exemplars shipped with the library; also the JSON file format for
// user-supplied ones: [{"scene_description": ..., "script_text": ...}].
std::vector<Exemplar> default_exemplars();
std::vector<Exemplar> exemplars_from_json(std::string_view json_text);

MessageList build_planning_prompt(const std::string& scene_description, PromptStrategy strategy,
                                  const std::vector<Exemplar>& exemplars);

std::string repair_message(const std::string& problems);

struct PlanningOptions {
  int max_repairs = 2;
  ValidationOptions validation{};
};

struct PlanningOutcome {
  ScenePlan plan;
  std::string raw_reply;
  int repair_attempts = 0;
  PromptStrategy strategy = PromptStrategy::InstructionWithExemplars;
};

class PlanningFailed : public Error {
 public:
  PlanningFailed(std::vector<std::string> problems, std::string raw_reply, int calls);
  const std::vector<std::string>& problems() const noexcept { return problems_; }
  const std::string& raw_reply() const noexcept { return raw_reply_; }
  int calls() const noexcept { return calls_; }

 private:
  std::vector<std::string> problems_;
  std::string raw_reply_;
  int calls_;
};

// Takes the script out of a reply: the body of the first ``` fence if the
// reply has one, the whole reply otherwise.
std::string extract_script_text(const std::string& reply);

PlanningOutcome plan_scene(const std::string& scene_description, PromptStrategy strategy,
                           const std::vector<Exemplar>& exemplars, ChatBackend& backend,
                           const PlanningOptions& options = {});

// Offline stand-in for a planning model. Replies come from a queue keyed by
// the hash of the last user message, then from an unkeyed queue, and finally
// from a deterministic template planner seeded by (description, seed).
class MockChatBackend : public ChatBackend {
 public:
  explicit MockChatBackend(std::uint64_t seed = 0) : seed_(seed) {}

  void enqueue_for(std::string_view last_user_message, std::string reply);
  void enqueue(std::string reply);

  std::string complete(const MessageList& messages) override;
  int max_concurrency() const override { return 64; }

  int calls() const;

 private:
  mutable std::mutex mutex_;
  std::uint64_t seed_;
  std::map<std::uint64_t, std::deque<std::string>> keyed_;
  std::deque<std::string> unkeyed_;
  int calls_ = 0;
};

// The template planner behind MockChatBackend: a valid canonical script with
// 3..6 shots derived from the description's capitalized names.
std::string synthesize_script(const std::string& scene_description, std::uint64_t seed);

}  // namespace storyframe
