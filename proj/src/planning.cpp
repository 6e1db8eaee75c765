#include "storyframe/planning.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>

#include <nlohmann/json.hpp>

#include "storyframe/resources.hpp"
#include "storyframe/rng.hpp"

namespace storyframe {

namespace {

constexpr std::string_view kGenericPrefix = "Plan for the movie scene description: '";
constexpr std::string_view kScenePrefix = "Scene description: ";

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

std::string_view to_string(PromptStrategy strategy) {
  switch (strategy) {
    case PromptStrategy::Generic: return "generic";
    case PromptStrategy::InstructionOnly: return "instruction";
    case PromptStrategy::InstructionWithExemplars: return "instruction+exemplars";
  }
  return "generic";
}

PromptStrategy parse_strategy(std::string_view text) {
  if (text == "g" || text == "generic") return PromptStrategy::Generic;
  if (text == "i" || text == "instruction") return PromptStrategy::InstructionOnly;
  if (text == "ie" || text == "instruction+exemplars") return PromptStrategy::InstructionWithExemplars;
  throw Error(Errc::InvalidArgument, "unknown prompt strategy '" + std::string(text) + "'");
}

Exemplar make_exemplar(std::string scene_description, std::string script_text) {
  try {
    (void)parse_script(script_text);
  } catch (const ScriptParseError& e) {
    throw Error(Errc::InvalidExemplar, std::string("exemplar script does not parse: ") + e.what());
  }
  return {std::move(scene_description), std::move(script_text)};
}

std::vector<Exemplar> exemplars_from_json(std::string_view json_text) {
  std::vector<Exemplar> out;
  const auto doc = nlohmann::json::parse(json_text);
  for (const auto& e : doc) {
    out.push_back(make_exemplar(e.at("scene_description").get<std::string>(),
                                e.at("script_text").get<std::string>()));
  }
  return out;
}

std::vector<Exemplar> default_exemplars() {
  return exemplars_from_json(resource(resources::kPlanningExemplars).text);
}

MessageList build_planning_prompt(const std::string& scene_description, PromptStrategy strategy,
                                  const std::vector<Exemplar>& exemplars) {
  if (scene_description.empty()) throw Error(Errc::InvalidArgument, "scene description is empty");

  MessageList messages;
  if (strategy == PromptStrategy::Generic) {
    messages.push_back({Role::User, std::string(kGenericPrefix) + scene_description + "'", {}});
    return messages;
  }

  messages.push_back({Role::System, std::string(resource(resources::kPlanningInstruction).text), {}});
  if (strategy == PromptStrategy::InstructionWithExemplars) {
    if (exemplars.empty()) {
      throw Error(Errc::MissingExemplars, "instruction+exemplars strategy needs at least one exemplar");
    }
    for (const auto& e : exemplars) {
      messages.push_back({Role::User, std::string(kScenePrefix) + e.scene_description, {}});
      messages.push_back({Role::Assistant, e.script_text, {}});
    }
  }
  messages.push_back({Role::User, std::string(kScenePrefix) + scene_description, {}});
  return messages;
}

std::string repair_message(const std::string& problems) {
  return "Your reply did not follow the required format: " + problems + ". Re-emit the full script.";
}

PlanningFailed::PlanningFailed(std::vector<std::string> problems, std::string raw_reply, int calls)
    : Error(Errc::PlanningFailed,
            "planning failed after " + std::to_string(calls) + " call(s): " + join(problems, "; ")),
      problems_(std::move(problems)),
      raw_reply_(std::move(raw_reply)),
      calls_(calls) {}

std::string extract_script_text(const std::string& reply) {
  const auto open = reply.find("```");
  if (open == std::string::npos) return reply;
  const auto body_start = reply.find('\n', open);
  if (body_start == std::string::npos) return reply;
  const auto close = reply.find("```", body_start);
  if (close == std::string::npos) return reply.substr(body_start + 1);
  return reply.substr(body_start + 1, close - body_start - 1);
}

PlanningOutcome plan_scene(const std::string& scene_description, PromptStrategy strategy,
                           const std::vector<Exemplar>& exemplars, ChatBackend& backend,
                           const PlanningOptions& options) {
  if (options.max_repairs < 0) throw Error(Errc::InvalidArgument, "max_repairs must be >= 0");
  MessageList messages = build_planning_prompt(scene_description, strategy, exemplars);

  for (int attempt = 0;; ++attempt) {
    std::string reply = backend.complete(messages);
    std::vector<std::string> problems;
    try {
      ScenePlan plan = parse_script(extract_script_text(reply));
      for (const auto& v : validate(plan, options.validation)) problems.push_back(v.to_string());
      if (problems.empty()) return {std::move(plan), std::move(reply), attempt, strategy};
    } catch (const ScriptParseError& e) {
      for (const auto& issue : e.issues()) {
        std::string p(to_string(issue.code));
        if (issue.line > 0) p += " at line " + std::to_string(issue.line);
        problems.push_back(p + ": " + issue.message);
      }
    }
    if (attempt >= options.max_repairs) {
      throw PlanningFailed(std::move(problems), std::move(reply), attempt + 1);
    }
    messages.push_back({Role::Assistant, reply, {}});
    messages.push_back({Role::User, repair_message(join(problems, "; ")), {}});
  }
}

void MockChatBackend::enqueue_for(std::string_view last_user_message, std::string reply) {
  std::lock_guard lock(mutex_);
  keyed_[fnv1a64(last_user_message)].push_back(std::move(reply));
}

void MockChatBackend::enqueue(std::string reply) {
  std::lock_guard lock(mutex_);
  unkeyed_.push_back(std::move(reply));
}

int MockChatBackend::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::string MockChatBackend::complete(const MessageList& messages) {
  std::lock_guard lock(mutex_);
  ++calls_;
  const Message* last_user = nullptr;
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::User) {
      last_user = &*it;
      break;
    }
  }
  if (last_user != nullptr) {
    auto found = keyed_.find(fnv1a64(last_user->content));
    if (found != keyed_.end() && !found->second.empty()) {
      std::string reply = std::move(found->second.front());
      found->second.pop_front();
      return reply;
    }
  }
  if (!unkeyed_.empty()) {
    std::string reply = std::move(unkeyed_.front());
    unkeyed_.pop_front();
    return reply;
  }
  // Template planner: recover the scene description from the newest user
  // turn that carries one (repair turns do not).
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role != Role::User) continue;
    const std::string& c = it->content;
    if (c.starts_with(kGenericPrefix) && c.ends_with("'")) {
      return synthesize_script(c.substr(kGenericPrefix.size(), c.size() - kGenericPrefix.size() - 1), seed_);
    }
    if (c.starts_with(kScenePrefix)) return synthesize_script(c.substr(kScenePrefix.size()), seed_);
  }
  throw Error(Errc::BackendError, "mock chat backend: no queued reply and no scene description");
}

std::string synthesize_script(const std::string& scene_description, std::uint64_t seed) {
  static const std::set<std::string> kStopwords = {
      "A", "An", "The", "In", "On", "At", "As", "And", "But", "Or", "Then", "When", "While", "After",
      "Before", "He", "She", "They", "It", "His", "Her", "Their", "Its", "We", "I", "You", "This",
      "That", "There", "Here", "With", "Without", "From", "To", "Of", "For", "By", "Into", "Onto",
      "One", "Two", "Three", "Four", "Five", "Some", "Several", "Inside", "Outside", "Later", "Now",
      "Meanwhile", "Suddenly", "Finally", "Once", "During", "Under", "Over", "Near", "Across"};
  static const char* kAppearances[] = {
      "a tall figure in a long charcoal coat with a red scarf",
      "a slight figure with cropped silver hair, a denim jacket and white sneakers",
      "a broad-shouldered figure with a beard, a flannel shirt and work boots",
      "a young figure with braided hair, a yellow raincoat and a messenger bag",
      "an older figure with round glasses, a tweed blazer and a walking cane",
      "a wiry figure with a shaved head, a black leather jacket and fingerless gloves"};
  static const char* kSettings[] = {
      "lit by low golden evening sun with long shadows",
      "under cold blue night light with wet reflective surfaces",
      "in flat overcast daylight with muted colors",
      "in warm interior tungsten light with deep shadows"};
  static const char* kBeats[] = {
      "reacts to what is happening", "moves deeper into the scene", "pauses and looks around",
      "turns toward the others", "acts decisively", "takes in the outcome"};

  // Collapse whitespace so the description is a single canonical line.
  std::string desc;
  for (char c : scene_description) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!desc.empty() && desc.back() != ' ') desc += ' ';
    } else {
      desc += c;
    }
  }
  while (!desc.empty() && (desc.back() == ' ' || desc.back() == '.')) desc.pop_back();
  if (desc.empty()) desc = "An unnamed scene";

  std::uint64_t h = mix64(fnv1a64(desc) ^ mix64(seed));

  std::vector<std::string> names;
  static const std::regex word_re("[A-Z][a-z]+");
  for (auto it = std::sregex_iterator(desc.begin(), desc.end(), word_re); it != std::sregex_iterator(); ++it) {
    const std::string w = it->str();
    const auto pos = static_cast<std::size_t>(it->position());
    const bool whole = (pos == 0 || !std::isalnum(static_cast<unsigned char>(desc[pos - 1]))) &&
                       (pos + w.size() >= desc.size() ||
                        !std::isalnum(static_cast<unsigned char>(desc[pos + w.size()])));
    if (!whole || kStopwords.contains(w)) continue;
    if (w == "SCENE" || w == "SETTING" || w == "CHARACTER" || w == "SHOT") continue;
    if (std::find(names.begin(), names.end(), w) == names.end()) names.push_back(w);
    if (names.size() == 3) break;
  }

  const int n = 3 + static_cast<int>(h % 4);
  std::string who = names.empty() ? std::string("The location") : names.front();
  std::string everyone;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i > 0) everyone += i + 1 == names.size() ? " and " : ", ";
    everyone += names[i];
  }
  if (everyone.empty()) everyone = "the location";

  std::string out = "SCENE: " + desc + ".\n";
  out += "SETTING: The place where " + desc + ", " + kSettings[(h >> 8) % 4] + ".\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    out += "CHARACTER " + names[i] + ": " + kAppearances[(h >> (12 + 3 * i)) % 6] + ".\n";
  }
  for (int k = 1; k <= n; ++k) {
    ShotSize size;
    std::string text;
    if (k == 1) {
      size = ShotSize::Wide;
      text = "Wide view establishing " + everyone + " as the scene begins: " + desc + ".";
    } else if (k == n) {
      size = ShotSize::CloseUp;
      text = "Close on " + who + " at the end of the moment, expression revealing the outcome.";
    } else {
      const std::uint64_t pick = mix64(h + static_cast<std::uint64_t>(k));
      size = pick % 2 == 0 ? ShotSize::Medium : ShotSize::CloseUp;
      const std::string& actor = names.empty() ? who : names[pick % names.size()];
      text = actor + " " + kBeats[(pick >> 8) % 6] + ", framed to show " +
             (size == ShotSize::Medium ? "body language and surroundings." : "the face in detail.");
    }
    out += "SHOT " + std::to_string(k) + " [" + std::string(to_token(size)) + "]: " + text + "\n";
  }
  return out;
}

void to_json(nlohmann::json& j, const Message& m) {
  j = {{"role", std::string(to_string(m.role))}, {"content", m.content}};
  if (!m.attachments.empty()) j["attachments"] = m.attachments;
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

}  // namespace storyframe
