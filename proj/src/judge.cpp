#include "storyframe/judge.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <optional>

#include <nlohmann/json.hpp>

#include "storyframe/parallel.hpp"
#include "storyframe/resources.hpp"
#include "storyframe/rng.hpp"

namespace storyframe {

AspectTally& PreferenceTally::at(const std::string& aspect) {
  for (auto& a : per_aspect) {
    if (a.aspect == aspect) return a;
  }
  per_aspect.push_back({aspect, 0, 0});
  return per_aspect.back();
}

const AspectTally* PreferenceTally::find(const std::string& aspect) const {
  for (const auto& a : per_aspect) {
    if (a.aspect == aspect) return &a;
  }
  return nullptr;
}

void to_json(nlohmann::json& j, const PreferenceTally& tally) {
  j = nlohmann::json::object();
  j["abstentions"] = tally.abstentions;
  j["per_aspect"] = nlohmann::json::array();
  for (const auto& a : tally.per_aspect) {
    j["per_aspect"].push_back(
        {{"aspect", a.aspect}, {"wins", a.wins}, {"total", a.total}, {"percentage", a.percentage()}});
  }
}

void from_json(const nlohmann::json& j, PreferenceTally& tally) {
  tally = {};
  tally.abstentions = j.value("abstentions", 0);
  for (const auto& a : j.at("per_aspect")) {
    tally.per_aspect.push_back({a.at("aspect").get<std::string>(), a.at("wins").get<int>(), a.at("total").get<int>()});
  }
}

std::string_view to_string(JudgeAspect aspect) {
  switch (aspect) {
    case JudgeAspect::OverallScene: return "OverallScene";
    case JudgeAspect::ShotDetails: return "ShotDetails";
    case JudgeAspect::KeyPoints: return "KeyPoints";
    case JudgeAspect::CharacterConsistency: return "CharacterConsistency";
    case JudgeAspect::BackgroundConsistency: return "BackgroundConsistency";
    case JudgeAspect::ActionFlow: return "ActionFlow";
    case JudgeAspect::CameraMovement: return "CameraMovement";
  }
  return "";
}

std::string_view display_name(JudgeAspect aspect) {
  switch (aspect) {
    case JudgeAspect::OverallScene: return "Overall Scene";
    case JudgeAspect::ShotDetails: return "Shot Details";
    case JudgeAspect::KeyPoints: return "Key Points";
    case JudgeAspect::CharacterConsistency: return "Character Consistency";
    case JudgeAspect::BackgroundConsistency: return "Background Consistency";
    case JudgeAspect::ActionFlow: return "Action Flow";
    case JudgeAspect::CameraMovement: return "Camera Movement";
  }
  return "";
}

namespace {

std::string lower(std::string_view s) {
  std::string out;
  for (char c : s) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim_decoration(std::string_view s) {
  auto junk = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '*' || c == '[' || c == ']' || c == '.' ||
           c == '"' || c == '\'' || c == '`';
  };
  while (!s.empty() && junk(s.front())) s.remove_prefix(1);
  while (!s.empty() && junk(s.back())) s.remove_suffix(1);
  return s;
}

std::optional<Choice> parse_choice(std::string_view text) {
  const std::string v = lower(trim_decoration(text));
  if (v == "sequence 1" || v == "1" || v == "a" || v == "sequence a") return Choice::A;
  if (v == "sequence 2" || v == "2" || v == "b" || v == "sequence b") return Choice::B;
  return std::nullopt;
}

std::string join_missing(const std::vector<JudgeAspect>& missing) {
  std::string out;
  for (std::size_t i = 0; i < missing.size(); ++i) {
    if (i > 0) out += ", ";
    out += to_string(missing[i]);
  }
  return out;
}

}  // namespace

MalformedVerdict::MalformedVerdict(std::vector<JudgeAspect> missing)
    : Error(Errc::MalformedVerdict, "judge reply lacks a choice for: " + join_missing(missing)),
      missing_(std::move(missing)) {}

MessageList build_judge_prompt(const std::vector<std::string>& seq_a, const std::vector<std::string>& seq_b) {
  if (seq_a.empty() || seq_b.empty()) throw Error(Errc::EmptySequence, "both sequences need at least one frame");
  const std::size_t na = seq_a.size();
  const std::size_t nb = seq_b.size();
  std::string user = "Sequence 1: " + std::to_string(na) + " keyframes, attached images 1-" + std::to_string(na) +
                     ".\nSequence 2: " + std::to_string(nb) + " keyframes, attached images " +
                     std::to_string(na + 1) + "-" + std::to_string(na + nb) +
                     ".\nCompare the two sequences and end with the final answer in the required format.";
  Message message{Role::User, std::move(user), seq_a};
  message.attachments.insert(message.attachments.end(), seq_b.begin(), seq_b.end());
  return {{Role::System, std::string(resource(resources::kJudgeInstruction).text), {}}, std::move(message)};
}

JudgeVerdict parse_judge_verdict(std::string_view reply) {
  JudgeVerdict verdict;
  std::size_t start = 0;
  while (start <= reply.size()) {
    std::size_t end = reply.find('\n', start);
    if (end == std::string_view::npos) end = reply.size();
    std::string_view line = reply.substr(start, end - start);
    start = end + 1;

    // "* Aspect: choice" with optional bold markers around the aspect.
    std::string_view s = line;
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    if (!s.starts_with('*') && !s.starts_with('-')) {
      if (end == reply.size()) break;
      continue;
    }
    const auto colon = s.find(':');
    if (colon != std::string_view::npos) {
      const std::string name = lower(trim_decoration(s.substr(1, colon - 1)));
      const auto choice = parse_choice(s.substr(colon + 1));
      if (choice) {
        for (JudgeAspect a : kAllJudgeAspects) {
          if (lower(display_name(a)) == name) verdict.per_aspect_choice[a] = *choice;
        }
      }
    }
    if (end == reply.size()) break;
  }
  std::vector<JudgeAspect> missing;
  for (JudgeAspect a : kAllJudgeAspects) {
    if (!verdict.per_aspect_choice.contains(a)) missing.push_back(a);
  }
  if (!missing.empty()) throw MalformedVerdict(std::move(missing));
  return verdict;
}

std::string render_verdict(const JudgeVerdict& verdict) {
  auto choice = [&](JudgeAspect a) -> std::string {
    const auto it = verdict.per_aspect_choice.find(a);
    if (it == verdict.per_aspect_choice.end()) return "[chosen sequence]";
    return it->second == Choice::A ? "Sequence 1" : "Sequence 2";
  };
  std::string out;
  auto line = [&](JudgeAspect a) { out += "    * " + std::string(display_name(a)) + ": " + choice(a) + "\n"; };
  out += "1. Textual Alignment:\n";
  line(JudgeAspect::OverallScene);
  line(JudgeAspect::ShotDetails);
  line(JudgeAspect::KeyPoints);
  out += "2. Consistency:\n";
  line(JudgeAspect::CharacterConsistency);
  line(JudgeAspect::BackgroundConsistency);
  out += "3. Continuity:\n";
  line(JudgeAspect::ActionFlow);
  line(JudgeAspect::CameraMovement);
  return out;
}

PreferenceTally fold_judge_tally(const PreferenceTally& raw) {
  auto get = [&](JudgeAspect a) {
    const AspectTally* t = raw.find(std::string(to_string(a)));
    return t ? *t : AspectTally{};
  };
  PreferenceTally folded;
  folded.abstentions = raw.abstentions;
  auto put = [&](const char* column, std::initializer_list<JudgeAspect> sources) {
    AspectTally& t = folded.at(column);
    for (JudgeAspect a : sources) {
      t.wins += get(a).wins;
      t.total += get(a).total;
    }
  };
  put("Scene", {JudgeAspect::OverallScene});
  put("Shot", {JudgeAspect::ShotDetails, JudgeAspect::KeyPoints});
  put("Char", {JudgeAspect::CharacterConsistency});
  put("BG", {JudgeAspect::BackgroundConsistency});
  put("Action", {JudgeAspect::ActionFlow});
  put("Camera", {JudgeAspect::CameraMovement});
  return folded;
}

JudgingOutcome run_pairwise_judging(std::vector<ScenePair> pairs, ChatBackend& judge, std::uint64_t rng_seed,
                                    int jobs) {
  if (pairs.empty()) throw Error(Errc::EmptyInput, "no scene pairs to judge");
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const ScenePair& a, const ScenePair& b) { return a.scene_id < b.scene_id; });

  // Side assignment is drawn up front so it does not depend on scheduling.
  Rng rng(rng_seed);
  std::vector<bool> ours_first(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) ours_first[i] = rng.coin();

  struct Outcome {
    std::optional<JudgeVerdict> verdict;
  };
  const int workers = std::min(jobs, judge.max_concurrency());
  const auto outcomes = parallel_map<Outcome>(pairs.size(), workers, [&](std::size_t i) {
    const auto& p = pairs[i];
    const auto messages = ours_first[i] ? build_judge_prompt(p.ours, p.baseline) : build_judge_prompt(p.baseline, p.ours);
    const std::string reply = judge.complete(messages);
    try {
      return Outcome{parse_judge_verdict(reply)};
    } catch (const MalformedVerdict&) {
      return Outcome{std::nullopt};
    }
  });

  PreferenceTally raw;
  for (JudgeAspect a : kAllJudgeAspects) raw.at(std::string(to_string(a)));
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].verdict) {
      ++raw.abstentions;
      continue;
    }
    const Choice ours = ours_first[i] ? Choice::A : Choice::B;
    for (const auto& [aspect, choice] : outcomes[i].verdict->per_aspect_choice) {
      AspectTally& t = raw.at(std::string(to_string(aspect)));
      ++t.total;
      if (choice == ours) ++t.wins;
    }
  }
  return {raw, fold_judge_tally(raw)};
}

MockJudgeBackend MockJudgeBackend::side_constant(Choice side) {
  MockJudgeBackend b;
  b.policy_ = Policy::SideConstant;
  b.side_ = side;
  return b;
}

MockJudgeBackend MockJudgeBackend::marker(std::string marker) {
  MockJudgeBackend b;
  b.policy_ = Policy::Marker;
  b.marker_ = std::move(marker);
  return b;
}

MockJudgeBackend MockJudgeBackend::hashed(std::uint64_t seed) {
  MockJudgeBackend b;
  b.policy_ = Policy::Hashed;
  b.seed_ = seed;
  return b;
}

std::string MockJudgeBackend::complete(const MessageList& messages) {
  const Message* user = nullptr;
  for (const auto& m : messages) {
    if (m.role == Role::User) user = &m;
  }
  if (user == nullptr) throw Error(Errc::BackendError, "judge request has no user message");

  std::size_t first_count = user->attachments.size();
  unsigned long parsed = 0;
  if (std::sscanf(user->content.c_str(), "Sequence 1: %lu", &parsed) == 1) first_count = parsed;
  first_count = std::min(first_count, user->attachments.size());

  JudgeVerdict verdict;
  for (JudgeAspect a : kAllJudgeAspects) {
    Choice c = side_;
    if (policy_ == Policy::Marker) {
      auto has = [&](std::size_t from, std::size_t to) {
        for (std::size_t i = from; i < to; ++i) {
          if (user->attachments[i].find(marker_) != std::string::npos) return true;
        }
        return false;
      };
      const bool in_a = has(0, first_count);
      const bool in_b = has(first_count, user->attachments.size());
      c = in_b && !in_a ? Choice::B : Choice::A;
    } else if (policy_ == Policy::Hashed) {
      std::uint64_t h = mix64(seed_) ^ static_cast<std::uint64_t>(a);
      for (const auto& ref : user->attachments) h = fnv1a64(ref, h);
      c = (mix64(h) & 1) != 0 ? Choice::B : Choice::A;
    }
    verdict.per_aspect_choice[a] = c;
  }
  return "Both sequences were reviewed.\n\n" + render_verdict(verdict);
}

}  // namespace storyframe
