#include "storyframe/survey.hpp"

#include <cstdio>
#include <map>

#include <nlohmann/json.hpp>

#include "storyframe/error.hpp"
#include "storyframe/rng.hpp"

namespace storyframe {

std::string_view to_string(StudyAspect aspect) {
  switch (aspect) {
    case StudyAspect::SceneAlignment: return "SceneAlignment";
    case StudyAspect::ShotAlignment: return "ShotAlignment";
    case StudyAspect::CharacterConsistency: return "CharacterConsistency";
    case StudyAspect::SettingConsistency: return "SettingConsistency";
  }
  return "";
}

StudyAspect study_aspect_from_string(std::string_view name) {
  for (StudyAspect a : kAllStudyAspects) {
    if (to_string(a) == name) return a;
  }
  throw Error(Errc::InvalidArgument, "unknown survey aspect: " + std::string(name));
}

std::string_view question_text(StudyAspect aspect) {
  switch (aspect) {
    case StudyAspect::SceneAlignment:
      return "Which sequence better tells the whole scene as described: its events, characters, place and story?";
    case StudyAspect::ShotAlignment:
      return "Which sequence better matches each shot's own text, including actions, expressions and framing?";
    case StudyAspect::CharacterConsistency:
      return "In which sequence do the main characters keep the same look from shot to shot?";
    case StudyAspect::SettingConsistency:
      return "In which sequence does the location stay the same place throughout, even as the view changes?";
  }
  return "";
}

void to_json(nlohmann::json& j, const SurveyItem& item) {
  j = {{"item_id", item.item_id},
       {"scene_id", item.scene_id},
       {"left_method", item.left_method},
       {"right_method", item.right_method},
       {"aspect", to_string(item.aspect)},
       {"time_limit_seconds", item.time_limit_seconds}};
}

void from_json(const nlohmann::json& j, SurveyItem& item) {
  item.item_id = j.at("item_id").get<std::string>();
  item.scene_id = j.at("scene_id").get<std::string>();
  item.left_method = j.at("left_method").get<std::string>();
  item.right_method = j.at("right_method").get<std::string>();
  item.aspect = study_aspect_from_string(j.at("aspect").get<std::string>());
  item.time_limit_seconds = j.value("time_limit_seconds", kDefaultTimeLimitSeconds);
}

std::vector<SurveyItem> build_survey(const std::vector<std::string>& scenes,
                                     const std::pair<std::string, std::string>& methods,
                                     const std::vector<StudyAspect>& aspects, std::uint64_t rng_seed,
                                     double time_limit_seconds) {
  if (scenes.empty()) throw Error(Errc::EmptyInput, "survey needs at least one scene");
  if (aspects.empty()) throw Error(Errc::EmptyInput, "survey needs at least one aspect");
  if (methods.first == methods.second) throw Error(Errc::InvalidArgument, "survey methods must differ");
  if (!(time_limit_seconds > 0.0)) throw Error(Errc::InvalidArgument, "time limit must be positive");

  Rng rng(rng_seed);
  std::vector<SurveyItem> items;
  items.reserve(scenes.size() * aspects.size());
  for (const auto& scene : scenes) {
    for (StudyAspect aspect : aspects) {
      SurveyItem item;
      char id[32];
      std::snprintf(id, sizeof id, "item-%06zu", items.size() + 1);
      item.item_id = id;
      item.scene_id = scene;
      item.aspect = aspect;
      item.time_limit_seconds = time_limit_seconds;
      if (rng.coin()) {
        item.left_method = methods.first;
        item.right_method = methods.second;
      } else {
        item.left_method = methods.second;
        item.right_method = methods.first;
      }
      items.push_back(std::move(item));
    }
  }
  return items;
}

void to_json(nlohmann::json& j, const SurveyResponse& response) {
  std::string choice;
  if (response.choice) choice = *response.choice == Side::Left ? "left" : "right";
  j = {{"item_id", response.item_id}, {"choice", choice}, {"elapsed_seconds", response.elapsed_seconds}};
}

void from_json(const nlohmann::json& j, SurveyResponse& response) {
  response.item_id = j.at("item_id").get<std::string>();
  response.choice.reset();
  if (j.contains("choice") && j["choice"].is_string()) {
    const auto c = j["choice"].get<std::string>();
    if (c == "left") {
      response.choice = Side::Left;
    } else if (c == "right") {
      response.choice = Side::Right;
    } else if (!c.empty() && c != "blank") {
      throw Error(Errc::InvalidArgument, "survey choice must be left, right or blank: " + c);
    }
  }
  response.elapsed_seconds = j.value("elapsed_seconds", 0.0);
}

std::vector<SurveyResponse> parse_responses_jsonl(std::string_view text) {
  std::vector<SurveyResponse> out;
  std::size_t start = 0;
  int line_no = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<SurveyResponse>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::InvalidArgument, "response line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

PreferenceTally tally_survey(const std::vector<SurveyItem>& items, const std::vector<SurveyResponse>& responses,
                             const std::string& ours_method) {
  std::map<std::string, const SurveyItem*> by_id;
  bool present[std::size(kAllStudyAspects)] = {};
  for (const auto& item : items) {
    by_id[item.item_id] = &item;
    present[static_cast<int>(item.aspect)] = true;
  }
  PreferenceTally tally;
  for (StudyAspect a : kAllStudyAspects) {
    if (present[static_cast<int>(a)]) tally.at(std::string(to_string(a)));
  }
  for (const auto& r : responses) {
    const auto it = by_id.find(r.item_id);
    if (it == by_id.end() || !r.choice || r.elapsed_seconds < 0.0 ||
        r.elapsed_seconds > it->second->time_limit_seconds) {
      ++tally.abstentions;
      continue;
    }
    const SurveyItem& item = *it->second;
    const std::string& chosen = *r.choice == Side::Left ? item.left_method : item.right_method;
    AspectTally& t = tally.at(std::string(to_string(item.aspect)));
    ++t.total;
    if (chosen == ours_method) ++t.wins;
  }
  return tally;
}

}  // namespace storyframe
