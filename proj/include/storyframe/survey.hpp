#pragma once

// Two-alternative forced-choice survey: item construction and tallying.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "storyframe/preference.hpp"

namespace storyframe {

enum class StudyAspect { SceneAlignment, ShotAlignment, CharacterConsistency, SettingConsistency };

inline constexpr StudyAspect kAllStudyAspects[] = {StudyAspect::SceneAlignment, StudyAspect::ShotAlignment,
                                                   StudyAspect::CharacterConsistency,
                                                   StudyAspect::SettingConsistency};

std::string_view to_string(StudyAspect aspect);
StudyAspect study_aspect_from_string(std::string_view name);  // throws InvalidArgument
std::string_view question_text(StudyAspect aspect);

inline constexpr double kDefaultTimeLimitSeconds = 45.0;

struct SurveyItem {
  std::string item_id;
  std::string scene_id;
  std::string left_method;
  std::string right_method;
  StudyAspect aspect = StudyAspect::SceneAlignment;
  double time_limit_seconds = kDefaultTimeLimitSeconds;

  friend bool operator==(const SurveyItem&, const SurveyItem&) = default;
};

void to_json(nlohmann::json& j, const SurveyItem& item);
void from_json(const nlohmann::json& j, SurveyItem& item);

// methods = {ours, baseline}. Emits scenes x aspects items in scene-major
// order; each item's sides come from one seeded coin flip.
std::vector<SurveyItem> build_survey(const std::vector<std::string>& scenes,
                                     const std::pair<std::string, std::string>& methods,
                                     const std::vector<StudyAspect>& aspects, std::uint64_t rng_seed,
                                     double time_limit_seconds = kDefaultTimeLimitSeconds);

enum class Side { Left, Right };

struct SurveyResponse {
  std::string item_id;
  std::optional<Side> choice;  // nullopt = left blank
  double elapsed_seconds = 0.0;

  friend bool operator==(const SurveyResponse&, const SurveyResponse&) = default;
};

void to_json(nlohmann::json& j, const SurveyResponse& response);
void from_json(const nlohmann::json& j, SurveyResponse& response);

// One JSON object per line: {"item_id", "choice": "left"|"right"|"", "elapsed_seconds"}.
std::vector<SurveyResponse> parse_responses_jsonl(std::string_view text);

// Wins counted for `ours_method`, per aspect in kAllStudyAspects order
// restricted to aspects present in items. Blank, late (elapsed > limit) and
// unknown-item responses are abstentions.
PreferenceTally tally_survey(const std::vector<SurveyItem>& items, const std::vector<SurveyResponse>& responses,
                             const std::string& ours_method);

}  // namespace storyframe
