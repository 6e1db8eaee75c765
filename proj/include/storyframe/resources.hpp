#pragma once

#include <string_view>
#include <utility>
#include <vector>

namespace storyframe {

// Prompt texts and tables shipped inside the library. Text resources may
// start with a "# <name> vN" line; it is split off as the version tag.
struct Resource {
  std::string_view name;
  std::string_view version;  // empty when the file has no version line
  std::string_view text;
};

// Throws Error(NotFound) for unknown names.
Resource resource(std::string_view file_name);

namespace resources {
inline constexpr std::string_view kPlanningInstruction = "planning_instruction.txt";
inline constexpr std::string_view kPlanningExemplars = "planning_exemplars.json";
inline constexpr std::string_view kJudgeInstruction = "judge_instruction.txt";
inline constexpr std::string_view kCorefInstruction = "coref_instruction.txt";
inline constexpr std::string_view kSettingInstruction = "setting_instruction.txt";
inline constexpr std::string_view kShotInstruction = "shot_instruction.txt";
inline constexpr std::string_view kCharacterInstruction = "character_instruction.txt";
inline constexpr std::string_view kShotSizeLabels = "shot_size_labels.json";
}  // namespace resources

namespace detail {
const std::vector<std::pair<std::string_view, std::string_view>>& embedded_resources();
}

}  // namespace storyframe
