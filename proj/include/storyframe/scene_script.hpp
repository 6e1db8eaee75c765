#pragma once

// Scene plan data model and its canonical line-oriented text format:
//
//   SCENE: <scene description>
//   SETTING: <setting>
//   CHARACTER <name>: <appearance>
//   SHOT <k> [<close-up|medium|wide>]: <description>
//
// Headers are matched at line start, case-sensitively. A section body is the
// header remainder plus any following non-blank, non-header lines. A blank
// line ends the current body; only a header may follow it.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "storyframe/error.hpp"

namespace storyframe {

enum class ShotSize { CloseUp, Medium, Wide };

inline constexpr ShotSize kAllShotSizes[] = {ShotSize::CloseUp, ShotSize::Medium, ShotSize::Wide};

std::string_view to_token(ShotSize size);
std::optional<ShotSize> shot_size_from_token(std::string_view token);

struct CharacterSpec {
  std::string name;
  std::string appearance;

  friend bool operator==(const CharacterSpec&, const CharacterSpec&) = default;
};

struct ShotSpec {
  int index = 0;
  ShotSize size = ShotSize::Medium;
  std::string description;
  std::vector<std::string> referenced_characters;  // derived, see resolve_characters

  friend bool operator==(const ShotSpec&, const ShotSpec&) = default;
};

struct ScenePlan {
  std::string scene_description;
  std::string setting;
  std::vector<CharacterSpec> characters;
  std::vector<ShotSpec> shots;

  friend bool operator==(const ScenePlan&, const ScenePlan&) = default;
};

enum class ViolationKind {
  EmptyShotList,
  TooManyShots,
  ShotCountOutsideStrictRange,
  EmptySetting,
  InvalidCharacterName,
  EmptyAppearance,
  DuplicateCharacter,
  EmptyShotDescription,
  ShotIndexMismatch,
  UnknownCharacterReference,
  NonCanonicalText,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string field;   // e.g. "shots[1].description"
  std::string detail;  // human-readable rule statement

  std::string to_string() const;
  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationOptions {
  int min_shots = 1;
  int max_shots = 32;
  // Enforces the 3..10 shot band used for training data.
  bool strict = false;
};

inline constexpr int kStrictMinShots = 3;
inline constexpr int kStrictMaxShots = 10;

std::vector<Violation> validate(const ScenePlan& plan, const ValidationOptions& options = {});

// Recomputes every shot's referenced_characters: declared names occurring in
// the description as whole-word, case-sensitive matches, in declaration order.
ScenePlan resolve_characters(ScenePlan plan);

struct ParseIssue {
  Errc code;
  int line = 0;  // 1-based, 0 when not tied to a line
  std::string message;
};

class ScriptParseError : public Error {
 public:
  explicit ScriptParseError(std::vector<ParseIssue> issues);
  const std::vector<ParseIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<ParseIssue> issues_;
};

class InvalidPlanError : public Error {
 public:
  explicit InvalidPlanError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

// Throws ScriptParseError listing every structural problem found. Character
// references are resolved on the way out.
ScenePlan parse_script(std::string_view text);

// Throws InvalidPlanError when validate() reports anything.
std::string serialize_script(const ScenePlan& plan);

// Line-ending and whitespace normalization applied to every text field:
// CRLF -> LF, trailing whitespace stripped per line, leading whitespace
// stripped, blank lines at either end dropped.
std::string normalize_text(std::string_view text);

void to_json(nlohmann::json& j, const ScenePlan& plan);
void from_json(const nlohmann::json& j, ScenePlan& plan);
void to_json(nlohmann::json& j, const Violation& v);
nlohmann::json violations_json(const std::vector<Violation>& violations);

}  // namespace storyframe
