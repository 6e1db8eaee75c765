#pragma once

// Pairwise MLLM judging of two keyframe sequences of the same scene.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "storyframe/chat.hpp"
#include "storyframe/error.hpp"
#include "storyframe/preference.hpp"

namespace storyframe {

enum class JudgeAspect {
  OverallScene,
  ShotDetails,
  KeyPoints,
  CharacterConsistency,
  BackgroundConsistency,
  ActionFlow,
  CameraMovement,
};

inline constexpr JudgeAspect kAllJudgeAspects[] = {
    JudgeAspect::OverallScene,          JudgeAspect::ShotDetails, JudgeAspect::KeyPoints,
    JudgeAspect::CharacterConsistency,  JudgeAspect::BackgroundConsistency,
    JudgeAspect::ActionFlow,            JudgeAspect::CameraMovement};

std::string_view to_string(JudgeAspect aspect);     // "OverallScene"
std::string_view display_name(JudgeAspect aspect);  // "Overall Scene"

// A is "Sequence 1", B is "Sequence 2".
enum class Choice { A, B };

struct JudgeVerdict {
  std::map<JudgeAspect, Choice> per_aspect_choice;

  friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;
};

class MalformedVerdict : public Error {
 public:
  explicit MalformedVerdict(std::vector<JudgeAspect> missing);
  const std::vector<JudgeAspect>& missing() const noexcept { return missing_; }

 private:
  std::vector<JudgeAspect> missing_;
};

// System turn with the bundled evaluation instruction, then one user turn
// labeling Sequence 1 and Sequence 2 with all frames attached in order.
MessageList build_judge_prompt(const std::vector<std::string>& seq_a, const std::vector<std::string>& seq_b);

// Reads the last "* <Aspect>: <choice>" line per aspect. Choices may be
// written "Sequence 1", "1" or "A" (and the 2/B forms), optionally bracketed
// or bold. Throws MalformedVerdict naming every aspect without a choice.
JudgeVerdict parse_judge_verdict(std::string_view reply);

// The final-answer block in the instruction's layout.
std::string render_verdict(const JudgeVerdict& verdict);

struct ScenePair {
  std::string scene_id;
  std::vector<std::string> ours;
  std::vector<std::string> baseline;
};

// Judge column names after folding Key Points into Shot Details.
inline constexpr const char* kFoldedJudgeColumns[] = {"Scene", "Shot", "Char", "BG", "Action", "Camera"};

struct JudgingOutcome {
  PreferenceTally raw;     // seven aspects
  PreferenceTally folded;  // six report columns
};

// Pairs are processed in scene_id order. Each pair gets a seeded coin flip
// deciding whether "ours" is shown as Sequence 1; verdicts are mapped back
// to methods before tallying. Malformed replies count as abstentions.
JudgingOutcome run_pairwise_judging(std::vector<ScenePair> pairs, ChatBackend& judge, std::uint64_t rng_seed,
                                    int jobs = 1);

PreferenceTally fold_judge_tally(const PreferenceTally& raw);

// Offline judge replying in the verdict format.
//   SideConstant: always picks `side`.
//   Marker: picks the sequence whose attachment refs contain `marker`
//           (Sequence 1 when both or neither do).
//   Hashed: per-aspect choice from a hash of the attachment refs and seed.
class MockJudgeBackend : public ChatBackend {
 public:
  enum class Policy { SideConstant, Marker, Hashed };

  static MockJudgeBackend side_constant(Choice side);
  static MockJudgeBackend marker(std::string marker);
  static MockJudgeBackend hashed(std::uint64_t seed);

  std::string complete(const MessageList& messages) override;
  int max_concurrency() const override { return 64; }

 private:
  Policy policy_ = Policy::Hashed;
  Choice side_ = Choice::A;
  std::string marker_;
  std::uint64_t seed_ = 0;
};

}  // namespace storyframe
