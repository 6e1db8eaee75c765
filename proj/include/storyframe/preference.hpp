#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace storyframe {

struct AspectTally {
  std::string aspect;
  int wins = 0;  // responses favoring "ours"
  int total = 0;

  // 100 * wins / total; 0 when nothing was counted.
  double percentage() const { return total == 0 ? 0.0 : 100.0 * wins / total; }

  friend bool operator==(const AspectTally&, const AspectTally&) = default;
};

// Per-aspect win counts, in a fixed aspect order. Abstentions (malformed,
// blank or late answers) are excluded from every total.
struct PreferenceTally {
  std::vector<AspectTally> per_aspect;
  int abstentions = 0;

  AspectTally& at(const std::string& aspect);
  const AspectTally* find(const std::string& aspect) const;

  friend bool operator==(const PreferenceTally&, const PreferenceTally&) = default;
};

void to_json(nlohmann::json& j, const PreferenceTally& tally);
void from_json(const nlohmann::json& j, PreferenceTally& tally);

}  // namespace storyframe
