#pragma once

// Random valid scene plans for property tests.

#include <string>
#include <vector>

#include "storyframe/rng.hpp"
#include "storyframe/scene_script.hpp"

namespace storyframe::testing {

inline std::string random_word(Rng& rng, bool capitalized) {
  static const char* kSyllables[] = {"ka", "lo", "mi", "ren", "sa", "tor", "vel", "un", "dri", "bo", "que", "zan"};
  std::string w;
  const int parts = 1 + static_cast<int>(rng.below(3));
  for (int i = 0; i < parts; ++i) w += kSyllables[rng.below(12)];
  if (capitalized) w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

inline std::string random_sentence(Rng& rng, const std::vector<std::string>& names) {
  static const char* kFiller[] = {"walks", "toward", "the", "old", "window,", "and", "quietly", "turns",
                                  "under", "grey", "light", "while", "rain", "falls", "(again)", "-", "fast.",
                                  "\"stop\"", "it's", "50%", "café"};
  std::string s;
  const int words = 3 + static_cast<int>(rng.below(12));
  for (int i = 0; i < words; ++i) {
    if (!s.empty()) s += ' ';
    if (!names.empty() && rng.below(4) == 0) {
      s += names[rng.below(names.size())];
    } else if (rng.below(5) == 0) {
      s += random_word(rng, false);
    } else {
      s += kFiller[rng.below(sizeof kFiller / sizeof kFiller[0])];
    }
  }
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

// Occasionally multi-line, never with blank or header-like lines.
inline std::string random_text(Rng& rng, const std::vector<std::string>& names) {
  std::string t = random_sentence(rng, names);
  if (rng.below(5) == 0) t += "\n" + random_sentence(rng, names);
  return t;
}

inline ScenePlan random_plan(Rng& rng, int min_shots = 1, int max_shots = 12) {
  ScenePlan plan;
  std::vector<std::string> names;
  const int cast = static_cast<int>(rng.below(5));
  for (int i = 0; i < cast; ++i) {
    std::string name = random_word(rng, true);
    if (rng.below(4) == 0) name += " " + random_word(rng, true);
    bool taken = false;
    for (const auto& n : names) taken = taken || n == name;
    if (taken) continue;
    names.push_back(name);
  }
  plan.scene_description = random_text(rng, names);
  plan.setting = random_text(rng, {});
  for (const auto& n : names) plan.characters.push_back({n, random_text(rng, {})});
  const int shots = min_shots + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_shots - min_shots + 1)));
  for (int k = 1; k <= shots; ++k) {
    ShotSpec s;
    s.index = k;
    s.size = kAllShotSizes[rng.below(3)];
    s.description = random_text(rng, names);
    plan.shots.push_back(std::move(s));
  }
  return resolve_characters(std::move(plan));
}

}  // namespace storyframe::testing
