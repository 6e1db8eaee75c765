#include "storyframe/scene_script.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace storyframe {

namespace {

const std::regex& scene_header() {
  static const std::regex re(R"(^SCENE:(.*)$)");
  return re;
}
const std::regex& setting_header() {
  static const std::regex re(R"(^SETTING:(.*)$)");
  return re;
}
const std::regex& character_header() {
  static const std::regex re(R"(^CHARACTER ([^:]+):(.*)$)");
  return re;
}
const std::regex& shot_header() {
  static const std::regex re(R"(^SHOT (\d+) \[([^\]]*)\]:?(.*)$)");
  return re;
}

bool is_header_line(const std::string& line) {
  return std::regex_match(line, scene_header()) || std::regex_match(line, setting_header()) ||
         std::regex_match(line, character_header()) || std::regex_match(line, shot_header());
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string_view rstrip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view lstrip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  return s;
}

std::string_view strip(std::string_view s) { return lstrip(rstrip(s)); }

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c == '_' || c >= 0x80; }

bool contains_whole_word(std::string_view haystack, std::string_view word) {
  if (word.empty()) return false;
  std::size_t pos = haystack.find(word);
  while (pos != std::string_view::npos) {
    const bool left_ok = pos == 0 || !is_word_byte(static_cast<unsigned char>(haystack[pos - 1]));
    const std::size_t after = pos + word.size();
    const bool right_ok =
        after >= haystack.size() || !is_word_byte(static_cast<unsigned char>(haystack[after]));
    if (left_ok && right_ok) return true;
    pos = haystack.find(word, pos + 1);
  }
  return false;
}

constexpr std::string_view kHeaderKeywords[] = {"SCENE", "SETTING", "CHARACTER", "SHOT"};

void check_text(std::vector<Violation>& out, const std::string& field, const std::string& text) {
  if (text != normalize_text(text)) {
    out.push_back({ViolationKind::NonCanonicalText, field,
                   "text has surrounding whitespace, trailing spaces or CR characters"});
    return;
  }
  for (const auto& line : split_lines(text)) {
    if (text.empty()) break;
    if (is_blank(line)) {
      out.push_back({ViolationKind::NonCanonicalText, field, "text contains a blank line"});
      return;
    }
    if (is_header_line(line)) {
      out.push_back({ViolationKind::NonCanonicalText, field,
                     "a line of the text would parse as a section header"});
      return;
    }
  }
}

}  // namespace

std::string_view to_token(ShotSize size) {
  switch (size) {
    case ShotSize::CloseUp: return "close-up";
    case ShotSize::Medium: return "medium";
    case ShotSize::Wide: return "wide";
  }
  return "medium";
}

std::optional<ShotSize> shot_size_from_token(std::string_view token) {
  for (ShotSize s : kAllShotSizes) {
    if (to_token(s) == token) return s;
  }
  return std::nullopt;
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::EmptyShotList: return "EmptyShotList";
    case ViolationKind::TooManyShots: return "TooManyShots";
    case ViolationKind::ShotCountOutsideStrictRange: return "ShotCountOutsideStrictRange";
    case ViolationKind::EmptySetting: return "EmptySetting";
    case ViolationKind::InvalidCharacterName: return "InvalidCharacterName";
    case ViolationKind::EmptyAppearance: return "EmptyAppearance";
    case ViolationKind::DuplicateCharacter: return "DuplicateCharacter";
    case ViolationKind::EmptyShotDescription: return "EmptyShotDescription";
    case ViolationKind::ShotIndexMismatch: return "ShotIndexMismatch";
    case ViolationKind::UnknownCharacterReference: return "UnknownCharacterReference";
    case ViolationKind::NonCanonicalText: return "NonCanonicalText";
  }
  return "Unknown";
}

std::string Violation::to_string() const {
  std::string out(storyframe::to_string(kind));
  out += "(" + field + "): " + detail;
  return out;
}

std::string normalize_text(std::string_view text) {
  std::vector<std::string> lines = split_lines(text);
  for (auto& line : lines) line = std::string(rstrip(line));
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  std::size_t first = 0;
  while (first < lines.size() && lines[first].empty()) ++first;
  std::string out;
  for (std::size_t i = first; i < lines.size(); ++i) {
    if (i > first) out += '\n';
    out += i == first ? std::string(lstrip(lines[i])) : lines[i];
  }
  return out;
}

std::vector<Violation> validate(const ScenePlan& plan, const ValidationOptions& options) {
  std::vector<Violation> out;
  const int n = static_cast<int>(plan.shots.size());

  if (n == 0) {
    out.push_back({ViolationKind::EmptyShotList, "shots", "plan must contain at least one shot"});
  } else if (n < options.min_shots || n > options.max_shots) {
    out.push_back({ViolationKind::TooManyShots, "shots",
                   "shot count " + std::to_string(n) + " outside " +
                       std::to_string(options.min_shots) + ".." + std::to_string(options.max_shots)});
  }
  if (options.strict && n > 0 && (n < kStrictMinShots || n > kStrictMaxShots)) {
    out.push_back({ViolationKind::ShotCountOutsideStrictRange, "shots",
                   "strict mode requires 3..10 shots, got " + std::to_string(n)});
  }

  check_text(out, "scene_description", plan.scene_description);
  if (plan.setting.empty()) {
    out.push_back({ViolationKind::EmptySetting, "setting", "setting must be non-empty"});
  } else {
    check_text(out, "setting", plan.setting);
  }

  std::set<std::string> names;
  for (std::size_t i = 0; i < plan.characters.size(); ++i) {
    const auto& c = plan.characters[i];
    const std::string field = "characters[" + std::to_string(i) + "]";
    const bool bad_name = c.name.empty() || c.name != strip(c.name) ||
                          c.name.find_first_of(":\n\r[]") != std::string::npos ||
                          std::any_of(std::begin(kHeaderKeywords), std::end(kHeaderKeywords),
                                      [&](std::string_view kw) { return contains_whole_word(c.name, kw); });
    if (bad_name) {
      out.push_back({ViolationKind::InvalidCharacterName, field + ".name",
                     "name must be non-empty, trimmed, single-line, free of ':' '[' ']' and header keywords"});
    }
    if (c.appearance.empty()) {
      out.push_back({ViolationKind::EmptyAppearance, field + ".appearance", "appearance must be non-empty"});
    } else {
      check_text(out, field + ".appearance", c.appearance);
    }
    if (!names.insert(c.name).second) {
      out.push_back({ViolationKind::DuplicateCharacter, field + ".name",
                     "character '" + c.name + "' declared more than once"});
    }
  }

  for (std::size_t i = 0; i < plan.shots.size(); ++i) {
    const auto& s = plan.shots[i];
    const std::string field = "shots[" + std::to_string(i) + "]";
    if (s.index != static_cast<int>(i) + 1) {
      out.push_back({ViolationKind::ShotIndexMismatch, field + ".index",
                     "expected index " + std::to_string(i + 1) + ", got " + std::to_string(s.index)});
    }
    if (s.description.empty()) {
      out.push_back({ViolationKind::EmptyShotDescription, field + ".description",
                     "shot description must be non-empty"});
    } else {
      check_text(out, field + ".description", s.description);
    }
    for (const auto& ref : s.referenced_characters) {
      if (!names.contains(ref)) {
        out.push_back({ViolationKind::UnknownCharacterReference, field + ".referenced_characters",
                       "shot " + std::to_string(i + 1) + " references undeclared character '" + ref + "'"});
      }
    }
  }
  return out;
}

ScenePlan resolve_characters(ScenePlan plan) {
  for (auto& shot : plan.shots) {
    shot.referenced_characters.clear();
    for (const auto& c : plan.characters) {
      if (contains_whole_word(shot.description, c.name)) shot.referenced_characters.push_back(c.name);
    }
  }
  return plan;
}

namespace {

std::string join_issue_messages(const std::vector<ParseIssue>& issues) {
  std::string msg = "script parse failed:";
  for (const auto& issue : issues) {
    msg += " [" + std::string(to_string(issue.code));
    if (issue.line > 0) msg += " line " + std::to_string(issue.line);
    msg += "] " + issue.message + ";";
  }
  return msg;
}

Errc first_code(const std::vector<ParseIssue>& issues) {
  return issues.empty() ? Errc::InvalidPlan : issues.front().code;
}

std::string join_violations(const std::vector<Violation>& violations) {
  std::string msg = "invalid plan:";
  for (const auto& v : violations) msg += " " + v.to_string() + ";";
  return msg;
}

}  // namespace

ScriptParseError::ScriptParseError(std::vector<ParseIssue> issues)
    : Error(first_code(issues), join_issue_messages(issues)), issues_(std::move(issues)) {}

InvalidPlanError::InvalidPlanError(std::vector<Violation> violations)
    : Error(Errc::InvalidPlan, join_violations(violations)), violations_(std::move(violations)) {}

ScenePlan parse_script(std::string_view text) {
  enum class Section { None, Scene, Setting, Character, Shot };

  ScenePlan plan;
  std::vector<ParseIssue> issues;
  bool saw_scene = false;
  bool saw_setting = false;
  std::set<std::string> declared;

  Section current = Section::None;
  std::string body;
  bool after_blank = false;

  auto flush = [&] {
    const std::string value = normalize_text(body);
    switch (current) {
      case Section::Scene: plan.scene_description = value; break;
      case Section::Setting: plan.setting = value; break;
      case Section::Character: plan.characters.back().appearance = value; break;
      case Section::Shot: plan.shots.back().description = value; break;
      case Section::None: break;
    }
    body.clear();
  };

  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const int lineno = static_cast<int>(i) + 1;
    std::smatch m;

    if (std::regex_match(line, m, scene_header())) {
      flush();
      if (saw_scene) issues.push_back({Errc::DuplicateSection, lineno, "second SCENE section"});
      saw_scene = true;
      current = Section::Scene;
      body = m[1].str();
    } else if (std::regex_match(line, m, setting_header())) {
      flush();
      if (saw_setting) issues.push_back({Errc::DuplicateSection, lineno, "second SETTING section"});
      saw_setting = true;
      current = Section::Setting;
      body = m[1].str();
    } else if (std::regex_match(line, m, character_header())) {
      flush();
      std::string name(strip(m[1].str()));
      if (!declared.insert(name).second) {
        issues.push_back({Errc::DuplicateCharacter, lineno, "character '" + name + "' declared twice"});
      }
      plan.characters.push_back({std::move(name), {}});
      current = Section::Character;
      body = m[2].str();
    } else if (std::regex_match(line, m, shot_header())) {
      flush();
      const std::string index_text = m[1].str();
      const std::string size_text = m[2].str();
      const int expected = static_cast<int>(plan.shots.size()) + 1;
      int index = -1;
      if (index_text.size() <= 6) index = std::stoi(index_text);
      if (index != expected) {
        issues.push_back({Errc::NonContiguousShotIndices, lineno,
                          "expected SHOT " + std::to_string(expected) + ", found SHOT " + index_text});
      }
      auto size = shot_size_from_token(size_text);
      if (!size) {
        issues.push_back({Errc::UnknownShotSize, lineno,
                          "unknown shot size '" + size_text + "' (expected close-up, medium or wide)"});
      }
      plan.shots.push_back({expected, size.value_or(ShotSize::Medium), {}, {}});
      current = Section::Shot;
      body = m[3].str();
    } else if (is_blank(line)) {
      if (current != Section::None) after_blank = true;
      continue;
    } else if (current != Section::None && !after_blank) {
      body += '\n';
      body += line;
      continue;
    } else {
      const bool trailing = current == Section::Shot;
      issues.push_back({Errc::StrayText, lineno,
                        trailing ? "unexpected text after the last shot" : "text outside any section"});
      continue;
    }
    after_blank = false;
  }
  flush();

  if (!saw_setting) issues.push_back({Errc::MissingSection, 0, "no SETTING section"});
  if (plan.shots.empty()) issues.push_back({Errc::MissingSection, 0, "no SHOT sections"});

  if (!issues.empty()) {
    // Report in line order; section-level issues last.
    std::stable_sort(issues.begin(), issues.end(), [](const ParseIssue& a, const ParseIssue& b) {
      const int la = a.line == 0 ? 1 << 30 : a.line;
      const int lb = b.line == 0 ? 1 << 30 : b.line;
      return la < lb;
    });
    throw ScriptParseError(std::move(issues));
  }
  return resolve_characters(std::move(plan));
}

std::string serialize_script(const ScenePlan& plan) {
  auto violations = validate(plan);
  if (!violations.empty()) throw InvalidPlanError(std::move(violations));

  std::ostringstream out;
  auto header = [&](const std::string& head, const std::string& text) {
    out << head;
    if (!text.empty()) out << ' ' << text;
    out << '\n';
  };
  header("SCENE:", plan.scene_description);
  header("SETTING:", plan.setting);
  for (const auto& c : plan.characters) header("CHARACTER " + c.name + ":", c.appearance);
  for (const auto& s : plan.shots) {
    header("SHOT " + std::to_string(s.index) + " [" + std::string(to_token(s.size)) + "]:", s.description);
  }
  return std::move(out).str();
}

void to_json(nlohmann::json& j, const ScenePlan& plan) {
  j = nlohmann::json::object();
  j["scene_description"] = plan.scene_description;
  j["setting"] = plan.setting;
  j["characters"] = nlohmann::json::array();
  for (const auto& c : plan.characters) {
    j["characters"].push_back({{"name", c.name}, {"appearance", c.appearance}});
  }
  j["shots"] = nlohmann::json::array();
  for (const auto& s : plan.shots) {
    j["shots"].push_back({{"index", s.index},
                          {"size", std::string(to_token(s.size))},
                          {"description", s.description},
                          {"referenced_characters", s.referenced_characters}});
  }
}

void from_json(const nlohmann::json& j, ScenePlan& plan) {
  plan = {};
  plan.scene_description = j.value("scene_description", "");
  plan.setting = j.value("setting", "");
  for (const auto& c : j.value("characters", nlohmann::json::array())) {
    plan.characters.push_back({c.at("name").get<std::string>(), c.value("appearance", "")});
  }
  for (const auto& s : j.value("shots", nlohmann::json::array())) {
    ShotSpec shot;
    shot.index = s.at("index").get<int>();
    const std::string token = s.at("size").get<std::string>();
    auto size = shot_size_from_token(token);
    if (!size) throw Error(Errc::UnknownShotSize, "unknown shot size '" + token + "'");
    shot.size = *size;
    shot.description = s.value("description", "");
    if (s.contains("referenced_characters")) {
      shot.referenced_characters = s.at("referenced_characters").get<std::vector<std::string>>();
    }
    plan.shots.push_back(std::move(shot));
  }
}

void to_json(nlohmann::json& j, const Violation& v) {
  j = {{"kind", std::string(to_string(v.kind))}, {"field", v.field}, {"detail", v.detail}};
}

nlohmann::json violations_json(const std::vector<Violation>& violations) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : violations) arr.push_back(v);
  return arr;
}

}  // namespace storyframe
