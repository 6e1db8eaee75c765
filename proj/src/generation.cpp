#include "storyframe/generation.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "storyframe/error.hpp"
#include "storyframe/rng.hpp"

namespace storyframe {

namespace {

// Single-line form of a field, without a trailing period.
std::string inline_text(const std::string& text) {
  std::string out;
  for (char c : text) out += (c == '\n' || c == '\r') ? ' ' : c;
  while (!out.empty() && (out.back() == '.' || out.back() == ' ')) out.pop_back();
  return out;
}

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t count = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + 1)) ++count;
  return count;
}

}  // namespace

std::string render_separator(std::string_view separator_template, int k) {
  std::string out(separator_template);
  const auto pos = out.find("{k}");
  if (pos == std::string::npos) throw Error(Errc::InvalidArgument, "separator template lacks {k}");
  out.replace(pos, 3, std::to_string(k));
  return out;
}

GenerationPrompt build_generation_prompt(const ScenePlan& plan, std::string_view separator_template) {
  auto violations = validate(plan);
  if (!violations.empty()) throw InvalidPlanError(std::move(violations));

  const int n = static_cast<int>(plan.shots.size());
  std::string text = std::to_string(n) + "-shot cinematic scene. Setting: " + inline_text(plan.setting) +
                     ". Characters: ";
  if (plan.characters.empty()) {
    text += "none";
  } else {
    for (std::size_t i = 0; i < plan.characters.size(); ++i) {
      if (i > 0) text += "; ";
      text += plan.characters[i].name + ": " + inline_text(plan.characters[i].appearance);
    }
  }
  text += ". ";
  for (const auto& shot : plan.shots) {
    text += render_separator(separator_template, shot.index) + " " + std::string(to_token(shot.size)) +
            " shot: " + inline_text(shot.description) + ". ";
  }
  text.pop_back();

  for (int k = 1; k <= n + 1; ++k) {
    const std::size_t expected = k <= n ? 1 : 0;
    if (count_occurrences(text, render_separator(separator_template, k)) != expected) {
      throw InvalidPlanError({{ViolationKind::NonCanonicalText, "shots",
                               "plan text contains a separator token; prompt would be ambiguous"}});
    }
  }
  return {std::move(text), std::string(separator_template), n};
}

int count_separator_tokens(std::string_view text, std::string_view separator_template) {
  int k = 0;
  std::size_t pos = 0;
  while (true) {
    const auto found = text.find(render_separator(separator_template, k + 1), pos);
    if (found == std::string_view::npos) return k;
    pos = found + 1;
    ++k;
  }
}

std::vector<std::string> split_prompt_shots(const GenerationPrompt& prompt) {
  std::vector<std::string> shots;
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // token start, token end
  std::size_t pos = 0;
  for (int k = 1; k <= prompt.shot_count; ++k) {
    const std::string token = render_separator(prompt.separator_token_template, k);
    const auto found = prompt.text.find(token, pos);
    if (found == std::string::npos) {
      throw Error(Errc::InvalidArgument, "prompt is missing separator " + token);
    }
    spans.emplace_back(found, found + token.size());
    pos = found + token.size();
  }
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const std::size_t begin = spans[i].second;
    const std::size_t end = i + 1 < spans.size() ? spans[i + 1].first : prompt.text.size();
    std::string_view s(prompt.text.data() + begin, end - begin);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    shots.emplace_back(s);
  }
  return shots;
}

std::pair<int, int> target_dimensions(const ScenePlan& plan, const LayoutSpec& layout, int base_width) {
  layout.check();
  if (base_width <= 0 || base_width % layout.width_multiple != 0) {
    throw Error(Errc::InvalidWidth, "base width " + std::to_string(base_width) +
                                        " is not a positive multiple of " + std::to_string(layout.width_multiple));
  }
  const int n = static_cast<int>(plan.shots.size());
  if (n < 1) throw InvalidPlanError({{ViolationKind::EmptyShotList, "shots", "plan has no shots"}});
  return {base_width, expected_sheet_height(n, layout)};
}

void to_json(nlohmann::json& j, const FaultConfig& f) {
  j = {{"missing_border_rate", f.missing_border_rate},
       {"crop_first_rate", f.crop_first_rate},
       {"crop_last_rate", f.crop_last_rate},
       {"rng_seed", f.rng_seed},
       {"kill_borders", f.kill_borders}};
}

void from_json(const nlohmann::json& j, FaultConfig& f) {
  f = {};
  f.missing_border_rate = j.value("missing_border_rate", 0.0);
  f.crop_first_rate = j.value("crop_first_rate", 0.0);
  f.crop_last_rate = j.value("crop_last_rate", 0.0);
  f.rng_seed = j.value("rng_seed", std::uint64_t{0});
  f.kill_borders = j.value("kill_borders", std::vector<int>{});
  for (double rate : {f.missing_border_rate, f.crop_first_rate, f.crop_last_rate}) {
    if (rate < 0.0 || rate > 1.0) throw Error(Errc::InvalidArgument, "fault rates must lie in [0, 1]");
  }
}

Rgb shot_fill_color(std::string_view shot_text, std::uint64_t seed) {
  const std::uint64_t h = mix64(fnv1a64(shot_text) ^ mix64(seed));
  return {static_cast<std::uint8_t>(h >> 16), static_cast<std::uint8_t>(h >> 8), static_cast<std::uint8_t>(h)};
}

namespace {

// Fills rows [top, top + rows) with `color` plus deterministic luma texture.
void fill_textured(Image& img, int top, int rows, Rgb color, int amplitude, std::uint64_t salt) {
  const int w = img.width();
  for (int y = top; y < top + rows; ++y) {
    auto row = img.row(y);
    for (int x = 0; x < w; ++x) {
      int delta = 0;
      if (amplitude > 0) {
        const std::uint64_t h =
            mix64(salt ^ (static_cast<std::uint64_t>(y) << 32) ^ static_cast<std::uint64_t>(x));
        delta = static_cast<int>(h % static_cast<std::uint64_t>(2 * amplitude + 1)) - amplitude;
      }
      std::uint8_t* p = &row[static_cast<std::size_t>(x) * 3];
      p[0] = static_cast<std::uint8_t>(std::clamp(color.r + delta, 0, 255));
      p[1] = static_cast<std::uint8_t>(std::clamp(color.g + delta, 0, 255));
      p[2] = static_cast<std::uint8_t>(std::clamp(color.b + delta, 0, 255));
    }
  }
}

// Moves the content of a frame by `shift` rows (negative = up), exposing black.
void shift_frame(Image& img, int top, int rows, int shift) {
  const Image original = img.rows(top, rows);
  const Image black(img.width(), rows, kBlack);
  img.paste(black, 0, top);
  for (int y = 0; y < rows; ++y) {
    const int src = y - shift;
    if (src < 0 || src >= rows) continue;
    auto from = original.row(src);
    std::copy(from.begin(), from.end(), img.row(top + y).begin());
  }
}

}  // namespace

Image mock_render(const GenerationPrompt& prompt, int width, int height, std::uint64_t seed,
                  const FaultConfig& faults, const LayoutSpec& layout, const MockRenderOptions& options) {
  layout.check();
  const int n = prompt.shot_count;
  if (n < 1) throw Error(Errc::InvalidArgument, "prompt has no shots");
  const int fh = layout.frame_height;
  const int gap = options.bordered ? layout.border_thickness : 0;
  const int expected = n * fh + (n - 1) * gap;
  if (height != expected) {
    throw Error(Errc::HeightMismatch, "requested height " + std::to_string(height) + " but a " +
                                          std::to_string(n) + "-shot sheet needs " + std::to_string(expected));
  }
  if (width <= 0) throw Error(Errc::InvalidWidth, "width must be positive");

  const auto shots = split_prompt_shots(prompt);
  Image img(width, height);
  std::vector<Rgb> colors;
  for (int k = 0; k < n; ++k) {
    colors.push_back(shot_fill_color(shots[static_cast<std::size_t>(k)], seed));
    const std::uint64_t salt = mix64(seed ^ mix64(static_cast<std::uint64_t>(k) + 1));
    fill_textured(img, k * (fh + gap), fh, colors.back(), options.texture_amplitude, salt);
  }
  if (!options.bordered) return img;

  Rng rng(faults.rng_seed ^ mix64(seed) ^ fnv1a64(prompt.text));
  const Image band = render_border(width, layout);
  for (int b = 1; b < n; ++b) {
    const int top = b * fh + (b - 1) * gap;
    const bool forced = std::find(faults.kill_borders.begin(), faults.kill_borders.end(), b) !=
                        faults.kill_borders.end();
    const bool random_kill = rng.unit() < faults.missing_border_rate;
    if (forced || random_kill) {
      // Missing border: the frame above bleeds into the band.
      const std::uint64_t salt = mix64(seed ^ mix64(static_cast<std::uint64_t>(b - 1) + 1));
      fill_textured(img, top, gap, colors[static_cast<std::size_t>(b - 1)], options.texture_amplitude, salt);
    } else {
      img.paste(band, 0, top);
    }
  }
  const int crop = fh / 3;
  if (rng.unit() < faults.crop_first_rate) shift_frame(img, 0, fh, -crop);
  if (rng.unit() < faults.crop_last_rate) shift_frame(img, (n - 1) * (fh + gap), fh, crop);
  return img;
}

Image MockImageGenBackend::generate(const std::string& prompt, int width, int height, std::uint64_t seed) {
  GenerationPrompt parsed{prompt, separator_template_, count_separator_tokens(prompt, separator_template_)};
  return mock_render(parsed, width, height, seed, faults_, layout_, options_);
}

GenerationResult generate_keyframes(const ScenePlan& plan, ImageGenBackend& backend, std::uint64_t seed,
                                    const GenerationOptions& options) {
  GenerationPrompt prompt = build_generation_prompt(plan, options.separator_template);
  const auto [width, height] = target_dimensions(plan, options.layout, options.base_width);
  Image image = backend.generate(prompt.text, width, height, seed);
  if (image.width() != width || image.height() != height) {
    throw Error(Errc::DimensionViolation,
                "backend returned " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                    ", requested " + std::to_string(width) + "x" + std::to_string(height));
  }
  GenerationResult result{Sheet{std::move(image), options.layout, prompt.shot_count}, {}, plan, {}, false, seed,
                          std::move(prompt)};
  result.boundary = detect_borders_checker(result.sheet, options.detector);
  result.frames = split_sheet(result.sheet, result.boundary);
  result.count_ok = result.frames.size() == plan.shots.size();
  return result;
}

ScenePlan make_synthetic_plan(int n, std::uint64_t seed) {
  static const char* kNames[] = {"Ada", "Bruno", "Chiara", "Dmitri", "Esme", "Farid", "Greta", "Hugo"};
  static const char* kActions[] = {"walks toward the window", "turns to face the door", "sits at the table",
                                   "picks up a letter",       "laughs quietly",         "stares into the distance",
                                   "runs across the square",  "lights a candle"};
  Rng rng(mix64(seed) ^ static_cast<std::uint64_t>(n));
  ScenePlan plan;
  const int cast = 1 + static_cast<int>(rng.below(3));
  std::vector<std::string> names;
  for (int i = 0; i < cast; ++i) {
    std::string name = kNames[(seed + static_cast<std::uint64_t>(i) * 3) % 8];
    if (std::find(names.begin(), names.end(), name) != names.end()) continue;
    names.push_back(name);
    plan.characters.push_back({name, "outfit variant " + std::to_string(rng.below(1000))});
  }
  plan.scene_description = "Synthetic scene " + std::to_string(seed) + " with " + std::to_string(n) + " shots.";
  plan.setting = "A test stage, variant " + std::to_string(rng.below(100000));
  for (int k = 1; k <= n; ++k) {
    ShotSpec shot;
    shot.index = k;
    shot.size = kAllShotSizes[rng.below(3)];
    shot.description = names[rng.below(names.size())] + " " + kActions[rng.below(8)] + " (beat " +
                       std::to_string(k) + ", take " + std::to_string(seed) + ")";
    plan.shots.push_back(std::move(shot));
  }
  return resolve_characters(std::move(plan));
}

nlohmann::json result_summary_json(const GenerationResult& result) {
  return {{"shot_count", static_cast<int>(result.plan.shots.size())},
          {"frame_count", static_cast<int>(result.frames.size())},
          {"count_ok", result.count_ok},
          {"seed", result.seed},
          {"width", result.sheet.image.width()},
          {"height", result.sheet.image.height()},
          {"boundary", result.boundary},
          {"prompt", result.prompt.text}};
}

}  // namespace storyframe
