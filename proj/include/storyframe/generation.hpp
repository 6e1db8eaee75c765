#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "storyframe/scene_script.hpp"
#include "storyframe/sheet_codec.hpp"

namespace storyframe {

inline constexpr std::string_view kDefaultSeparatorTemplate = "[SHOT-{k}]";
inline constexpr int kDefaultBaseWidth = 464;

struct GenerationPrompt {
  std::string text;
  std::string separator_token_template{kDefaultSeparatorTemplate};
  int shot_count = 0;
};

// Replaces "{k}" in the template with k.
std::string render_separator(std::string_view separator_template, int k);

GenerationPrompt build_generation_prompt(const ScenePlan& plan,
                                         std::string_view separator_template = kDefaultSeparatorTemplate);

// Per-shot text following each rendered separator token, trimmed.
std::vector<std::string> split_prompt_shots(const GenerationPrompt& prompt);

// Counts consecutive tokens [1], [2], ... present in text.
int count_separator_tokens(std::string_view text, std::string_view separator_template);

std::pair<int, int> target_dimensions(const ScenePlan& plan, const LayoutSpec& layout, int base_width);

// Seam to a text-to-image model that renders a whole sheet in one call.
class ImageGenBackend {
 public:
  virtual ~ImageGenBackend() = default;
  virtual Image generate(const std::string& prompt, int width, int height, std::uint64_t seed) = 0;
  virtual int max_concurrency() const { return 1; }
};

struct FaultConfig {
  double missing_border_rate = 0.0;
  double crop_first_rate = 0.0;
  double crop_last_rate = 0.0;
  std::uint64_t rng_seed = 0;
  // 1-based border indices always overwritten, on top of the random rate.
  std::vector<int> kill_borders;
};

void to_json(nlohmann::json& j, const FaultConfig& f);
void from_json(const nlohmann::json& j, FaultConfig& f);

struct MockRenderOptions {
  // Borderless sheets stack frames directly, like the unmodified baseline.
  bool bordered = true;
  // Per-pixel luma texture added to the flat frame colors.
  int texture_amplitude = 6;
};

inline constexpr int kHeavyTextureAmplitude = 64;

// Stable 24-bit color for a shot.
Rgb shot_fill_color(std::string_view shot_text, std::uint64_t seed);

Image mock_render(const GenerationPrompt& prompt, int width, int height, std::uint64_t seed,
                  const FaultConfig& faults, const LayoutSpec& layout = {},
                  const MockRenderOptions& options = {});

class MockImageGenBackend : public ImageGenBackend {
 public:
  MockImageGenBackend(LayoutSpec layout = {}, FaultConfig faults = {}, MockRenderOptions options = {},
                      std::string separator_template = std::string(kDefaultSeparatorTemplate))
      : layout_(layout),
        faults_(std::move(faults)),
        options_(options),
        separator_template_(std::move(separator_template)) {}

  Image generate(const std::string& prompt, int width, int height, std::uint64_t seed) override;
  int max_concurrency() const override { return 64; }

 private:
  LayoutSpec layout_;
  FaultConfig faults_;
  MockRenderOptions options_;
  std::string separator_template_;
};

struct GenerationResult {
  Sheet sheet;
  std::vector<Image> frames;
  ScenePlan plan;
  BoundaryReport boundary;
  bool count_ok = false;
  std::uint64_t seed = 0;
  GenerationPrompt prompt;
};

struct GenerationOptions {
  LayoutSpec layout{};
  int base_width = kDefaultBaseWidth;
  std::string separator_template{kDefaultSeparatorTemplate};
  DetectorParams detector{};
};

// One backend call per scene. A shot-count mismatch is reported through
// count_ok, never thrown.
GenerationResult generate_keyframes(const ScenePlan& plan, ImageGenBackend& backend, std::uint64_t seed,
                                    const GenerationOptions& options = {});

// A valid n-shot plan with distinct shot texts; used by benchmarks and tests.
ScenePlan make_synthetic_plan(int n, std::uint64_t seed);

nlohmann::json result_summary_json(const GenerationResult& result);

}  // namespace storyframe
