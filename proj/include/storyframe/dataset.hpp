#pragma once

// Dataset construction over user-supplied scene records.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "storyframe/chat.hpp"
#include "storyframe/image.hpp"
#include "storyframe/scene_script.hpp"
#include "storyframe/sheet_codec.hpp"

namespace storyframe {

struct BBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  long area() const { return static_cast<long>(w) * h; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

struct CharacterBox {
  std::string name;
  BBox bbox;
  friend bool operator==(const CharacterBox&, const CharacterBox&) = default;
};

struct SceneRecord {
  std::string movie_id;
  std::string scene_id;
  std::vector<std::string> keyframes;  // PNG paths, relative to the record directory
  std::string scene_description;
  std::optional<std::string> plot;
  // annotations[k] lists character boxes in keyframe k; may be shorter than keyframes.
  std::vector<std::vector<CharacterBox>> annotations;
  std::vector<std::optional<ShotSize>> shot_sizes;
  // Description before refinement; set once by apply_refinement.
  std::optional<std::string> original_description;
  std::optional<ScenePlan> plan;

  int shot_count() const { return static_cast<int>(keyframes.size()); }
  friend bool operator==(const SceneRecord&, const SceneRecord&) = default;
};

void to_json(nlohmann::json& j, const SceneRecord& record);
void from_json(const nlohmann::json& j, SceneRecord& record);

std::vector<SceneRecord> parse_records_jsonl(std::string_view text);
std::string records_to_jsonl(const std::vector<SceneRecord>& records);

// Import seam for corpora stored in other layouts.
class RecordSource {
 public:
  virtual ~RecordSource() = default;
  virtual std::vector<SceneRecord> load() = 0;
};

class JsonlRecordSource : public RecordSource {
 public:
  explicit JsonlRecordSource(std::filesystem::path path) : path_(std::move(path)) {}
  std::vector<SceneRecord> load() override;

 private:
  std::filesystem::path path_;
};

std::vector<SceneRecord> filter_multishot(const std::vector<SceneRecord>& records, int min_shots = 2,
                                          int max_shots = 10);

inline constexpr int kBalanceMinShots = 3;
inline constexpr int kBalanceMaxShots = 10;

// Per-bucket allocation for shot counts 3..10 given each bucket's supply.
// Quota floor(target / 8) with the remainder going to the lowest counts;
// capacity lost to short buckets is handed out one at a time to the bucket
// with surplus whose allocation is currently smallest.
std::map<int, int> balance_allocation(const std::map<int, int>& supply, int target_n);

// Selects target_n records (shot counts outside 3..10 are never chosen),
// sampled uniformly within buckets under rng_seed; output keeps input order.
std::vector<SceneRecord> balance_by_shot_count(const std::vector<SceneRecord>& records, int target_n,
                                               std::uint64_t rng_seed);

std::map<int, int> shot_count_histogram(const std::vector<SceneRecord>& records);

MessageList build_coref_prompt(const std::string& scene_description, const std::string& plot);

SceneRecord apply_refinement(SceneRecord record, const std::string& refined_text);

// Exact pixel crop. Throws EmptyBox or OutOfBounds.
Image crop_portrait(const Image& frame, const BBox& bbox);

inline constexpr std::size_t kMaxPortraitsPerCharacter = 3;

struct PortraitRef {
  int frame_index = 0;
  BBox bbox;
  friend bool operator==(const PortraitRef&, const PortraitRef&) = default;
};

// Up to three largest boxes per character name (ties keep the earlier frame).
std::map<std::string, std::vector<PortraitRef>> select_portraits(const SceneRecord& record);

struct AttributePrompts {
  MessageList setting_prompt;
  std::vector<MessageList> shot_prompts;
  std::map<std::string, MessageList> character_prompts;
};

// portraits maps character name to image refs; lists longer than three are
// truncated.
AttributePrompts build_attribute_prompts(const SceneRecord& record,
                                         const std::map<std::string, std::vector<std::string>>& portraits);

class ShotSizeClassifier {
 public:
  virtual ~ShotSizeClassifier() = default;
  virtual std::string classify(const Image& frame) = 0;
};

// Maps a free-form classifier label through the bundled table. Throws UnknownLabel.
ShotSize map_shot_size_label(std::string_view label);
int shot_size_table_version();

ShotSize label_shot_size(const Image& frame, ShotSizeClassifier& classifier);

struct ManifestEntry {
  std::string scene_id;
  int shot_count = 0;
  std::string sheet_path;  // relative to the output directory
  std::string prompt;
  ScenePlan plan;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  LayoutSpec layout;
  std::vector<ManifestEntry> entries;
  std::map<int, int> histogram;
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

void to_json(nlohmann::json& j, const DatasetManifest& manifest);
void from_json(const nlohmann::json& j, DatasetManifest& manifest);

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

struct ExportOptions {
  std::filesystem::path records_dir;  // base for relative keyframe paths
  std::filesystem::path output_dir;
  std::string separator_template = "[SHOT-{k}]";
  int jobs = 1;
};

// Writes sheets/<scene>.png, prompts/<scene>.txt and plans/<scene>.json under
// output_dir plus manifest.json. Every record needs a plan whose shot count
// equals its keyframe count. Entries are ordered by scene_id.
DatasetManifest export_training_pairs(const std::vector<SceneRecord>& records, const LayoutSpec& layout,
                                      const ExportOptions& options);

}  // namespace storyframe
