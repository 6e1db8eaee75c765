#include "storyframe/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

#include "storyframe/error.hpp"
#include "storyframe/fs_util.hpp"
#include "storyframe/generation.hpp"
#include "storyframe/parallel.hpp"
#include "storyframe/resources.hpp"
#include "storyframe/rng.hpp"

namespace storyframe {

void to_json(nlohmann::json& j, const SceneRecord& r) {
  j = nlohmann::json::object();
  j["movie_id"] = r.movie_id;
  j["scene_id"] = r.scene_id;
  j["keyframes"] = r.keyframes;
  j["scene_description"] = r.scene_description;
  j["plot"] = r.plot ? nlohmann::json(*r.plot) : nlohmann::json(nullptr);
  auto& ann = j["annotations"] = nlohmann::json::array();
  for (const auto& frame : r.annotations) {
    auto boxes = nlohmann::json::array();
    for (const auto& c : frame) {
      boxes.push_back({{"name", c.name}, {"bbox", {c.bbox.x, c.bbox.y, c.bbox.w, c.bbox.h}}});
    }
    ann.push_back(std::move(boxes));
  }
  auto& sizes = j["shot_sizes"] = nlohmann::json::array();
  for (const auto& s : r.shot_sizes) sizes.push_back(s ? nlohmann::json(to_token(*s)) : nlohmann::json(nullptr));
  j["provenance"] = nlohmann::json::object();
  if (r.original_description) j["provenance"]["original_description"] = *r.original_description;
  if (r.plan) j["plan"] = *r.plan;
}

void from_json(const nlohmann::json& j, SceneRecord& r) {
  r = {};
  r.movie_id = j.value("movie_id", "");
  r.scene_id = j.at("scene_id").get<std::string>();
  r.keyframes = j.at("keyframes").get<std::vector<std::string>>();
  r.scene_description = j.value("scene_description", "");
  if (j.contains("plot") && j["plot"].is_string()) r.plot = j["plot"].get<std::string>();
  if (j.contains("annotations")) {
    for (const auto& frame : j["annotations"]) {
      std::vector<CharacterBox> boxes;
      for (const auto& c : frame) {
        const auto& b = c.at("bbox");
        boxes.push_back({c.at("name").get<std::string>(),
                         {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()}});
      }
      r.annotations.push_back(std::move(boxes));
    }
  }
  if (j.contains("shot_sizes")) {
    for (const auto& s : j["shot_sizes"]) {
      if (s.is_null()) {
        r.shot_sizes.emplace_back();
        continue;
      }
      const auto size = shot_size_from_token(s.get<std::string>());
      if (!size) throw Error(Errc::UnknownShotSize, "unknown shot size " + s.dump());
      r.shot_sizes.push_back(size);
    }
  }
  if (j.contains("provenance") && j["provenance"].contains("original_description")) {
    r.original_description = j["provenance"]["original_description"].get<std::string>();
  }
  if (j.contains("plan") && !j["plan"].is_null()) r.plan = j["plan"].get<ScenePlan>();
}

std::vector<SceneRecord> parse_records_jsonl(std::string_view text) {
  std::vector<SceneRecord> out;
  std::size_t start = 0;
  int line_no = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<SceneRecord>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::InvalidArgument, "record line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string records_to_jsonl(const std::vector<SceneRecord>& records) {
  std::string out;
  for (const auto& r : records) out += nlohmann::json(r).dump() + "\n";
  return out;
}

std::vector<SceneRecord> JsonlRecordSource::load() { return parse_records_jsonl(read_file(path_)); }

std::vector<SceneRecord> filter_multishot(const std::vector<SceneRecord>& records, int min_shots, int max_shots) {
  std::vector<SceneRecord> out;
  for (const auto& r : records) {
    if (r.shot_count() >= min_shots && r.shot_count() <= max_shots) out.push_back(r);
  }
  return out;
}

std::map<int, int> shot_count_histogram(const std::vector<SceneRecord>& records) {
  std::map<int, int> h;
  for (const auto& r : records) ++h[r.shot_count()];
  return h;
}

std::map<int, int> balance_allocation(const std::map<int, int>& supply, int target_n) {
  constexpr int kBuckets = kBalanceMaxShots - kBalanceMinShots + 1;
  int available = 0;
  int non_empty = 0;
  for (int b = kBalanceMinShots; b <= kBalanceMaxShots; ++b) {
    const auto it = supply.find(b);
    const int s = it == supply.end() ? 0 : it->second;
    available += s;
    non_empty += s > 0 ? 1 : 0;
  }
  if (target_n < non_empty) {
    throw Error(Errc::InvalidArgument, "target " + std::to_string(target_n) + " is below the " +
                                           std::to_string(non_empty) + " non-empty buckets");
  }
  if (available < target_n) {
    throw Error(Errc::InsufficientSupply, "only " + std::to_string(available) + " records with 3-10 shots for target " +
                                              std::to_string(target_n));
  }
  std::map<int, int> alloc;
  int given = 0;
  for (int b = kBalanceMinShots; b <= kBalanceMaxShots; ++b) {
    const int quota = target_n / kBuckets + (b - kBalanceMinShots < target_n % kBuckets ? 1 : 0);
    const auto it = supply.find(b);
    alloc[b] = std::min(quota, it == supply.end() ? 0 : it->second);
    given += alloc[b];
  }
  for (; given < target_n; ++given) {
    int best = -1;
    for (int b = kBalanceMinShots; b <= kBalanceMaxShots; ++b) {
      const auto it = supply.find(b);
      if (it == supply.end() || it->second <= alloc[b]) continue;
      if (best < 0 || alloc[b] < alloc[best]) best = b;
    }
    ++alloc[best];
  }
  return alloc;
}

std::vector<SceneRecord> balance_by_shot_count(const std::vector<SceneRecord>& records, int target_n,
                                               std::uint64_t rng_seed) {
  std::map<int, std::vector<std::size_t>> by_bucket;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const int n = records[i].shot_count();
    if (n >= kBalanceMinShots && n <= kBalanceMaxShots) by_bucket[n].push_back(i);
  }
  std::map<int, int> supply;
  for (const auto& [b, idx] : by_bucket) supply[b] = static_cast<int>(idx.size());
  const auto alloc = balance_allocation(supply, target_n);

  std::vector<bool> keep(records.size(), false);
  for (auto& [b, idx] : by_bucket) {
    Rng rng(mix64(rng_seed) ^ static_cast<std::uint64_t>(b));
    rng.shuffle(idx);
    const int take = alloc.at(b);
    for (int i = 0; i < take; ++i) keep[idx[static_cast<std::size_t>(i)]] = true;
  }
  std::vector<SceneRecord> out;
  out.reserve(static_cast<std::size_t>(target_n));
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (keep[i]) out.push_back(records[i]);
  }
  return out;
}

MessageList build_coref_prompt(const std::string& scene_description, const std::string& plot) {
  if (scene_description.empty() || plot.empty()) {
    throw Error(Errc::InvalidArgument, "refinement needs both a scene description and a plot");
  }
  return {{Role::System, std::string(resource(resources::kCorefInstruction).text), {}},
          {Role::User, "Plot:\n" + plot + "\n\nScene description:\n" + scene_description, {}}};
}

SceneRecord apply_refinement(SceneRecord record, const std::string& refined_text) {
  if (refined_text.empty()) throw Error(Errc::InvalidArgument, "refined description is empty");
  if (!record.original_description) record.original_description = record.scene_description;
  record.scene_description = refined_text;
  return record;
}

Image crop_portrait(const Image& frame, const BBox& bbox) {
  if (bbox.w <= 0 || bbox.h <= 0) throw Error(Errc::EmptyBox, "portrait box has no area");
  if (bbox.x < 0 || bbox.y < 0 || bbox.x + bbox.w > frame.width() || bbox.y + bbox.h > frame.height()) {
    throw Error(Errc::OutOfBounds, "portrait box (" + std::to_string(bbox.x) + "," + std::to_string(bbox.y) + "," +
                                       std::to_string(bbox.w) + "," + std::to_string(bbox.h) + ") exceeds " +
                                       std::to_string(frame.width()) + "x" + std::to_string(frame.height()));
  }
  Image out(bbox.w, bbox.h);
  for (int y = 0; y < bbox.h; ++y) {
    const auto src = frame.row(bbox.y + y).subspan(static_cast<std::size_t>(bbox.x) * 3,
                                                   static_cast<std::size_t>(bbox.w) * 3);
    std::copy(src.begin(), src.end(), out.row(y).begin());
  }
  return out;
}

std::map<std::string, std::vector<PortraitRef>> select_portraits(const SceneRecord& record) {
  std::map<std::string, std::vector<PortraitRef>> out;
  for (std::size_t k = 0; k < record.annotations.size(); ++k) {
    for (const auto& c : record.annotations[k]) out[c.name].push_back({static_cast<int>(k), c.bbox});
  }
  for (auto& [name, refs] : out) {
    std::stable_sort(refs.begin(), refs.end(),
                     [](const PortraitRef& a, const PortraitRef& b) { return a.bbox.area() > b.bbox.area(); });
    if (refs.size() > kMaxPortraitsPerCharacter) refs.resize(kMaxPortraitsPerCharacter);
  }
  return out;
}

AttributePrompts build_attribute_prompts(const SceneRecord& record,
                                         const std::map<std::string, std::vector<std::string>>& portraits) {
  std::map<std::string, std::vector<std::string>> kept;
  for (const auto& [name, refs] : portraits) {
    auto& v = kept[name];
    v.assign(refs.begin(), refs.begin() + static_cast<std::ptrdiff_t>(std::min(refs.size(), kMaxPortraitsPerCharacter)));
  }

  AttributePrompts out;
  const std::string setting(resource(resources::kSettingInstruction).text);
  const std::string shot(resource(resources::kShotInstruction).text);
  const std::string character(resource(resources::kCharacterInstruction).text);
  const int n = record.shot_count();

  out.setting_prompt = {{Role::System, setting, {}},
                        {Role::User, "Scene with " + std::to_string(n) + " keyframes.", record.keyframes}};

  for (int k = 0; k < n; ++k) {
    Message user{Role::User, "Keyframe " + std::to_string(k + 1) + " of " + std::to_string(n) + ".",
                 {record.keyframes[static_cast<std::size_t>(k)]}};
    int image_no = 2;
    for (const auto& [name, refs] : kept) {
      if (refs.empty()) continue;
      const int first = image_no;
      image_no += static_cast<int>(refs.size());
      user.content += "\nPortraits of " + name + ": images " + std::to_string(first) + "-" +
                      std::to_string(image_no - 1) + ".";
      user.attachments.insert(user.attachments.end(), refs.begin(), refs.end());
    }
    out.shot_prompts.push_back({{Role::System, shot, {}}, std::move(user)});
  }

  for (const auto& [name, refs] : kept) {
    out.character_prompts[name] = {{Role::System, character, {}}, {Role::User, "Character: " + name, refs}};
  }
  return out;
}

namespace {

struct LabelTable {
  int version = 0;
  std::map<std::string, ShotSize> labels;
};

const LabelTable& label_table() {
  static const LabelTable table = [] {
    LabelTable t;
    const auto j = nlohmann::json::parse(resource(resources::kShotSizeLabels).text);
    t.version = j.at("version").get<int>();
    for (const auto& [label, target] : j.at("labels").items()) {
      const auto size = shot_size_from_token(target.get<std::string>());
      if (!size) throw Error(Errc::UnknownLabel, "label table maps to unknown size " + target.dump());
      t.labels[label] = *size;
    }
    return t;
  }();
  return table;
}

}  // namespace

int shot_size_table_version() { return label_table().version; }

ShotSize map_shot_size_label(std::string_view label) {
  std::string key;
  for (char c : label) {
    key += c == '_' ? ' ' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  const auto b = key.find_first_not_of(" \t\r\n");
  const auto e = key.find_last_not_of(" \t\r\n");
  key = b == std::string::npos ? "" : key.substr(b, e - b + 1);
  const auto& labels = label_table().labels;
  const auto it = labels.find(key);
  if (it == labels.end()) throw Error(Errc::UnknownLabel, "no shot size mapping for label '" + std::string(label) + "'");
  return it->second;
}

ShotSize label_shot_size(const Image& frame, ShotSizeClassifier& classifier) {
  return map_shot_size_label(classifier.classify(frame));
}

void to_json(nlohmann::json& j, const DatasetManifest& m) {
  j = nlohmann::json::object();
  j["layout"] = m.layout;
  auto& entries = j["entries"] = nlohmann::json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"scene_id", e.scene_id},
                       {"shot_count", e.shot_count},
                       {"sheet_path", e.sheet_path},
                       {"prompt", e.prompt},
                       {"plan", e.plan}});
  }
  auto& hist = j["histogram"] = nlohmann::json::object();
  for (const auto& [n, c] : m.histogram) hist[std::to_string(n)] = c;
}

void from_json(const nlohmann::json& j, DatasetManifest& m) {
  m = {};
  m.layout = j.at("layout").get<LayoutSpec>();
  for (const auto& e : j.at("entries")) {
    m.entries.push_back({e.at("scene_id").get<std::string>(), e.at("shot_count").get<int>(),
                         e.at("sheet_path").get<std::string>(), e.at("prompt").get<std::string>(),
                         e.at("plan").get<ScenePlan>()});
  }
  for (const auto& [n, c] : j.at("histogram").items()) m.histogram[std::stoi(n)] = c.get<int>();
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file(path)).get<DatasetManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::DecodeError, path.string() + ": " + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  write_file_atomic(path, nlohmann::json(manifest).dump(2) + "\n");
}

namespace {

std::string file_stem_for(const std::string& scene_id) {
  std::string out;
  for (char c : scene_id) {
    out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_';
  }
  return out.empty() ? "_" : out;
}

}  // namespace

DatasetManifest export_training_pairs(const std::vector<SceneRecord>& records, const LayoutSpec& layout,
                                      const ExportOptions& options) {
  layout.check();
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!r.plan) throw Error(Errc::InvalidArgument, "record " + r.scene_id + " has no plan");
    if (r.plan->shots.size() != r.keyframes.size()) {
      throw Error(Errc::LengthMismatch, "record " + r.scene_id + " has " + std::to_string(r.keyframes.size()) +
                                            " keyframes but " + std::to_string(r.plan->shots.size()) + " shots");
    }
    if (r.keyframes.empty()) throw Error(Errc::EmptyFrameList, "record " + r.scene_id + " has no keyframes");
    if (!seen.insert(file_stem_for(r.scene_id)).second) {
      throw Error(Errc::InvalidArgument, "duplicate scene id " + r.scene_id);
    }
  }

  const auto& out_dir = options.output_dir;
  auto entries = parallel_map<ManifestEntry>(records.size(), options.jobs, [&](std::size_t i) {
    const SceneRecord& r = records[i];
    std::vector<Image> frames;
    for (const auto& kf : r.keyframes) frames.push_back(read_png(options.records_dir / kf));
    const int width = uniform_target_width(frames, layout);
    for (auto& f : frames) f = normalize_frame(f, layout, width);
    const Sheet sheet = compose_sheet(frames, layout);
    const auto prompt = build_generation_prompt(*r.plan, options.separator_template);

    const std::string stem = file_stem_for(r.scene_id);
    const std::string sheet_rel = "sheets/" + stem + ".png";
    write_png(out_dir / sheet_rel, sheet.image);
    write_file_atomic(out_dir / "prompts" / (stem + ".txt"), prompt.text + "\n");
    write_file_atomic(out_dir / "plans" / (stem + ".json"), nlohmann::json(*r.plan).dump(2) + "\n");
    return ManifestEntry{r.scene_id, r.shot_count(), sheet_rel, prompt.text, *r.plan};
  });
  std::stable_sort(entries.begin(), entries.end(),
                   [](const ManifestEntry& a, const ManifestEntry& b) { return a.scene_id < b.scene_id; });

  DatasetManifest manifest;
  manifest.layout = layout;
  for (const auto& e : entries) ++manifest.histogram[e.shot_count];
  manifest.entries = std::move(entries);
  write_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace storyframe
