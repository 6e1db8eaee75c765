#include <doctest.h>

#include <functional>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "random_plan.hpp"
#include "storyframe/dataset.hpp"
#include "storyframe/error.hpp"
#include "storyframe/generation.hpp"
#include "storyframe/resources.hpp"

using namespace storyframe;

namespace {

SceneRecord record_with(int shots, const std::string& id) {
  SceneRecord r;
  r.movie_id = "m1";
  r.scene_id = id;
  for (int k = 0; k < shots; ++k) r.keyframes.push_back(id + "_" + std::to_string(k) + ".png");
  r.scene_description = "Scene " + id;
  return r;
}

std::vector<SceneRecord> records_with_counts(const std::vector<int>& counts) {
  std::vector<SceneRecord> out;
  for (std::size_t i = 0; i < counts.size(); ++i) out.push_back(record_with(counts[i], "s" + std::to_string(i)));
  return out;
}

std::vector<int> counts_of(const std::vector<SceneRecord>& records) {
  std::vector<int> out;
  for (const auto& r : records) out.push_back(r.shot_count());
  return out;
}

// Smallest achievable max/min over non-empty buckets, by exhaustive search.
double best_ratio(const std::map<int, int>& supply, int target) {
  std::vector<int> s;
  for (const auto& [b, c] : supply) {
    if (c > 0) s.push_back(c);
  }
  double best = 1e18;
  std::vector<int> alloc(s.size());
  std::function<void(std::size_t, int)> go = [&](std::size_t i, int left) {
    if (i == s.size()) {
      if (left != 0) return;
      const auto [lo, hi] = std::minmax_element(alloc.begin(), alloc.end());
      best = std::min(best, static_cast<double>(*hi) / *lo);
      return;
    }
    for (int a = 1; a <= s[i] && a <= left; ++a) {
      alloc[i] = a;
      go(i + 1, left - a);
    }
  };
  go(0, target);
  return best;
}

class StubClassifier : public ShotSizeClassifier {
 public:
  explicit StubClassifier(std::string label) : label_(std::move(label)) {}
  std::string classify(const Image&) override { return label_; }

 private:
  std::string label_;
};

const std::string kOriginal = "Mary Jane finds him there and confesses her love for him.";
const std::string kRefined = "Mary Jane Watson finds Peter Parker at Uncle Ben's grave and confesses her love for him.";

}  // namespace

TEST_CASE("multi-shot filter") {
  CHECK(counts_of(filter_multishot(records_with_counts({1, 3, 12, 5}), 2, 10)) == std::vector<int>{3, 5});
  CHECK(filter_multishot({}).empty());
  Rng rng(3);
  std::vector<int> counts;
  for (int i = 0; i < 100; ++i) counts.push_back(1 + static_cast<int>(rng.below(15)));
  const auto records = records_with_counts(counts);
  const auto kept = filter_multishot(records, 3, 10);
  CHECK(kept.size() == static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(),
                                                              [](int c) { return c >= 3 && c <= 10; })));
  CHECK(filter_multishot(kept, 3, 10) == kept);
}

TEST_CASE("abundant supply balances to exact quotas") {
  std::vector<int> counts;
  for (int n = 1; n <= 14; ++n) {
    for (int i = 0; i < 150; ++i) counts.push_back(n);
  }
  const auto records = records_with_counts(counts);
  const auto picked = balance_by_shot_count(records, 800, 5);
  CHECK(picked.size() == 800);
  const auto h = shot_count_histogram(picked);
  CHECK(h.size() == 8);
  for (int n = 3; n <= 10; ++n) CHECK(h.at(n) == 100);
  CHECK(picked == balance_by_shot_count(records, 800, 5));
  CHECK_FALSE(picked == balance_by_shot_count(records, 800, 6));
  // Output keeps input order.
  for (std::size_t i = 1; i < picked.size(); ++i) CHECK(std::stoi(picked[i - 1].scene_id.substr(1)) < std::stoi(picked[i].scene_id.substr(1)));
}

TEST_CASE("remainder goes to the lowest counts") {
  std::map<int, int> supply;
  for (int n = 3; n <= 10; ++n) supply[n] = 50;
  const auto a = balance_allocation(supply, 19);
  CHECK(a.at(3) == 3);
  CHECK(a.at(4) == 3);
  CHECK(a.at(5) == 3);
  for (int n = 6; n <= 10; ++n) CHECK(a.at(n) == 2);
}

TEST_CASE("skewed supply is at least as balanced as the brute-force optimum") {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    std::map<int, int> supply;
    int total = 0, non_empty = 0;
    for (int n = 3; n <= 10; ++n) {
      const int s = rng.coin() ? static_cast<int>(rng.below(3)) : static_cast<int>(rng.below(9));
      supply[n] = s;
      total += s;
      non_empty += s > 0 ? 1 : 0;
    }
    if (non_empty == 0) continue;
    const int target = non_empty + static_cast<int>(rng.below(static_cast<std::uint64_t>(total - non_empty + 1)));
    const auto alloc = balance_allocation(supply, target);
    int sum = 0, lo = 1 << 30, hi = 0;
    for (const auto& [b, a] : alloc) {
      CHECK(a <= supply[b]);
      sum += a;
      if (supply[b] > 0) {
        lo = std::min(lo, a);
        hi = std::max(hi, a);
      }
    }
    CHECK(sum == target);
    CHECK(static_cast<double>(hi) / lo <= best_ratio(supply, target) + 1e-12);
  }
}

TEST_CASE("max minus min is at most one when every bucket can meet its quota") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int target = 8 + static_cast<int>(rng.below(500));
    const int need = (target + 7) / 8;
    std::map<int, int> supply;
    for (int n = 3; n <= 10; ++n) supply[n] = need + static_cast<int>(rng.below(50));
    const auto alloc = balance_allocation(supply, target);
    int lo = 1 << 30, hi = 0;
    for (const auto& [b, a] : alloc) {
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("balance errors") {
  try {
    balance_by_shot_count(records_with_counts({3, 4, 5}), 10, 0);
    FAIL("should throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InsufficientSupply);
  }
  try {
    balance_by_shot_count(records_with_counts({3, 4, 5}), 2, 0);
    FAIL("should throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidArgument);
  }
  // Out-of-range counts are never chosen.
  const auto picked = balance_by_shot_count(records_with_counts({1, 2, 3, 11, 4}), 2, 0);
  CHECK(counts_of(picked) == std::vector<int>{3, 4});
}

TEST_CASE("co-reference prompt") {
  const std::string plot = "Peter Parker mourns at Uncle Ben's grave. Mary Jane Watson follows him.";
  const auto m = build_coref_prompt(kOriginal, plot);
  REQUIRE(m.size() == 2);
  CHECK(m[0].content == resource(resources::kCorefInstruction).text);
  CHECK(m[1].content.find(kOriginal) != std::string::npos);
  CHECK(m[1].content.find(plot) != std::string::npos);
  CHECK(m == build_coref_prompt(kOriginal, plot));
  CHECK_THROWS_AS(build_coref_prompt("", plot), Error);
  CHECK_THROWS_AS(build_coref_prompt(kOriginal, ""), Error);
}

TEST_CASE("refinement keeps the original") {
  SceneRecord r = record_with(3, "spider");
  r.scene_description = kOriginal;
  const auto once = apply_refinement(r, kRefined);
  CHECK(once.scene_description == kRefined);
  CHECK(once.original_description == kOriginal);
  CHECK(apply_refinement(once, kRefined) == once);
  const auto same = apply_refinement(r, kOriginal);
  SceneRecord expected = r;
  expected.original_description = kOriginal;
  CHECK(same == expected);
  CHECK_THROWS_AS(apply_refinement(r, ""), Error);
  const auto j = nlohmann::json(once);
  CHECK(j["provenance"]["original_description"] == kOriginal);
  CHECK(j.get<SceneRecord>() == once);
}

TEST_CASE("portrait crops") {
  Rng rng(6);
  const Image frame = testing::noise_image(40, 30, rng);
  CHECK(crop_portrait(frame, {0, 0, 40, 30}) == frame);
  const Image px = crop_portrait(frame, {0, 0, 1, 1});
  CHECK(px.at(0, 0) == frame.at(0, 0));
  for (int t = 0; t < 50; ++t) {
    const int w = 1 + static_cast<int>(rng.below(40)), h = 1 + static_cast<int>(rng.below(30));
    const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(41 - w)));
    const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(31 - h)));
    Image copy(40, 30, kBlack);
    copy.paste(frame, 0, 0);
    Image blank(w, h, kWhite);
    copy.paste(blank, x, y);
    copy.paste(crop_portrait(frame, {x, y, w, h}), x, y);
    CHECK(copy == frame);
  }
  try {
    crop_portrait(frame, {0, 0, 0, 5});
    FAIL("should throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyBox);
  }
  try {
    crop_portrait(frame, {35, 0, 10, 5});
    FAIL("should throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::OutOfBounds);
  }
  CHECK_THROWS_AS(crop_portrait(frame, {-1, 0, 2, 2}), Error);
}

TEST_CASE("portrait selection keeps the three largest") {
  SceneRecord r = record_with(5, "p");
  const int areas[5] = {10, 50, 30, 50, 20};
  for (int k = 0; k < 5; ++k) r.annotations.push_back({{"Ann", {0, 0, areas[k], 1}}, {"Bo", {0, 0, 1, 1}}});
  const auto sel = select_portraits(r);
  REQUIRE(sel.at("Ann").size() == 3);
  CHECK(sel.at("Ann")[0].frame_index == 1);
  CHECK(sel.at("Ann")[1].frame_index == 3);
  CHECK(sel.at("Ann")[2].frame_index == 2);
  CHECK(sel.at("Bo").size() == 3);
  CHECK(sel.at("Bo")[0].frame_index == 0);
}

TEST_CASE("attribute prompts") {
  const SceneRecord r = record_with(4, "q");
  const std::map<std::string, std::vector<std::string>> portraits{
      {"Ann", {"a1", "a2", "a3", "a4", "a5"}}, {"Bo", {"b1"}}};
  const auto p = build_attribute_prompts(r, portraits);
  CHECK(p.setting_prompt.back().attachments.size() == 4);
  CHECK(p.setting_prompt.front().content == resource(resources::kSettingInstruction).text);
  REQUIRE(p.shot_prompts.size() == 4);
  for (int k = 0; k < 4; ++k) {
    const auto& att = p.shot_prompts[static_cast<std::size_t>(k)].back().attachments;
    CHECK(att == std::vector<std::string>{r.keyframes[static_cast<std::size_t>(k)], "a1", "a2", "a3", "b1"});
  }
  CHECK(p.character_prompts.at("Ann").back().attachments.size() == 3);
  CHECK(p.character_prompts.at("Bo").back().attachments.size() == 1);
  const auto again = build_attribute_prompts(r, portraits);
  CHECK(again.setting_prompt == p.setting_prompt);
  CHECK(again.shot_prompts == p.shot_prompts);
  CHECK(again.character_prompts == p.character_prompts);
}

TEST_CASE("shot size labels") {
  const Image f(4, 4);
  StubClassifier wide("wide"), ecu("extreme close-up"), pan("pan"), messy("  Medium_Shot ");
  CHECK(label_shot_size(f, wide) == ShotSize::Wide);
  CHECK(label_shot_size(f, ecu) == ShotSize::CloseUp);
  CHECK(label_shot_size(f, messy) == ShotSize::Medium);
  try {
    label_shot_size(f, pan);
    FAIL("should throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownLabel);
  }
  CHECK(shot_size_table_version() == 1);
}

TEST_CASE("records jsonl round trip") {
  Rng rng(9);
  std::vector<SceneRecord> records;
  for (int i = 0; i < 20; ++i) {
    SceneRecord r = record_with(1 + static_cast<int>(rng.below(6)), "r" + std::to_string(i));
    if (rng.coin()) r.plot = testing::random_sentence(rng, {"Ann"});
    r.annotations.push_back({{"Ann", {1, 2, 3, 4}}});
    r.shot_sizes = {ShotSize::Wide, std::nullopt};
    if (rng.coin()) r.plan = testing::random_plan(rng);
    if (rng.coin()) r = apply_refinement(r, "refined " + std::to_string(i));
    records.push_back(r);
  }
  CHECK(parse_records_jsonl(records_to_jsonl(records)) == records);
  CHECK_THROWS_AS(parse_records_jsonl("{\"scene_id\": 3}\n"), Error);
}

TEST_CASE("export writes round-tripping sheets and a manifest") {
  const auto dir = testing::fresh_temp_dir("dataset_export");
  const LayoutSpec layout;
  Rng rng(10);
  std::vector<SceneRecord> records;
  std::map<std::string, std::vector<Image>> originals;
  for (int n : {4, 3, 5}) {
    SceneRecord r = record_with(n, "scene" + std::to_string(n));
    r.plan = make_synthetic_plan(n, static_cast<std::uint64_t>(n));
    for (int k = 0; k < n; ++k) {
      const Image f = testing::noise_image(300 + 20 * k, 180 + 10 * k, rng);
      write_png(dir / "in" / r.keyframes[static_cast<std::size_t>(k)], f);
      originals[r.scene_id].push_back(f);
    }
    records.push_back(r);
  }
  ExportOptions o;
  o.records_dir = dir / "in";
  o.output_dir = dir / "out";
  o.jobs = 3;
  const auto manifest = export_training_pairs(records, layout, o);
  REQUIRE(manifest.entries.size() == 3);
  CHECK(manifest.histogram == std::map<int, int>{{3, 1}, {4, 1}, {5, 1}});
  CHECK(manifest.entries[0].scene_id == "scene3");
  for (const auto& e : manifest.entries) {
    const Image sheet_img = read_png(o.output_dir / e.sheet_path);
    CHECK(sheet_img.height() == expected_sheet_height(e.shot_count, layout));
    const Sheet sheet{sheet_img, layout, std::nullopt};
    const auto frames = split_sheet(sheet, detect_borders_checker(sheet));
    const auto& src = originals.at(e.scene_id);
    const int width = uniform_target_width(src, layout);
    REQUIRE(frames.size() == src.size());
    for (std::size_t k = 0; k < src.size(); ++k) CHECK(frames[k] == normalize_frame(src[k], layout, width));
    CHECK(std::filesystem::exists(o.output_dir / "prompts" / (e.scene_id + ".txt")));
    CHECK(std::filesystem::exists(o.output_dir / "plans" / (e.scene_id + ".json")));
    CHECK(count_separator_tokens(e.prompt, "[SHOT-{k}]") == e.shot_count);
  }
  CHECK(read_manifest(o.output_dir / "manifest.json") == manifest);
  write_manifest(dir / "copy.json", manifest);
  CHECK(read_manifest(dir / "copy.json") == manifest);
  std::filesystem::remove_all(dir);
}

TEST_CASE("export preconditions") {
  ExportOptions o;
  o.output_dir = testing::fresh_temp_dir("dataset_export_bad");
  SceneRecord no_plan = record_with(3, "x");
  CHECK_THROWS_AS(export_training_pairs({no_plan}, LayoutSpec{}, o), Error);
  SceneRecord mismatch = record_with(3, "y");
  mismatch.plan = make_synthetic_plan(4, 0);
  try {
    export_training_pairs({mismatch}, LayoutSpec{}, o);
    FAIL("should throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::LengthMismatch);
  }
  std::filesystem::remove_all(o.output_dir);
}
