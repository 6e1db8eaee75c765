#include <doctest.h>

#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "storyframe/error.hpp"
#include "storyframe/rng.hpp"
#include "storyframe/survey.hpp"

using namespace storyframe;

namespace {

std::vector<std::string> scene_ids(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("scene-" + std::to_string(i));
  return out;
}

const std::vector<StudyAspect> kAspects(std::begin(kAllStudyAspects), std::end(kAllStudyAspects));

}  // namespace

TEST_CASE("survey size and order") {
  const auto items = build_survey(scene_ids(200), {"ours", "base"}, kAspects, 9);
  REQUIRE(items.size() == 800);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < items.size(); ++i) {
    CHECK(items[i].scene_id == "scene-" + std::to_string(i / 4));
    CHECK(items[i].aspect == kAspects[i % 4]);
    CHECK(items[i].time_limit_seconds == 45.0);
    CHECK(items[i].left_method != items[i].right_method);
    ids.insert(items[i].item_id);
  }
  CHECK(ids.size() == 800);
  CHECK(items[0].item_id == "item-000001");
  CHECK(items == build_survey(scene_ids(200), {"ours", "base"}, kAspects, 9));
}

TEST_CASE("left placement is balanced") {
  const auto items = build_survey(scene_ids(2500), {"ours", "base"}, kAspects, 1);
  int left = 0;
  for (const auto& item : items) left += item.left_method == "ours" ? 1 : 0;
  const double fraction = static_cast<double>(left) / static_cast<double>(items.size());
  CHECK(fraction >= 0.48);
  CHECK(fraction <= 0.52);
}

TEST_CASE("survey preconditions") {
  CHECK_THROWS_AS(build_survey({}, {"a", "b"}, kAspects, 0), Error);
  CHECK_THROWS_AS(build_survey(scene_ids(1), {"a", "b"}, {}, 0), Error);
  CHECK_THROWS_AS(build_survey(scene_ids(1), {"a", "a"}, kAspects, 0), Error);
  CHECK_THROWS_AS(build_survey(scene_ids(1), {"a", "b"}, kAspects, 0, 0.0), Error);
  CHECK_THROWS_AS(study_aspect_from_string("Mood"), Error);
  for (StudyAspect a : kAllStudyAspects) {
    CHECK(study_aspect_from_string(to_string(a)) == a);
    CHECK(!question_text(a).empty());
  }
}

TEST_CASE("tally matches a brute-force recount") {
  const auto items = build_survey(scene_ids(50), {"ours", "base"}, kAspects, 4);
  Rng rng(8);
  std::vector<SurveyResponse> responses;
  for (int r = 0; r < 1000; ++r) {
    const auto& item = items[rng.below(items.size())];
    SurveyResponse resp{item.item_id, std::nullopt, rng.unit() * 60.0};
    const auto roll = rng.below(10);
    if (roll == 0) {
      resp.item_id = "item-999999";
      resp.choice = Side::Left;
    } else if (roll > 1) {
      resp.choice = rng.coin() ? Side::Left : Side::Right;
    }
    responses.push_back(resp);
  }
  const auto tally = tally_survey(items, responses, "ours");

  std::map<std::string, std::pair<int, int>> expected;
  int abstain = 0;
  for (const auto& resp : responses) {
    const SurveyItem* item = nullptr;
    for (const auto& i : items) {
      if (i.item_id == resp.item_id) item = &i;
    }
    if (!item || !resp.choice || resp.elapsed_seconds > 45.0) {
      ++abstain;
      continue;
    }
    auto& e = expected[std::string(to_string(item->aspect))];
    ++e.second;
    const std::string chosen = *resp.choice == Side::Left ? item->left_method : item->right_method;
    if (chosen == "ours") ++e.first;
  }
  CHECK(tally.abstentions == abstain);
  REQUIRE(tally.per_aspect.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& a = tally.per_aspect[i];
    CHECK(a.aspect == to_string(kAllStudyAspects[i]));
    CHECK(a.wins == expected[a.aspect].first);
    CHECK(a.total == expected[a.aspect].second);
  }
}

TEST_CASE("late and blank answers are abstentions") {
  const auto items = build_survey(scene_ids(1), {"ours", "base"}, {StudyAspect::ShotAlignment}, 0);
  const Side ours_side = items[0].left_method == "ours" ? Side::Left : Side::Right;
  const std::vector<SurveyResponse> responses{{items[0].item_id, ours_side, 10.0},
                                              {items[0].item_id, ours_side, 45.0},
                                              {items[0].item_id, ours_side, 45.5},
                                              {items[0].item_id, std::nullopt, 3.0}};
  const auto tally = tally_survey(items, responses, "ours");
  REQUIRE(tally.per_aspect.size() == 1);
  CHECK(tally.per_aspect[0].aspect == "ShotAlignment");
  CHECK(tally.per_aspect[0].wins == 2);
  CHECK(tally.per_aspect[0].total == 2);
  CHECK(tally.abstentions == 2);
}

TEST_CASE("a consistent respondent gives 100 percent") {
  const auto items = build_survey(scene_ids(30), {"ours", "base"}, kAspects, 2);
  std::vector<SurveyResponse> responses;
  for (const auto& item : items) {
    responses.push_back({item.item_id, item.left_method == "ours" ? Side::Left : Side::Right, 5.0});
  }
  for (const auto& a : tally_survey(items, responses, "ours").per_aspect) CHECK(a.percentage() == 100.0);
  for (const auto& a : tally_survey(items, responses, "base").per_aspect) CHECK(a.percentage() == 0.0);
}

TEST_CASE("jsonl round trip") {
  const std::vector<SurveyResponse> responses{{"item-000001", Side::Left, 1.5},
                                              {"item-000002", Side::Right, 40.0},
                                              {"item-000003", std::nullopt, 2.0}};
  std::string text;
  for (const auto& r : responses) text += nlohmann::json(r).dump() + "\n";
  text += "\n";
  CHECK(parse_responses_jsonl(text) == responses);
  try {
    parse_responses_jsonl("{\"item_id\": \"x\", \"choice\": \"up\"}\n");
    FAIL("should throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidArgument);
  }
  CHECK_THROWS_AS(parse_responses_jsonl("not json\n"), Error);
  const auto items = build_survey(scene_ids(2), {"a", "b"}, kAspects, 3);
  for (const auto& item : items) CHECK(nlohmann::json(item).get<SurveyItem>() == item);
}
