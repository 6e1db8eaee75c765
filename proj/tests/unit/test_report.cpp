#include <doctest.h>

#include <fstream>
#include <sstream>

#include "storyframe/report.hpp"

using namespace storyframe;

namespace {

std::string golden(const std::string& name) {
  std::ifstream in(std::string(STORYFRAME_GOLDEN_DIR) + "/" + name, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PreferenceTally tally(int scene_wins, int shot_wins) {
  PreferenceTally t;
  t.at("Scene") = {"Scene", scene_wins, 10};
  t.at("Shot") = {"Shot", shot_wins, 3};
  t.at("Char") = {"Char", 0, 0};
  return t;
}

}  // namespace

TEST_CASE("preference table golden") {
  const auto t = preference_table({{"Ours", tally(7, 2)}, {"Base, v2", tally(3, 1)}}, {"Scene", "Shot", "Char"},
                                  "Judge");
  CHECK(t.to_csv() == golden("preference.csv"));
  CHECK(t.to_markdown() == golden("preference.md"));
}

TEST_CASE("count table golden") {
  std::vector<BenchmarkRow> ours;
  for (int n = 3; n <= 10; ++n) ours.push_back({n, 25, n == 5 ? 24 : 25, n == 5 ? 0.96 : 1.0});
  const std::vector<BenchmarkRow> rowdiff{{3, 2, 1, 0.5}, {4, 3, 1, 1.0 / 3.0}};
  CHECK(count_accuracy_table({{"Ours", ours}, {"RowDiff", rowdiff}}).to_csv() == golden("count.csv"));
}

TEST_CASE("alignment table golden") {
  AlignmentReport a, b, c;
  a.mean = 0.3;
  a.character_count_bucket = 1;
  b.mean = 0.32468;
  b.character_count_bucket = 1;
  c.mean = 0.25;
  c.character_count_bucket = 3;
  const auto s = summarize_alignment("Ours", {a, b, c}, {0.04, 0.06, std::nullopt});
  CHECK(s.clip_by_bucket.at(1) == doctest::Approx(0.31234));
  CHECK(s.consistency_by_bucket.at(1) == doctest::Approx(0.05));
  CHECK_FALSE(s.consistency_by_bucket.contains(3));
  CHECK(alignment_table({s}).to_csv() == golden("alignment.csv"));
}

TEST_CASE("empty inputs give header-only tables") {
  CHECK(preference_table({}, {"Scene"}).to_csv() == "Method,Scene\n");
  CHECK(count_accuracy_table({}).to_csv() == "# shots,3,4,5,6,7,8,9,10\n");
  CHECK(alignment_table({}).to_csv() ==
        "Method,1 Char CLIP,1 Char DS,2 Char CLIP,2 Char DS,3 Char CLIP,3 Char DS\n");
  const auto md = preference_table({}, {"Scene"}, "T").to_markdown();
  CHECK(md == "### T\n\n| Method | Scene |\n| --- | ---: |\n");
}

TEST_CASE("formatting and escaping") {
  CHECK(format_percent(66.666666) == "66.67");
  CHECK(format_percent(0) == "0.00");
  CHECK(format_score(0.123456) == "0.1235");
  Table t;
  t.header = {"a|b", "q\"x"};
  t.rows = {{"1", "2"}};
  CHECK(t.to_csv() == "a|b,\"q\"\"x\"\n1,2\n");
  CHECK(t.to_markdown().find("a\\|b") != std::string::npos);
}
