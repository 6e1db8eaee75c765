#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "storyframe/sheet_codec.hpp"

using namespace storyframe;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

// Runs the CLI with the given argument string; stderr goes to err_file when set.
RunResult run_cli(const std::string& args, const std::string& err_file = "/dev/null") {
  const std::string cmd = std::string(STORYFRAME_CLI_PATH) + " " + args + " 2>" + err_file;
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("compose then split gives the frames back") {
  const testing::TempDir tmp("cli_split");
  Rng rng(1);
  const LayoutSpec layout;
  std::string args;
  std::vector<Image> frames;
  for (int k = 0; k < 6; ++k) {
    frames.push_back(testing::noise_image(464, 272, rng));
    const auto p = tmp.path / ("f" + std::to_string(k) + ".png");
    write_png(p, frames.back());
    args += " " + p.string();
  }
  const auto sheet = tmp.path / "sheet.png";
  REQUIRE(run_cli("compose" + args + " -o " + sheet.string()).exit_code == 0);
  CHECK(read_png(sheet).height() == expected_sheet_height(6, layout));
  const auto r = run_cli("split " + sheet.string() + " -o " + (tmp.path / "out").string());
  CHECK(r.exit_code == 0);
  int pngs = 0;
  for (const auto& e : std::filesystem::directory_iterator(tmp.path / "out")) pngs += e.path().extension() == ".png";
  CHECK(pngs == 6);
  for (int k = 0; k < 6; ++k) CHECK(read_png(tmp.path / "out" / (std::to_string(k + 1) + ".png")) == frames[static_cast<std::size_t>(k)]);
  CHECK(run_cli("count " + sheet.string()).out == "6\n");
}

TEST_CASE("count of a single frame is 1") {
  const testing::TempDir tmp("cli_count");
  Rng rng(2);
  write_png(tmp.path / "one.png", testing::noise_image(464, 272, rng));
  const auto r = run_cli("count " + (tmp.path / "one.png").string());
  CHECK(r.exit_code == 0);
  CHECK(r.out == "1\n");
}

TEST_CASE("mock count benchmark without faults is perfect") {
  const testing::TempDir tmp("cli_bench");
  const auto r = run_cli("--mock eval -o " + (tmp.path / "rep").string() + " count-bench --trials 4 --fault 0");
  CHECK(r.exit_code == 0);
  const std::string csv = slurp(tmp.path / "rep" / "report.csv");
  CHECK(csv == "# shots,3,4,5,6,7,8,9,10\nchecker,100.00,100.00,100.00,100.00,100.00,100.00,100.00,100.00\n");
}

TEST_CASE("plan and generate offline") {
  const testing::TempDir tmp("cli_gen");
  const auto script = tmp.path / "scene.txt";
  const auto plan = run_cli("--mock --seed 3 plan \"Anna and Ben argue in a kitchen.\" -o " + script.string());
  REQUIRE(plan.exit_code == 0);
  CHECK(slurp(script).find("SHOT 1 [") != std::string::npos);
  const auto out = tmp.path / "gen";
  REQUIRE(run_cli("--mock --seed 3 generate " + script.string() + " -o " + out.string()).exit_code == 0);
  const auto result = nlohmann::json::parse(slurp(out / "result.json"));
  CHECK(result["count_ok"] == true);
  const auto first = slurp(out / "sheet.png");
  REQUIRE(run_cli("--mock --seed 3 generate " + script.string() + " -o " + (tmp.path / "gen2").string()).exit_code == 0);
  CHECK(slurp(tmp.path / "gen2" / "sheet.png") == first);
}

TEST_CASE("exit codes follow the error category") {
  const testing::TempDir tmp("cli_err");
  CHECK(run_cli("count /nonexistent/sheet.png").exit_code == 4);
  CHECK(run_cli("--no-such-flag").exit_code != 0);
  std::ofstream(tmp.path / "bad.txt") << "SETTING: x\nSHOT 1 [huge]: y\n";
  const auto err = (tmp.path / "err.json").string();
  const auto r = run_cli("--json --mock generate " + (tmp.path / "bad.txt").string() + " -o " +
                             (tmp.path / "o").string(),
                         err);
  CHECK(r.exit_code == 2);
  const auto j = nlohmann::json::parse(slurp(err));
  CHECK(j["category"] == "validation");
  CHECK(!j["issues"].empty());
  std::ofstream(tmp.path / "good.txt") << "SETTING: A bar.\nSHOT 1 [wide]: A man drinks.\n";
  CHECK(run_cli("--mock generate " + (tmp.path / "good.txt").string() + " --width 470 -o " + (tmp.path / "o").string())
            .exit_code == 2);
}
