#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "fixtures.hpp"
#include "storyframe/config.hpp"
#include "storyframe/error.hpp"

using namespace storyframe;

namespace {

// Sets an environment variable for the lifetime of the guard.
struct EnvGuard {
  EnvGuard(std::string name, const std::string& value) : name_(std::move(name)) { ::setenv(name_.c_str(), value.c_str(), 1); }
  ~EnvGuard() { ::unsetenv(name_.c_str()); }
  std::string name_;
};

const char* kSample =
    "; comment\n"
    "[service]\n"
    "port = 8080\n"
    "workers = 4\n"
    "[layout]\n"
    "frame_height = 256\n"
    "[judge]\n"
    "backend = http\n"
    "endpoint = http://127.0.0.1:9000/v1/chat\n"
    "max_concurrency = 8\n"
    "verbose = yes\n"
    "ratio = 0.25\n";

}  // namespace

TEST_CASE("typed lookups with fallbacks") {
  const auto c = Config::parse(kSample);
  CHECK(c.get_int("service", "port", 1) == 8080);
  CHECK(c.get_int("service", "missing", 7) == 7);
  CHECK(c.get_string("nosection", "x", "dflt") == "dflt");
  CHECK(c.get_bool("judge", "verbose", false));
  CHECK(c.get_double("judge", "ratio", 0) == 0.25);
  CHECK_THROWS_AS(c.get_int("judge", "endpoint", 0), Error);
  CHECK_THROWS_AS(c.get_bool("service", "port", false), Error);
}

TEST_CASE("environment overrides file values") {
  CHECK(env_override_name("service", "port") == "STORYFRAME_SERVICE_PORT");
  CHECK(env_override_name("judge", "max-concurrency") == "STORYFRAME_JUDGE_MAX_CONCURRENCY");
  const auto c = Config::parse(kSample);
  {
    EnvGuard g("STORYFRAME_SERVICE_PORT", "9999");
    CHECK(c.get_int("service", "port", 1) == 9999);
  }
  CHECK(c.get_int("service", "port", 1) == 8080);
  EnvGuard g("STORYFRAME_NEW_KEY", "v");
  CHECK(c.get_string("new", "key", "") == "v");
}

TEST_CASE("layout and backend sections") {
  const auto c = Config::parse(kSample);
  const auto layout = layout_from_config(c);
  CHECK(layout.frame_height == 256);
  CHECK(layout.border_thickness == 16);
  const auto judge = backend_from_config(c, "judge");
  CHECK(judge.kind == "http");
  CHECK(judge.endpoint == "http://127.0.0.1:9000/v1/chat");
  CHECK(judge.max_concurrency == 8);
  CHECK(judge.timeout_seconds == 120);
  const auto planner = backend_from_config(c, "planner");
  CHECK(planner.kind == "mock");
  CHECK_THROWS_AS(backend_from_config(Config::parse("[x]\nbackend = grpc\n"), "x"), Error);
  CHECK_THROWS_AS(backend_from_config(Config::parse("[x]\nbackend = http\n"), "x"), Error);
  CHECK_THROWS_AS(layout_from_config(Config::parse("[layout]\nframe_height = 0\n")), Error);
}

TEST_CASE("file errors") {
  try {
    Config::load("/nonexistent/storyframe.ini");
    FAIL("should throw");
  } catch (const Error& e) {
    CHECK(category(e.code()) == ErrorCategory::Io);
  }
  CHECK_THROWS_AS(Config::parse("[broken\nkey = 1\n"), Error);
  const auto dir = testing::fresh_temp_dir("config");
  std::ofstream(dir / "c.ini") << kSample;
  CHECK(Config::load(dir / "c.ini").get_int("service", "workers", 0) == 4);
  std::filesystem::remove_all(dir);
}
