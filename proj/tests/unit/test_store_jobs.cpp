#include <doctest.h>

#include <atomic>
#include <fstream>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "storyframe/error.hpp"
#include "storyframe/service/jobs.hpp"

using namespace storyframe;
using namespace storyframe::service;
using namespace std::chrono_literals;

namespace {

nlohmann::json echo(const Job& job) { return {{"echo", job.inputs}}; }

}  // namespace

TEST_CASE("store json, files and blobs") {
  const auto dir = testing::fresh_temp_dir("store");
  Store store(dir);
  for (const char* c : {"plans", "sheets", "frames", "reports", "jobs", "surveys", "blobs"}) {
    CHECK(std::filesystem::is_directory(dir / c));
  }
  store.put_json("plans", "b", {{"x", 1}});
  store.put_json("plans", "a", {{"x", 2}});
  CHECK(store.get_json("plans", "b")->at("x") == 1);
  CHECK_FALSE(store.get_json("plans", "zz"));
  CHECK(store.list("plans") == std::vector<std::string>{"a", "b"});
  CHECK(store.has_json("plans", "a"));
  CHECK_THROWS_AS(store.put_json("plans", "../etc", {}), Error);
  CHECK_THROWS_AS(store.get_json("plans", "a/b"), Error);

  store.put_file("frames/x/1.png", "data");
  CHECK(store.get_file("frames/x/1.png") == "data");
  CHECK_FALSE(store.get_file("frames/x/2.png"));

  const auto h = store.put_blob(std::string_view("hello"));
  CHECK(h == "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824");
  const auto before = std::filesystem::last_write_time(dir / "blobs" / h);
  CHECK(store.put_blob(std::string_view("hello")) == h);
  CHECK(std::filesystem::last_write_time(dir / "blobs" / h) == before);
  CHECK(store.get_blob(h) == "hello");
  CHECK_FALSE(store.get_blob("../plans/a.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("store removes temp files left by a crash") {
  const auto dir = testing::fresh_temp_dir("store_tmp");
  { Store s(dir); }
  std::ofstream(dir / "plans" / "p.json.tmp-123-0") << "{partial";
  Store store(dir);
  CHECK_FALSE(std::filesystem::exists(dir / "plans" / "p.json.tmp-123-0"));
  CHECK(store.list("plans").empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("transition table") {
  const JobState all[] = {JobState::Queued, JobState::Running, JobState::Done, JobState::Failed};
  int allowed = 0;
  for (JobState a : all) {
    for (JobState b : all) allowed += valid_transition(a, b) ? 1 : 0;
  }
  CHECK(allowed == 3);
  CHECK(valid_transition(JobState::Queued, JobState::Running));
  CHECK(valid_transition(JobState::Running, JobState::Done));
  CHECK(valid_transition(JobState::Running, JobState::Failed));
  CHECK_FALSE(valid_transition(JobState::Failed, JobState::Running));
  CHECK_FALSE(valid_transition(JobState::Done, JobState::Queued));
}

TEST_CASE("ulids are well formed, unique and ordered") {
  std::set<std::string> seen;
  std::string previous;
  for (int i = 0; i < 20000; ++i) {
    const auto id = new_ulid();
    REQUIRE(id.size() == 26);
    CHECK(id.find_first_not_of("0123456789ABCDEFGHJKMNPQRSTVWXYZ") == std::string::npos);
    CHECK(id > previous);
    previous = id;
    seen.insert(id);
  }
  CHECK(seen.size() == 20000);
}

TEST_CASE("jobs run to completion and persist") {
  const auto dir = testing::fresh_temp_dir("jobs");
  Store store(dir);
  std::ostringstream log;
  JobManager jobs(store, 2, echo, &log);
  jobs.start();
  const auto job = jobs.submit(JobKind::Plan, {{"d", "x"}});
  CHECK(job.state == JobState::Queued);
  const auto done = jobs.wait(job.id, 5s);
  REQUIRE(done);
  CHECK(done->state == JobState::Done);
  CHECK(done->outputs["echo"]["d"] == "x");
  const auto disk = store.get_json("jobs", job.id)->get<Job>();
  CHECK(disk.state == JobState::Done);
  CHECK(disk.outputs == done->outputs);
  jobs.stop();
  // Queued, Running, Done each logged once.
  std::istringstream lines(log.str());
  std::vector<std::string> states;
  for (std::string line; std::getline(lines, line);) states.push_back(nlohmann::json::parse(line)["to"]);
  CHECK(states == std::vector<std::string>{"Queued", "Running", "Done"});
  std::filesystem::remove_all(dir);
}

TEST_CASE("handler failures are recorded and retry makes a new job") {
  const auto dir = testing::fresh_temp_dir("jobs_fail");
  Store store(dir);
  std::atomic<int> calls{0};
  JobManager jobs(store, 1, [&](const Job&) -> nlohmann::json {
    if (calls++ == 0) throw Error(Errc::BackendError, "down");
    return {{"ok", true}};
  });
  jobs.start();
  const auto job = jobs.submit(JobKind::Generate, {{"n", 3}});
  const auto failed = jobs.wait(job.id, 5s);
  REQUIRE(failed);
  CHECK(failed->state == JobState::Failed);
  CHECK(failed->error_code == "BackendError");
  const auto again = jobs.retry(job.id);
  CHECK(again.id != job.id);
  CHECK(again.retry_of == job.id);
  CHECK(again.inputs == job.inputs);
  CHECK(jobs.wait(again.id, 5s)->state == JobState::Done);
  try {
    jobs.retry(again.id);
    FAIL("should throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidTransition);
  }
  try {
    jobs.retry("nope");
    FAIL("should throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NotFound);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("idempotency keys return the same job") {
  const auto dir = testing::fresh_temp_dir("jobs_idem");
  Store store(dir);
  JobManager jobs(store, 1, echo);
  const auto a = jobs.submit(JobKind::Plan, {{"d", 1}}, "key-1");
  const auto b = jobs.submit(JobKind::Plan, {{"d", 2}}, "key-1");
  CHECK(a.id == b.id);
  CHECK(b.inputs["d"] == 1);
  CHECK(jobs.list().size() == 1);
  // The key survives a restart.
  jobs.stop();
  JobManager reloaded(store, 1, echo);
  reloaded.recover();
  CHECK(reloaded.submit(JobKind::Plan, {}, "key-1").id == a.id);
  std::filesystem::remove_all(dir);
}

TEST_CASE("recovery requeues queued jobs and fails interrupted ones") {
  const auto dir = testing::fresh_temp_dir("jobs_recover");
  Store store(dir);
  Job running;
  running.id = new_ulid();
  running.state = JobState::Running;
  store.put_json("jobs", running.id, running);
  Job queued;
  queued.id = new_ulid();
  queued.inputs = {{"q", true}};
  store.put_json("jobs", queued.id, queued);
  Job done;
  done.id = new_ulid();
  done.state = JobState::Done;
  store.put_json("jobs", done.id, done);

  JobManager jobs(store, 1, echo);
  const auto stats = jobs.recover();
  CHECK(stats.requeued == 1);
  CHECK(stats.failed == 1);
  CHECK(jobs.get(running.id)->state == JobState::Failed);
  CHECK(jobs.get(running.id)->error_code == "Interrupted");
  CHECK(store.get_json("jobs", running.id)->at("state") == "Failed");
  jobs.start();
  CHECK(jobs.wait(queued.id, 5s)->state == JobState::Done);
  CHECK(jobs.get(done.id)->state == JobState::Done);
  std::filesystem::remove_all(dir);
}

TEST_CASE("many concurrent jobs all finish") {
  const auto dir = testing::fresh_temp_dir("jobs_many");
  Store store(dir);
  JobManager jobs(store, 8, echo);
  jobs.start();
  std::vector<std::string> ids;
  for (int i = 0; i < 200; ++i) ids.push_back(jobs.submit(JobKind::Evaluate, {{"i", i}}).id);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto j = jobs.wait(ids[i], 10s);
    REQUIRE(j);
    CHECK(j->state == JobState::Done);
    CHECK(j->outputs["echo"]["i"] == static_cast<int>(i));
  }
  std::filesystem::remove_all(dir);
}
