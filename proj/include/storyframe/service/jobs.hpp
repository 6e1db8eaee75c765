#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyframe/service/store.hpp"

namespace storyframe::service {

enum class JobKind { Plan, Generate, Evaluate, DatasetExport };
enum class JobState { Queued, Running, Done, Failed };

std::string_view to_string(JobKind kind);
std::string_view to_string(JobState state);
JobKind job_kind_from_string(std::string_view s);
JobState job_state_from_string(std::string_view s);

// Queued -> Running -> (Done | Failed); nothing else.
bool valid_transition(JobState from, JobState to);

// 26-character Crockford base32 ULID, monotonic within this process.
std::string new_ulid();

struct Job {
  std::string id;
  JobKind kind = JobKind::Plan;
  JobState state = JobState::Queued;
  nlohmann::json inputs = nlohmann::json::object();
  nlohmann::json outputs = nlohmann::json::object();
  std::optional<std::string> error;
  std::optional<std::string> error_code;  // Errc name when the failure was an Error
  std::optional<std::string> idempotency_key;
  std::optional<std::string> retry_of;
  std::string created_at;
  std::string updated_at;

  bool terminal() const { return state == JobState::Done || state == JobState::Failed; }
};

void to_json(nlohmann::json& j, const Job& job);
void from_json(const nlohmann::json& j, Job& job);

// Runs the job and returns its outputs; throwing marks the job Failed.
using JobHandler = std::function<nlohmann::json(const Job&)>;

struct RecoveryStats {
  int requeued = 0;
  int failed = 0;
};

class JobManager {
 public:
  JobManager(Store& store, int workers, JobHandler handler, std::ostream* log = nullptr);
  ~JobManager();

  JobManager(const JobManager&) = delete;
  JobManager& operator=(const JobManager&) = delete;

  // Loads persisted jobs. Running ones were interrupted and become Failed;
  // Queued ones go back on the queue. Call once, before start().
  RecoveryStats recover();
  void start();
  // Lets running jobs finish; queued jobs stay Queued on disk.
  void stop();

  // Same idempotency key returns the existing job unchanged.
  Job submit(JobKind kind, nlohmann::json inputs, std::optional<std::string> idempotency_key = std::nullopt);
  // New job with the inputs of a Failed one. Throws NotFound or InvalidTransition.
  Job retry(const std::string& id);

  std::optional<Job> get(const std::string& id) const;
  std::vector<Job> list() const;

  // Blocks until the job is Done or Failed or the timeout passes.
  std::optional<Job> wait(const std::string& id, std::chrono::milliseconds timeout) const;

 private:
  Job create_locked(JobKind kind, nlohmann::json inputs, std::optional<std::string> key,
                    std::optional<std::string> retry_of);
  void set_state_locked(Job& job, JobState to);
  void log_transition(const Job& job, std::optional<JobState> from);
  void worker_loop();

  Store& store_;
  int workers_;
  JobHandler handler_;
  std::ostream* log_;
  std::mutex log_mutex_;

  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::condition_variable work_ready_;
  std::map<std::string, Job> jobs_;
  std::map<std::string, std::string> by_key_;
  std::deque<std::string> queue_;
  std::vector<std::thread> threads_;
  bool stopping_ = false;
};

}  // namespace storyframe::service
