#include "storyframe/service/jobs.hpp"

#include <ctime>
#include <random>

#include "storyframe/error.hpp"

namespace storyframe::service {

std::string_view to_string(JobKind kind) {
  switch (kind) {
    case JobKind::Plan: return "Plan";
    case JobKind::Generate: return "Generate";
    case JobKind::Evaluate: return "Evaluate";
    case JobKind::DatasetExport: return "DatasetExport";
  }
  return "";
}

std::string_view to_string(JobState state) {
  switch (state) {
    case JobState::Queued: return "Queued";
    case JobState::Running: return "Running";
    case JobState::Done: return "Done";
    case JobState::Failed: return "Failed";
  }
  return "";
}

JobKind job_kind_from_string(std::string_view s) {
  for (JobKind k : {JobKind::Plan, JobKind::Generate, JobKind::Evaluate, JobKind::DatasetExport}) {
    if (to_string(k) == s) return k;
  }
  throw Error(Errc::DecodeError, "unknown job kind " + std::string(s));
}

JobState job_state_from_string(std::string_view s) {
  for (JobState st : {JobState::Queued, JobState::Running, JobState::Done, JobState::Failed}) {
    if (to_string(st) == s) return st;
  }
  throw Error(Errc::DecodeError, "unknown job state " + std::string(s));
}

bool valid_transition(JobState from, JobState to) {
  return (from == JobState::Queued && to == JobState::Running) ||
         (from == JobState::Running && (to == JobState::Done || to == JobState::Failed));
}

namespace {

std::string now_iso() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms % 1000));
  return buf;
}

}  // namespace

std::string new_ulid() {
  static std::mutex m;
  static std::uint64_t last_ms = 0;
  static std::uint64_t rand_hi = 0;  // 16 bits
  static std::uint64_t rand_lo = 0;  // 64 bits
  static std::mt19937_64 engine{std::random_device{}()};

  std::lock_guard lock(m);
  const auto ms = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
          .count());
  if (ms > last_ms) {
    last_ms = ms;
    rand_hi = engine() & 0xffff;
    rand_lo = engine();
  } else if (++rand_lo == 0) {
    rand_hi = (rand_hi + 1) & 0xffff;
  }

  static constexpr char kAlphabet[] = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";
  std::string out(26, '0');
  std::uint64_t t = last_ms;
  for (int i = 9; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kAlphabet[t & 31];
    t >>= 5;
  }
  // 80 random bits as 16 base32 digits, most significant first.
  std::uint64_t hi = rand_hi;
  std::uint64_t lo = rand_lo;
  for (int i = 25; i >= 10; --i) {
    out[static_cast<std::size_t>(i)] = kAlphabet[lo & 31];
    lo = (lo >> 5) | ((hi & 31) << 59);
    hi >>= 5;
  }
  return out;
}

void to_json(nlohmann::json& j, const Job& job) {
  j = {{"id", job.id},
       {"kind", to_string(job.kind)},
       {"state", to_string(job.state)},
       {"inputs", job.inputs},
       {"outputs", job.outputs},
       {"error", job.error ? nlohmann::json(*job.error) : nlohmann::json(nullptr)},
       {"error_code", job.error_code ? nlohmann::json(*job.error_code) : nlohmann::json(nullptr)},
       {"idempotency_key", job.idempotency_key ? nlohmann::json(*job.idempotency_key) : nlohmann::json(nullptr)},
       {"retry_of", job.retry_of ? nlohmann::json(*job.retry_of) : nlohmann::json(nullptr)},
       {"created_at", job.created_at},
       {"updated_at", job.updated_at}};
}

void from_json(const nlohmann::json& j, Job& job) {
  auto opt = [&](const char* key) -> std::optional<std::string> {
    if (j.contains(key) && j[key].is_string()) return j[key].get<std::string>();
    return std::nullopt;
  };
  job.id = j.at("id").get<std::string>();
  job.kind = job_kind_from_string(j.at("kind").get<std::string>());
  job.state = job_state_from_string(j.at("state").get<std::string>());
  job.inputs = j.value("inputs", nlohmann::json::object());
  job.outputs = j.value("outputs", nlohmann::json::object());
  job.error = opt("error");
  job.error_code = opt("error_code");
  job.idempotency_key = opt("idempotency_key");
  job.retry_of = opt("retry_of");
  job.created_at = j.value("created_at", "");
  job.updated_at = j.value("updated_at", "");
}

JobManager::JobManager(Store& store, int workers, JobHandler handler, std::ostream* log)
    : store_(store), workers_(std::max(1, workers)), handler_(std::move(handler)), log_(log) {}

JobManager::~JobManager() { stop(); }

RecoveryStats JobManager::recover() {
  RecoveryStats stats;
  std::lock_guard lock(mutex_);
  for (const auto& id : store_.list("jobs")) {
    const auto doc = store_.get_json("jobs", id);
    if (!doc) continue;
    Job job = doc->get<Job>();
    if (job.state == JobState::Running) {
      // The process died mid-run; outputs may be incomplete, so the job is
      // closed and can be resubmitted with retry().
      const JobState from = job.state;
      job.state = JobState::Failed;
      job.error = "interrupted by service restart";
      job.error_code = "Interrupted";
      job.updated_at = now_iso();
      store_.put_json("jobs", job.id, job);
      log_transition(job, from);
      ++stats.failed;
    } else if (job.state == JobState::Queued) {
      queue_.push_back(job.id);
      ++stats.requeued;
    }
    if (job.idempotency_key) by_key_[*job.idempotency_key] = job.id;
    jobs_[job.id] = std::move(job);
  }
  return stats;
}

void JobManager::start() {
  std::lock_guard lock(mutex_);
  if (!threads_.empty()) return;
  stopping_ = false;
  for (int i = 0; i < workers_; ++i) threads_.emplace_back([this] { worker_loop(); });
}

void JobManager::stop() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  work_ready_.notify_all();
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
  threads_.clear();
}

Job JobManager::create_locked(JobKind kind, nlohmann::json inputs, std::optional<std::string> key,
                              std::optional<std::string> retry_of) {
  Job job;
  job.id = new_ulid();
  job.kind = kind;
  job.inputs = std::move(inputs);
  job.idempotency_key = std::move(key);
  job.retry_of = std::move(retry_of);
  job.created_at = job.updated_at = now_iso();
  store_.put_json("jobs", job.id, job);
  if (job.idempotency_key) by_key_[*job.idempotency_key] = job.id;
  jobs_[job.id] = job;
  queue_.push_back(job.id);
  log_transition(job, std::nullopt);
  work_ready_.notify_one();
  return job;
}

Job JobManager::submit(JobKind kind, nlohmann::json inputs, std::optional<std::string> idempotency_key) {
  std::lock_guard lock(mutex_);
  if (idempotency_key) {
    const auto it = by_key_.find(*idempotency_key);
    if (it != by_key_.end()) return jobs_.at(it->second);
  }
  return create_locked(kind, std::move(inputs), std::move(idempotency_key), std::nullopt);
}

Job JobManager::retry(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) throw Error(Errc::NotFound, "unknown job " + id);
  if (it->second.state != JobState::Failed) {
    throw Error(Errc::InvalidTransition,
                "job " + id + " is " + std::string(to_string(it->second.state)) + "; only Failed jobs can be retried");
  }
  return create_locked(it->second.kind, it->second.inputs, std::nullopt, id);
}

std::optional<Job> JobManager::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::vector<Job> JobManager::list() const {
  std::lock_guard lock(mutex_);
  std::vector<Job> out;
  for (const auto& [id, job] : jobs_) out.push_back(job);
  return out;
}

std::optional<Job> JobManager::wait(const std::string& id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  const auto done = [&] {
    const auto it = jobs_.find(id);
    return it == jobs_.end() || it->second.terminal();
  };
  changed_.wait_for(lock, timeout, done);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

void JobManager::set_state_locked(Job& job, JobState to) {
  if (!valid_transition(job.state, to)) {
    throw Error(Errc::InvalidTransition, "job " + job.id + ": " + std::string(to_string(job.state)) + " -> " +
                                             std::string(to_string(to)));
  }
  const JobState from = job.state;
  job.state = to;
  job.updated_at = now_iso();
  store_.put_json("jobs", job.id, job);
  log_transition(job, from);
  changed_.notify_all();
}

void JobManager::log_transition(const Job& job, std::optional<JobState> from) {
  if (log_ == nullptr) return;
  nlohmann::json line{{"ts", now_iso()},
                      {"event", "job_transition"},
                      {"job_id", job.id},
                      {"kind", to_string(job.kind)},
                      {"from", from ? nlohmann::json(to_string(*from)) : nlohmann::json(nullptr)},
                      {"to", to_string(job.state)}};
  if (job.error) line["error"] = *job.error;
  std::lock_guard lock(log_mutex_);
  *log_ << line.dump() << "\n";
  log_->flush();
}

void JobManager::worker_loop() {
  for (;;) {
    Job snapshot;
    {
      std::unique_lock lock(mutex_);
      work_ready_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      const std::string id = queue_.front();
      queue_.pop_front();
      Job& job = jobs_.at(id);
      if (job.state != JobState::Queued) continue;
      set_state_locked(job, JobState::Running);
      snapshot = job;
    }

    nlohmann::json outputs;
    std::optional<std::string> error;
    std::optional<std::string> code;
    try {
      outputs = handler_(snapshot);
    } catch (const Error& e) {
      error = e.what();
      code = std::string(storyframe::to_string(e.code()));
    } catch (const std::exception& e) {
      error = e.what();
    }

    std::lock_guard lock(mutex_);
    Job& job = jobs_.at(snapshot.id);
    if (error) {
      job.error = error;
      job.error_code = code;
      set_state_locked(job, JobState::Failed);
    } else {
      job.outputs = std::move(outputs);
      set_state_locked(job, JobState::Done);
    }
  }
}

}  // namespace storyframe::service
