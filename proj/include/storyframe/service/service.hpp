#pragma once

// HTTP front end over the job queue and store.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "storyframe/chat.hpp"
#include "storyframe/evaluation.hpp"
#include "storyframe/generation.hpp"
#include "storyframe/planning.hpp"
#include "storyframe/service/jobs.hpp"
#include "storyframe/service/store.hpp"

namespace storyframe::service {

struct Backends {
  std::shared_ptr<ChatBackend> planner;
  std::shared_ptr<ImageGenBackend> image;
  std::shared_ptr<EmbeddingBackend> embedding;
  std::shared_ptr<ChatBackend> judge;
  // Mock image backends can be rebuilt per job with a fault config.
  bool image_is_mock = false;
};

Backends mock_backends(std::uint64_t seed = 0, const LayoutSpec& layout = {});

struct ServiceOptions {
  std::filesystem::path root = "store";
  int workers = 2;
  GenerationOptions generation{};
  PlanningOptions planning{};
  std::vector<Exemplar> exemplars = default_exemplars();
  std::optional<std::filesystem::path> ui_dir;
  std::string token;  // when set, requests need "Authorization: Bearer <token>"
  double survey_time_limit = 45.0;
};

class Service {
 public:
  Service(ServiceOptions options, Backends backends, std::ostream* log = nullptr);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Recovers persisted jobs and starts the worker pool.
  RecoveryStats start();

  // Blocking. Returns false if the address cannot be bound.
  bool listen(const std::string& host, int port);
  // Binds to a free port and returns it; then call listen_after_bind.
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void wait_until_ready() const;
  // Stops the HTTP server and the worker pool.
  void stop();

  Store& store();
  JobManager& jobs();

  // Executes one job synchronously; the worker pool calls this.
  nlohmann::json run_job(const Job& job);

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace storyframe::service
