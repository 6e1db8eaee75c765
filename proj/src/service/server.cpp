#include <httplib.h>

#include <set>

#include <nlohmann/json.hpp>

#include "storyframe/dataset.hpp"
#include "storyframe/error.hpp"
#include "storyframe/judge.hpp"
#include "storyframe/report.hpp"
#include "storyframe/service/service.hpp"
#include "storyframe/survey.hpp"

namespace storyframe::service {

namespace fs = std::filesystem;
using nlohmann::json;

Backends mock_backends(std::uint64_t seed, const LayoutSpec& layout) {
  Backends b;
  b.planner = std::make_shared<MockChatBackend>(seed);
  b.image = std::make_shared<MockImageGenBackend>(layout);
  b.embedding = std::make_shared<MockEmbeddingBackend>();
  b.judge = std::make_shared<MockJudgeBackend>(MockJudgeBackend::hashed(seed));
  b.image_is_mock = true;
  return b;
}

struct Service::Impl {
  ServiceOptions options;
  Backends backends;
  std::ostream* log;
  Store store;
  JobManager jobs;
  httplib::Server server;

  Impl(Service& owner, ServiceOptions opts, Backends b, std::ostream* log_stream)
      : options(std::move(opts)),
        backends(std::move(b)),
        log(log_stream),
        store(options.root),
        jobs(store, options.workers, [&owner](const Job& job) { return owner.run_job(job); }, log_stream) {}

  // ---- job bodies ----

  ScenePlan load_plan(const std::string& id) {
    const auto doc = store.get_json("plans", id);
    if (!doc) throw Error(Errc::NotFound, "unknown plan " + id);
    return doc->get<ScenePlan>();
  }

  json load_scene(const std::string& id) {
    const auto doc = store.get_json("sheets", id);
    if (!doc) throw Error(Errc::NotFound, "unknown scene " + id);
    return *doc;
  }

  std::vector<fs::path> frame_paths(const std::string& scene_id) {
    const json scene = load_scene(scene_id);
    std::vector<fs::path> out;
    const int n = scene.at("frame_count").get<int>();
    for (int k = 1; k <= n; ++k) out.push_back(store.path_of(fs::path("frames") / scene_id / (std::to_string(k) + ".png")));
    return out;
  }

  std::vector<Image> load_frames(const std::string& scene_id) {
    std::vector<Image> frames;
    for (const auto& p : frame_paths(scene_id)) frames.push_back(read_png(p));
    return frames;
  }

  json run_plan(const Job& job) {
    const auto& in = job.inputs;
    const auto strategy = parse_strategy(in.value("strategy", "ie"));
    std::vector<Exemplar> exemplars = options.exemplars;
    if (in.contains("exemplars")) exemplars = exemplars_from_json(in["exemplars"].dump());
    const auto outcome = plan_scene(in.at("scene_description").get<std::string>(), strategy, exemplars,
                                    *backends.planner, options.planning);
    store.put_json("plans", job.id, outcome.plan);
    return {{"plan_id", job.id},
            {"plan_url", "/plans/" + job.id},
            {"strategy", to_string(strategy)},
            {"repair_attempts", outcome.repair_attempts},
            {"shot_count", outcome.plan.shots.size()}};
  }

  json run_generate(const Job& job) {
    const auto& in = job.inputs;
    const std::string plan_id = in.at("plan_id").get<std::string>();
    const ScenePlan plan = load_plan(plan_id);
    GenerationOptions gen = options.generation;
    gen.base_width = in.value("base_width", gen.base_width);
    const auto seed = in.value("seed", std::uint64_t{0});

    std::shared_ptr<ImageGenBackend> backend = backends.image;
    if (in.contains("fault") && backends.image_is_mock) {
      backend = std::make_shared<MockImageGenBackend>(gen.layout, in["fault"].get<FaultConfig>(), MockRenderOptions{},
                                                      gen.separator_template);
    }
    const auto result = generate_keyframes(plan, *backend, seed, gen);

    const std::string id = job.id;
    const auto sheet_png = encode_png(result.sheet.image);
    store.put_file(fs::path("sheets") / (id + ".png"),
                   std::string_view(reinterpret_cast<const char*>(sheet_png.data()), sheet_png.size()));
    json frame_urls = json::array();
    json frame_hashes = json::array();
    for (std::size_t k = 0; k < result.frames.size(); ++k) {
      const auto png = encode_png(result.frames[k]);
      const std::string_view bytes(reinterpret_cast<const char*>(png.data()), png.size());
      store.put_file(fs::path("frames") / id / (std::to_string(k + 1) + ".png"), bytes);
      frame_hashes.push_back(store.put_blob(bytes));
      frame_urls.push_back("/scenes/" + id + "/frames/" + std::to_string(k + 1) + ".png");
    }
    // The sidecar is written last: a scene is visible only once complete.
    json sidecar = sheet_sidecar(result.sheet, result.boundary, plan_id);
    sidecar["scene_id"] = id;
    sidecar["seed"] = seed;
    sidecar["count_ok"] = result.count_ok;
    sidecar["shot_count"] = plan.shots.size();
    sidecar["prompt"] = result.prompt.text;
    sidecar["sheet_sha256"] = store.put_blob(std::string_view(reinterpret_cast<const char*>(sheet_png.data()), sheet_png.size()));
    sidecar["frame_sha256"] = frame_hashes;
    sidecar["frame_urls"] = frame_urls;
    sidecar["sheet_url"] = "/scenes/" + id + "/sheet.png";
    store.put_json("sheets", id, sidecar);
    return {{"scene_id", id},
            {"sheet_url", sidecar["sheet_url"]},
            {"frame_urls", frame_urls},
            {"count_ok", result.count_ok},
            {"frame_count", result.frames.size()},
            {"shot_count", plan.shots.size()}};
  }

  void write_report(const std::string& id, json report, const std::vector<Table>& tables) {
    std::string md;
    std::string csv;
    for (const auto& t : tables) {
      if (!md.empty()) md += "\n";
      md += t.to_markdown();
      if (!csv.empty()) csv += "\n";
      csv += t.to_csv();
    }
    store.put_file(fs::path("reports") / (id + ".md"), md);
    store.put_file(fs::path("reports") / (id + ".csv"), csv);
    report["report_id"] = id;
    store.put_json("reports", id, report);
  }

  json run_evaluate(const Job& job) {
    const auto& in = job.inputs;
    const std::string kind = in.at("kind").get<std::string>();
    json report{{"kind", kind}};
    std::vector<Table> tables;

    if (kind == "align" || kind == "consistency") {
      const auto ids = in.at("scene_ids").get<std::vector<std::string>>();
      if (ids.empty()) throw Error(Errc::EmptyInput, "scene_ids is empty");
      json scenes = json::array();
      std::vector<AlignmentReport> reports;
      std::vector<std::optional<double>> consistency;
      for (const auto& sid : ids) {
        const json scene = load_scene(sid);
        const ScenePlan plan = load_plan(scene.at("source_plan_id").get<std::string>());
        const auto frames = load_frames(sid);
        json entry{{"scene_id", sid}};
        if (kind == "align") {
          std::vector<std::string> texts;
          for (const auto& s : plan.shots) texts.push_back(s.description);
          const auto r = clip_alignment(frames, texts, *backends.embedding, static_cast<int>(plan.characters.size()));
          entry["per_shot"] = r.per_shot;
          entry["mean"] = r.mean;
          entry["character_count_bucket"] = r.character_count_bucket;
          reports.push_back(r);
        } else {
          reports.push_back({{}, 0.0, character_bucket(static_cast<int>(plan.characters.size()))});
        }
        std::optional<double> c;
        if (frames.size() >= 2) c = consistency_score(frames, *backends.embedding);
        entry["consistency"] = c ? json(*c) : json(nullptr);
        consistency.push_back(c);
        scenes.push_back(std::move(entry));
      }
      report["scenes"] = scenes;
      auto summary = summarize_alignment(in.value("method", "ours"), reports, consistency);
      if (kind == "consistency") summary.clip_by_bucket.clear();
      tables.push_back(alignment_table({summary}));
    } else if (kind == "count_bench") {
      BenchmarkOptions bench;
      bench.generation = options.generation;
      if (in.contains("shot_counts")) bench.shot_counts = in["shot_counts"].get<std::vector<int>>();
      bench.trials = in.value("trials", bench.trials);
      bench.seed = in.value("seed", std::uint64_t{0});
      const std::string mode = in.value("mode", "checker");
      if (mode != "checker" && mode != "rowdiff") throw Error(Errc::InvalidArgument, "mode must be checker or rowdiff");
      bench.mode = mode == "checker" ? CountingMode::Checkerboard : CountingMode::RowDiff;
      std::shared_ptr<ImageGenBackend> backend = backends.image;
      if (backends.image_is_mock) {
        MockRenderOptions render;
        render.bordered = bench.mode == CountingMode::Checkerboard;
        if (in.value("heavy_texture", false)) render.texture_amplitude = kHeavyTextureAmplitude;
        backend = std::make_shared<MockImageGenBackend>(bench.generation.layout, in.value("fault", FaultConfig{}),
                                                        render, bench.generation.separator_template);
      }
      const auto rows = frame_count_benchmark({}, *backend, bench);
      json out = json::array();
      for (const auto& r : rows) {
        out.push_back({{"shot_count", r.shot_count}, {"trials", r.trials}, {"correct", r.correct}, {"accuracy", r.accuracy}});
      }
      report["mode"] = mode;
      report["rows"] = out;
      tables.push_back(count_accuracy_table({{mode, rows}}));
    } else if (kind == "judge") {
      std::vector<ScenePair> pairs;
      for (const auto& p : in.at("pairs")) {
        ScenePair pair;
        pair.scene_id = p.at("scene_id").get<std::string>();
        for (const auto& f : frame_paths(p.at("ours").get<std::string>())) pair.ours.push_back(f.string());
        for (const auto& f : frame_paths(p.at("baseline").get<std::string>())) pair.baseline.push_back(f.string());
        pairs.push_back(std::move(pair));
      }
      const auto outcome = run_pairwise_judging(std::move(pairs), *backends.judge, in.value("seed", std::uint64_t{0}),
                                                in.value("jobs", 1));
      report["raw"] = outcome.raw;
      report["folded"] = outcome.folded;
      std::vector<std::string> raw_columns;
      for (JudgeAspect a : kAllJudgeAspects) raw_columns.emplace_back(to_string(a));
      const std::string label = in.value("method", "ours");
      tables.push_back(preference_table({{label, outcome.folded}},
                                        std::vector<std::string>(std::begin(kFoldedJudgeColumns), std::end(kFoldedJudgeColumns)),
                                        "Judge preference"));
      tables.push_back(preference_table({{label, outcome.raw}}, raw_columns, "Judge preference by aspect"));
    } else {
      throw Error(Errc::InvalidArgument, "unknown evaluation kind " + kind);
    }
    write_report(job.id, report, tables);
    return {{"report_id", job.id}, {"report_url", "/reports/" + job.id}};
  }

  json run_dataset_export(const Job& job) {
    const fs::path records_path = job.inputs.at("records_path").get<std::string>();
    const auto records = JsonlRecordSource(records_path).load();
    ExportOptions ex;
    ex.records_dir = records_path.parent_path();
    ex.output_dir = job.inputs.contains("output_dir") ? fs::path(job.inputs["output_dir"].get<std::string>())
                                                      : store.root() / "datasets" / job.id;
    ex.separator_template = options.generation.separator_template;
    const auto manifest = export_training_pairs(records, options.generation.layout, ex);
    json hist = json::object();
    for (const auto& [n, c] : manifest.histogram) hist[std::to_string(n)] = c;
    return {{"manifest_path", (ex.output_dir / "manifest.json").string()},
            {"entries", manifest.entries.size()},
            {"histogram", hist}};
  }

  // ---- surveys ----

  json load_survey(const std::string& id) {
    const auto doc = store.get_json("surveys", id);
    if (!doc) throw Error(Errc::NotFound, "unknown survey " + id);
    return *doc;
  }

  std::vector<json> load_responses(const std::string& id) {
    std::vector<json> out;
    const auto text = store.get_file(fs::path("surveys") / (id + ".responses.jsonl"));
    if (!text) return out;
    std::size_t start = 0;
    while (start < text->size()) {
      std::size_t end = text->find('\n', start);
      if (end == std::string::npos) end = text->size();
      if (end > start) out.push_back(json::parse(text->substr(start, end - start)));
      start = end + 1;
    }
    return out;
  }
};

namespace {

int status_for(const Error& e) {
  switch (e.code()) {
    case Errc::NotFound: return 404;
    case Errc::InvalidTransition: return 409;
    default: break;
  }
  switch (category(e.code())) {
    case ErrorCategory::Usage: return 400;
    case ErrorCategory::Validation: return 422;
    case ErrorCategory::Backend: return 503;
    case ErrorCategory::Io: return 500;
  }
  return 500;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                json extra = json::object()) {
  extra["error"] = code;
  extra["message"] = message;
  send_json(res, status, extra);
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("request body is not JSON: ") + e.what());
  }
}

std::optional<std::string> idempotency_key(const httplib::Request& req) {
  if (req.has_header("Idempotency-Key")) return req.get_header_value("Idempotency-Key");
  return std::nullopt;
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const InvalidPlanError& e) {
      send_error(res, 422, "InvalidPlan", e.what(), {{"violations", violations_json(e.violations())}});
    } catch (const Error& e) {
      send_error(res, status_for(e), std::string(to_string(e.code())), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "InvalidArgument", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", e.what());
    }
  };
}

void send_file(httplib::Response& res, const std::optional<std::string>& bytes, const std::string& type,
               const std::string& what) {
  if (!bytes) {
    send_error(res, 404, "NotFound", what + " not found");
    return;
  }
  res.status = 200;
  res.set_content(*bytes, type);
}

}  // namespace

Service::Service(ServiceOptions options, Backends backends, std::ostream* log)
    : impl_(std::make_unique<Impl>(*this, std::move(options), std::move(backends), log)) {
  Impl& s = *impl_;
  auto& srv = s.server;
  const std::string id_re = "([A-Za-z0-9_-]+)";

  if (!s.options.token.empty()) {
    srv.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      if (req.path == "/healthz" || req.path.rfind("/ui", 0) == 0) return httplib::Server::HandlerResponse::Unhandled;
      if (req.get_header_value("Authorization") == "Bearer " + impl_->options.token) {
        return httplib::Server::HandlerResponse::Unhandled;
      }
      send_error(res, 401, "Unauthorized", "missing or wrong bearer token");
      return httplib::Server::HandlerResponse::Handled;
    });
  }

  if (s.options.ui_dir && fs::is_directory(*s.options.ui_dir)) {
    srv.set_mount_point("/ui", s.options.ui_dir->string());
  }

  srv.Get("/healthz", guarded([this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"workers", impl_->options.workers}});
  }));

  // ---- jobs ----
  srv.Get("/jobs", guarded([this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& j : impl_->jobs.list()) out.push_back(j);
    send_json(res, 200, out);
  }));
  srv.Get("/jobs/" + id_re, guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto job = impl_->jobs.get(req.matches[1]);
    if (!job) throw Error(Errc::NotFound, "unknown job " + std::string(req.matches[1]));
    send_json(res, 200, *job);
  }));
  srv.Post("/jobs/" + id_re + "/retry", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto job = impl_->jobs.retry(req.matches[1]);
    send_json(res, 202, {{"job_id", job.id}, {"retry_of", req.matches[1]}});
  }));

  // ---- plans ----
  srv.Post("/plans", guarded([this](const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    const std::string desc = body.value("scene_description", "");
    if (desc.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw Error(Errc::InvalidArgument, "scene_description is required");
    }
    parse_strategy(body.value("strategy", "ie"));
    const auto job = impl_->jobs.submit(JobKind::Plan, body, idempotency_key(req));
    send_json(res, 202, {{"job_id", job.id}, {"plan_url", "/plans/" + job.id}});
  }));

  srv.Get("/plans/" + id_re + "/script", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const ScenePlan plan = impl_->load_plan(req.matches[1]);
    res.status = 200;
    res.set_content(serialize_script(plan), "text/plain; charset=utf-8");
  }));

  srv.Get("/plans/" + id_re, guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (const auto doc = impl_->store.get_json("plans", id)) {
      send_json(res, 200, *doc);
      return;
    }
    const auto job = impl_->jobs.get(id);
    if (!job) throw Error(Errc::NotFound, "unknown plan " + id);
    if (job->state == JobState::Failed) {
      int status = 422;
      if (job->error_code) {
        for (Errc c : {Errc::BackendError, Errc::BackendContract}) {
          if (*job->error_code == to_string(c)) status = 503;
        }
      }
      send_error(res, status, job->error_code.value_or("Failed"), job->error.value_or("plan job failed"),
                 {{"job_id", id}, {"state", "Failed"}});
      return;
    }
    send_error(res, 409, "NotReady", "plan job is " + std::string(to_string(job->state)),
               {{"job_id", id}, {"state", to_string(job->state)}});
  }));

  srv.Put("/plans/" + id_re, guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (const auto job = impl_->jobs.get(id); job && !job->terminal()) {
      send_error(res, 409, "InvalidTransition", "plan job is still " + std::string(to_string(job->state)));
      return;
    }
    ScenePlan plan;
    try {
      plan = parse_body(req).get<ScenePlan>();
    } catch (const json::exception& e) {
      send_error(res, 422, "InvalidPlan", e.what(), {{"violations", json::array()}});
      return;
    }
    const auto violations = validate(resolve_characters(plan));
    if (!violations.empty()) {
      send_error(res, 422, "InvalidPlan", "plan has " + std::to_string(violations.size()) + " violation(s)",
                 {{"violations", violations_json(violations)}});
      return;
    }
    plan = resolve_characters(std::move(plan));
    auto lock = impl_->store.lock_entity("plan:" + id);
    impl_->store.put_json("plans", id, plan);
    send_json(res, 200, plan);
  }));

  srv.Post("/plans/" + id_re + "/generate", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!impl_->store.has_json("plans", id)) {
      if (const auto job = impl_->jobs.get(id); job && !job->terminal()) {
        throw Error(Errc::InvalidTransition, "plan job is still " + std::string(to_string(job->state)));
      }
      throw Error(Errc::NotFound, "unknown plan " + id);
    }
    json body = parse_body(req);
    body["plan_id"] = id;
    if (body.contains("base_width") && body["base_width"].get<int>() <= 0) {
      throw Error(Errc::InvalidArgument, "base_width must be positive");
    }
    const auto job = impl_->jobs.submit(JobKind::Generate, body, idempotency_key(req));
    send_json(res, 202, {{"job_id", job.id}, {"scene_url", "/scenes/" + job.id}});
  }));

  // ---- scenes ----
  srv.Get("/scenes/" + id_re, guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (const auto doc = impl_->store.get_json("sheets", id)) {
      send_json(res, 200, *doc);
      return;
    }
    const auto job = impl_->jobs.get(id);
    if (!job || job->kind != JobKind::Generate) throw Error(Errc::NotFound, "unknown scene " + id);
    send_error(res, 409, "NotReady", "generate job is " + std::string(to_string(job->state)),
               {{"job_id", id}, {"state", to_string(job->state)}});
  }));
  srv.Get("/scenes/" + id_re + "/sheet.png", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!impl_->store.has_json("sheets", id)) throw Error(Errc::NotFound, "unknown scene " + id);
    send_file(res, impl_->store.get_file(fs::path("sheets") / (id + ".png")), "image/png", "sheet");
  }));
  srv.Get("/scenes/" + id_re + "/frames/([0-9]+)\\.png", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!impl_->store.has_json("sheets", id)) throw Error(Errc::NotFound, "unknown scene " + id);
    send_file(res, impl_->store.get_file(fs::path("frames") / id / (std::string(req.matches[2]) + ".png")), "image/png",
              "frame");
  }));

  // ---- evaluations and reports ----
  srv.Post("/evaluations", guarded([this](const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    const std::string kind = body.value("kind", "");
    if (kind != "align" && kind != "consistency" && kind != "count_bench" && kind != "judge") {
      throw Error(Errc::InvalidArgument, "kind must be align, consistency, count_bench or judge");
    }
    const auto job = impl_->jobs.submit(JobKind::Evaluate, body, idempotency_key(req));
    send_json(res, 202, {{"job_id", job.id}, {"report_url", "/reports/" + job.id}});
  }));
  srv.Get("/reports/" + id_re + "\\.(csv|md)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string ext = req.matches[2];
    send_file(res, impl_->store.get_file(fs::path("reports") / (std::string(req.matches[1]) + "." + ext)),
              ext == "csv" ? "text/csv" : "text/markdown", "report");
  }));
  srv.Get("/reports/" + id_re, guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (const auto doc = impl_->store.get_json("reports", id)) {
      send_json(res, 200, *doc);
      return;
    }
    const auto job = impl_->jobs.get(id);
    if (!job || job->kind != JobKind::Evaluate) throw Error(Errc::NotFound, "unknown report " + id);
    send_error(res, 409, "NotReady", "evaluation job is " + std::string(to_string(job->state)),
               {{"job_id", id}, {"state", to_string(job->state)}});
  }));

  // ---- dataset export ----
  srv.Post("/datasets/exports", guarded([this](const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    if (!body.contains("records_path")) throw Error(Errc::InvalidArgument, "records_path is required");
    const auto job = impl_->jobs.submit(JobKind::DatasetExport, body, idempotency_key(req));
    send_json(res, 202, {{"job_id", job.id}});
  }));

  // ---- blobs ----
  srv.Post("/blobs", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string hash = impl_->store.put_blob(req.body);
    send_json(res, 201, {{"sha256", hash}, {"url", "/blobs/" + hash}});
  }));
  srv.Get("/blobs/([0-9a-f]{64})", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_file(res, impl_->store.get_blob(req.matches[1]), "application/octet-stream", "blob");
  }));

  // ---- surveys ----
  srv.Post("/surveys", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const auto scenes = body.at("scenes").get<std::vector<std::string>>();
    const auto methods = body.at("methods").get<std::vector<std::string>>();
    if (methods.size() != 2) throw Error(Errc::InvalidArgument, "methods must list exactly two names");
    std::vector<StudyAspect> aspects(std::begin(kAllStudyAspects), std::end(kAllStudyAspects));
    if (body.contains("aspects")) {
      aspects.clear();
      for (const auto& a : body["aspects"]) aspects.push_back(study_aspect_from_string(a.get<std::string>()));
    }
    const auto items = build_survey(scenes, {methods[0], methods[1]}, aspects, body.value("seed", std::uint64_t{0}),
                                    body.value("time_limit", impl_->options.survey_time_limit));
    const std::string id = new_ulid();
    impl_->store.put_json("surveys", id, {{"survey_id", id}, {"methods", methods}, {"ours", methods[0]}, {"items", items}});
    send_json(res, 201, {{"survey_id", id}, {"item_count", items.size()}});
  }));
  srv.Get("/surveys/" + id_re, guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, impl_->load_survey(req.matches[1]));
  }));
  srv.Get("/surveys/" + id_re + "/next", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const json survey = impl_->load_survey(id);
    const std::string respondent = req.has_param("respondent") ? req.get_param_value("respondent") : "";
    std::set<std::string> answered;
    for (const auto& r : impl_->load_responses(id)) {
      if (r.value("respondent", "") == respondent) answered.insert(r.at("item_id").get<std::string>());
    }
    const auto& items = survey.at("items");
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto item = items[i].get<SurveyItem>();
      if (answered.contains(item.item_id)) continue;
      json out = items[i];
      out["question"] = question_text(item.aspect);
      out["position"] = i + 1;
      out["item_count"] = items.size();
      send_json(res, 200, out);
      return;
    }
    res.status = 204;
  }));
  srv.Post("/surveys/" + id_re + "/responses", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const json survey = impl_->load_survey(id);
    const json body = parse_body(req);
    const auto response = body.get<SurveyResponse>();
    bool known = false;
    double limit = impl_->options.survey_time_limit;
    for (const auto& it : survey.at("items")) {
      if (it.at("item_id") == response.item_id) {
        known = true;
        limit = it.value("time_limit_seconds", limit);
      }
    }
    if (!known) {
      send_error(res, 422, "UnknownItem", "unknown survey item " + response.item_id);
      return;
    }
    json line = response;
    line["respondent"] = body.value("respondent", "");
    auto lock = impl_->store.lock_entity("survey:" + id);
    const fs::path rel = fs::path("surveys") / (id + ".responses.jsonl");
    std::string text = impl_->store.get_file(rel).value_or("");
    text += line.dump() + "\n";
    impl_->store.put_file(rel, text);
    const bool counted = response.choice.has_value() && response.elapsed_seconds >= 0.0 && response.elapsed_seconds <= limit;
    send_json(res, 201, {{"accepted", true}, {"counted", counted}});
  }));
  srv.Get("/surveys/" + id_re + "/tally", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const json survey = impl_->load_survey(id);
    const auto items = survey.at("items").get<std::vector<SurveyItem>>();
    std::vector<SurveyResponse> responses;
    for (const auto& r : impl_->load_responses(id)) responses.push_back(r.get<SurveyResponse>());
    const auto tally = tally_survey(items, responses, survey.at("ours").get<std::string>());
    json out = tally;
    out["survey_id"] = id;
    out["responses"] = responses.size();
    send_json(res, 200, out);
  }));
}

Service::~Service() { stop(); }

RecoveryStats Service::start() {
  const auto stats = impl_->jobs.recover();
  impl_->jobs.start();
  return stats;
}

bool Service::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int Service::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

void Service::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
  impl_->jobs.stop();
}

Store& Service::store() { return impl_->store; }

JobManager& Service::jobs() { return impl_->jobs; }

json Service::run_job(const Job& job) {
  switch (job.kind) {
    case JobKind::Plan: return impl_->run_plan(job);
    case JobKind::Generate: return impl_->run_generate(job);
    case JobKind::Evaluate: return impl_->run_evaluate(job);
    case JobKind::DatasetExport: return impl_->run_dataset_export(job);
  }
  throw Error(Errc::InvalidArgument, "unknown job kind");
}

}  // namespace storyframe::service
