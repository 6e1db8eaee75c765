// storyframe: command-line front end for planning, generation, codec,
// evaluation, dataset and survey tools, and the HTTP service.

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <memory>

#include <nlohmann/json.hpp>

#include "storyframe/config.hpp"
#include "storyframe/dataset.hpp"
#include "storyframe/error.hpp"
#include "storyframe/evaluation.hpp"
#include "storyframe/fs_util.hpp"
#include "storyframe/generation.hpp"
#include "storyframe/http_backends.hpp"
#include "storyframe/judge.hpp"
#include "storyframe/planning.hpp"
#include "storyframe/rng.hpp"
#include "storyframe/report.hpp"
#include "storyframe/service/service.hpp"
#include "storyframe/sheet_codec.hpp"
#include "storyframe/survey.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace storyframe;

namespace {

struct Globals {
  std::string config_path;
  bool mock = false;
  bool json_errors = false;
  std::uint64_t seed = 0;
  int jobs = 1;
  Config config;
};

int exit_code_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Usage: return 1;
    case ErrorCategory::Validation: return 2;
    case ErrorCategory::Backend: return 3;
    case ErrorCategory::Io: return 4;
  }
  return 1;
}

std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Usage: return "usage";
    case ErrorCategory::Validation: return "validation";
    case ErrorCategory::Backend: return "backend";
    case ErrorCategory::Io: return "io";
  }
  return "usage";
}

LayoutSpec layout_of(const Globals& g) { return layout_from_config(g.config); }

BackendSettings settings_of(const Globals& g, const std::string& section) {
  BackendSettings s = backend_from_config(g.config, section);
  if (g.mock) s.kind = "mock";
  return s;
}

std::unique_ptr<ChatBackend> make_planner(const Globals& g) {
  const auto s = settings_of(g, "planner");
  if (s.kind == "mock") return std::make_unique<MockChatBackend>(g.seed);
  return std::make_unique<HttpChatBackend>(s, g.config.get_double("planner", "temperature", 0.7), g.seed);
}

std::unique_ptr<ChatBackend> make_judge(const Globals& g) {
  const auto s = settings_of(g, "judge");
  if (s.kind == "mock") return std::make_unique<MockJudgeBackend>(MockJudgeBackend::hashed(g.seed));
  return std::make_unique<HttpChatBackend>(s, g.config.get_double("judge", "temperature", 0.0), g.seed);
}

std::unique_ptr<ImageGenBackend> make_image(const Globals& g, const FaultConfig& faults = {},
                                            MockRenderOptions render = {}) {
  const auto s = settings_of(g, "image");
  if (s.kind == "mock") {
    return std::make_unique<MockImageGenBackend>(layout_of(g), faults, render,
                                                 g.config.get_string("generation", "separator_template", "[SHOT-{k}]"));
  }
  return std::make_unique<HttpImageGenBackend>(s);
}

std::unique_ptr<EmbeddingBackend> make_embedding(const Globals& g) {
  const auto s = settings_of(g, "embedding");
  if (s.kind == "mock") return std::make_unique<MockEmbeddingBackend>();
  return std::make_unique<HttpEmbeddingBackend>(s, static_cast<int>(g.config.get_int("embedding", "dimension", 0)));
}

GenerationOptions generation_options(const Globals& g) {
  GenerationOptions o;
  o.layout = layout_of(g);
  o.base_width = static_cast<int>(g.config.get_int("generation", "base_width", o.base_width));
  o.separator_template = g.config.get_string("generation", "separator_template", o.separator_template);
  return o;
}

void write_text(const fs::path& path, const std::string& text) { write_file_atomic(path, text); }

// Frames and plan saved by `generate`.
struct SceneDir {
  ScenePlan plan;
  std::vector<Image> frames;
  std::vector<std::string> frame_paths;
};

SceneDir load_scene_dir(const fs::path& dir) {
  SceneDir s;
  const json result = json::parse(read_file(dir / "result.json"));
  s.plan = result.at("plan").get<ScenePlan>();
  const int n = result.at("frame_count").get<int>();
  for (int k = 1; k <= n; ++k) {
    const fs::path p = dir / "frames" / (std::to_string(k) + ".png");
    s.frames.push_back(read_png(p));
    s.frame_paths.push_back(p.string());
  }
  return s;
}

void emit_tables(const std::vector<Table>& tables, const json& report, const std::string& out_dir) {
  std::string md;
  std::string csv;
  for (const auto& t : tables) {
    if (!md.empty()) md += "\n";
    md += t.to_markdown();
    if (!csv.empty()) csv += "\n";
    csv += t.to_csv();
  }
  std::cout << md;
  if (!out_dir.empty()) {
    write_text(fs::path(out_dir) / "report.md", md);
    write_text(fs::path(out_dir) / "report.csv", csv);
    write_text(fs::path(out_dir) / "report.json", report.dump(2) + "\n");
  }
}

std::vector<SceneRecord> load_records(const std::string& path) { return JsonlRecordSource(path).load(); }

void save_records(const std::string& path, const std::vector<SceneRecord>& records) {
  if (path.empty() || path == "-") {
    std::cout << records_to_jsonl(records);
  } else {
    write_text(path, records_to_jsonl(records));
  }
}

// Offline refinement stand-in: returns the description it was given.
class EchoRefiner : public ChatBackend {
 public:
  std::string complete(const MessageList& messages) override {
    const std::string& text = messages.back().content;
    const std::string marker = "Scene description:\n";
    const auto pos = text.rfind(marker);
    return pos == std::string::npos ? text : text.substr(pos + marker.size());
  }
};

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const std::string part = text.substr(start, end - start);
    const auto dots = part.find("..");
    try {
      if (dots != std::string::npos) {
        const int lo = std::stoi(part.substr(0, dots));
        const int hi = std::stoi(part.substr(dots + 2));
        for (int v = lo; v <= hi; ++v) out.push_back(v);
      } else if (!part.empty()) {
        out.push_back(std::stoi(part));
      }
    } catch (const std::exception&) {
      throw Error(Errc::InvalidArgument, "bad integer list: " + text);
    }
    start = end + 1;
  }
  return out;
}

service::Service* g_running_service = nullptr;

void on_signal(int) {
  if (g_running_service != nullptr) g_running_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene planning and multi-keyframe sheet tools"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "INI config file");
  app.add_flag("--mock", g.mock, "Use offline mock backends regardless of config");
  app.add_flag("--json", g.json_errors, "Print errors as JSON on stderr");
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_option("--jobs", g.jobs, "Parallel workers for batch commands")->check(CLI::PositiveNumber);

  // plan
  auto* plan_cmd = app.add_subcommand("plan", "Plan a scene description into a script");
  std::string plan_desc, plan_strategy = "ie", plan_exemplars, plan_out;
  bool plan_as_json = false;
  plan_cmd->add_option("description", plan_desc, "Scene description")->required();
  plan_cmd->add_option("--strategy", plan_strategy, "g | i | ie");
  plan_cmd->add_option("--exemplars", plan_exemplars, "JSON file of exemplars");
  plan_cmd->add_option("-o,--out", plan_out, "Write the script here instead of stdout");
  plan_cmd->add_flag("--as-json", plan_as_json, "Print the plan as JSON");

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "Render a script into a keyframe sheet");
  std::string gen_script, gen_out = "out", gen_fault;
  int gen_width = 0;
  gen_cmd->add_option("script", gen_script, "Script text file")->required();
  gen_cmd->add_option("--width", gen_width, "Base width before rounding");
  gen_cmd->add_option("-o,--out", gen_out, "Output directory");
  gen_cmd->add_option("--fault", gen_fault, "Mock fault config JSON file");

  // compose
  auto* compose_cmd = app.add_subcommand("compose", "Stack frames into a bordered sheet");
  std::vector<std::string> compose_frames;
  std::string compose_out = "sheet.png";
  int compose_width = 0;
  compose_cmd->add_option("frames", compose_frames, "Frame PNGs in order")->required();
  compose_cmd->add_option("-o,--out", compose_out, "Sheet PNG path");
  compose_cmd->add_option("--width", compose_width, "Target width (default: smallest fitting multiple)");

  // split
  auto* split_cmd = app.add_subcommand("split", "Split a sheet into frames");
  std::string split_sheet_path, split_method = "checker", split_out = "frames";
  int split_expect = 0;
  split_cmd->add_option("sheet", split_sheet_path, "Sheet PNG")->required();
  split_cmd->add_option("--method", split_method, "checker | rowdiff")->check(CLI::IsMember({"checker", "rowdiff"}));
  split_cmd->add_option("--expect", split_expect, "Expected frame count (rowdiff)");
  split_cmd->add_option("-o,--out", split_out, "Output directory");

  // count
  auto* count_cmd = app.add_subcommand("count", "Print the number of frames in a sheet");
  std::string count_sheet;
  int count_expect = 0;
  count_cmd->add_option("sheet", count_sheet, "Sheet PNG")->required();
  count_cmd->add_option("--expect", count_expect, "Treat as borderless and count with rowdiff");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluation metrics and studies");
  eval_cmd->require_subcommand(1);
  std::string eval_out;
  eval_cmd->add_option("-o,--out", eval_out, "Directory for report.json/.csv/.md");
  auto* align_cmd = eval_cmd->add_subcommand("align", "Text-image alignment of generated scenes");
  auto* cons_cmd = eval_cmd->add_subcommand("consistency", "Pairwise frame distance of generated scenes");
  std::vector<std::string> eval_scenes;
  std::string eval_method = "ours";
  for (auto* c : {align_cmd, cons_cmd}) {
    c->add_option("scenes", eval_scenes, "Directories written by generate")->required();
    c->add_option("--method", eval_method, "Row label");
  }
  auto* bench_cmd = eval_cmd->add_subcommand("count-bench", "Frame-count accuracy per shot count");
  std::string bench_mode = "checker", bench_counts = "3..10";
  int bench_trials = 25;
  double bench_fault = 0.0;
  bool bench_heavy = false;
  bench_cmd->add_option("--mode", bench_mode, "checker | rowdiff")->check(CLI::IsMember({"checker", "rowdiff", "both"}));
  bench_cmd->add_option("--trials", bench_trials, "Trials per shot count")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--counts", bench_counts, "Shot counts, e.g. 3..10 or 3,5,7");
  bench_cmd->add_option("--fault", bench_fault, "Mock missing-border rate")->check(CLI::Range(0.0, 1.0));
  bench_cmd->add_flag("--heavy-texture", bench_heavy, "Heavily textured mock frames");
  auto* judge_cmd = eval_cmd->add_subcommand("judge", "Pairwise judge preference");
  std::vector<std::string> judge_pairs;
  judge_cmd->add_option("pairs", judge_pairs, "ours_dir:baseline_dir per scene")->required();
  judge_cmd->add_option("--method", eval_method, "Row label");

  // dataset
  auto* ds_cmd = app.add_subcommand("dataset", "Dataset construction");
  ds_cmd->require_subcommand(1);
  std::string ds_in, ds_out;
  int ds_min = 2, ds_max = 10, ds_target = 1000;
  auto* ds_filter = ds_cmd->add_subcommand("filter", "Keep multi-shot records");
  auto* ds_balance = ds_cmd->add_subcommand("balance", "Balance records across shot counts 3..10");
  auto* ds_enrich = ds_cmd->add_subcommand("enrich", "Refine descriptions and write extraction prompts");
  auto* ds_export = ds_cmd->add_subcommand("export", "Write training sheets, prompts and a manifest");
  std::string ds_prompts_out;
  for (auto* c : {ds_filter, ds_balance, ds_enrich, ds_export}) {
    c->add_option("--in", ds_in, "Records JSONL")->required();
    c->add_option("-o,--out", ds_out, c == ds_export ? "Output directory" : "Output JSONL (default stdout)");
  }
  ds_filter->add_option("--min", ds_min, "Minimum shots");
  ds_filter->add_option("--max", ds_max, "Maximum shots");
  ds_balance->add_option("--target", ds_target, "Number of records to keep");
  ds_enrich->add_option("--prompts-out", ds_prompts_out, "Write attribute prompts JSON per record here");
  ds_export->required(false);

  // survey
  auto* sv_cmd = app.add_subcommand("survey", "Two-alternative forced-choice surveys");
  sv_cmd->require_subcommand(1);
  auto* sv_build = sv_cmd->add_subcommand("build", "Create survey items");
  auto* sv_tally = sv_cmd->add_subcommand("tally", "Tally responses");
  std::string sv_scenes, sv_methods = "ours,baseline", sv_aspects, sv_out, sv_items, sv_responses, sv_ours;
  double sv_limit = kDefaultTimeLimitSeconds;
  sv_build->add_option("--scenes", sv_scenes, "File with one scene id per line")->required();
  sv_build->add_option("--methods", sv_methods, "ours,baseline");
  sv_build->add_option("--aspects", sv_aspects, "Comma separated aspects (default all four)");
  sv_build->add_option("--time-limit", sv_limit, "Seconds per item")->check(CLI::PositiveNumber);
  sv_build->add_option("-o,--out", sv_out, "Items JSON (default stdout)");
  sv_tally->add_option("--items", sv_items, "Items JSON from survey build")->required();
  sv_tally->add_option("--responses", sv_responses, "Responses JSONL")->required();
  sv_tally->add_option("--ours", sv_ours, "Method counted as ours (default first method)");
  sv_tally->add_option("-o,--out", sv_out, "Directory for report files");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  std::string serve_addr, serve_root, serve_ui;
  int serve_workers = 0;
  serve_cmd->add_option("--addr", serve_addr, "host:port (default from config, 127.0.0.1:8080)");
  serve_cmd->add_option("--root", serve_root, "Store directory");
  serve_cmd->add_option("--workers", serve_workers, "Job workers");
  serve_cmd->add_option("--ui-dir", serve_ui, "Static directory served at /ui");

  // bench
  auto* bench_top = app.add_subcommand("bench", "Micro benchmarks");
  bench_top->require_subcommand(1);
  auto* bench_codec = bench_top->add_subcommand("codec", "Compose/split round trip and detection throughput");
  int codec_frames = 6, codec_iterations = 20;
  bench_codec->add_option("--frames", codec_frames, "Frames per sheet")->check(CLI::PositiveNumber);
  bench_codec->add_option("--iterations", codec_iterations, "Sheets")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (!g.config_path.empty()) g.config = Config::load(g.config_path);

    if (plan_cmd->parsed()) {
      std::vector<Exemplar> exemplars = default_exemplars();
      if (!plan_exemplars.empty()) exemplars = exemplars_from_json(read_file(plan_exemplars));
      auto backend = make_planner(g);
      PlanningOptions po;
      po.max_repairs = static_cast<int>(g.config.get_int("planner", "max_repairs", po.max_repairs));
      const auto outcome = plan_scene(plan_desc, parse_strategy(plan_strategy), exemplars, *backend, po);
      const std::string text = plan_as_json ? json(outcome.plan).dump(2) + "\n" : serialize_script(outcome.plan);
      if (plan_out.empty()) {
        std::cout << text;
      } else {
        write_text(plan_out, text);
      }
      return 0;
    }

    if (gen_cmd->parsed()) {
      const ScenePlan plan = parse_script(read_file(gen_script));
      GenerationOptions opts = generation_options(g);
      if (gen_width > 0) opts.base_width = gen_width;
      FaultConfig faults;
      if (!gen_fault.empty()) faults = json::parse(read_file(gen_fault)).get<FaultConfig>();
      auto backend = make_image(g, faults);
      const auto result = generate_keyframes(plan, *backend, g.seed, opts);
      const fs::path out(gen_out);
      write_png(out / "sheet.png", result.sheet.image);
      for (std::size_t k = 0; k < result.frames.size(); ++k) {
        write_png(out / "frames" / (std::to_string(k + 1) + ".png"), result.frames[k]);
      }
      json summary = result_summary_json(result);
      summary["plan"] = plan;
      write_text(out / "sheet.json", sheet_sidecar(result.sheet, result.boundary, gen_script).dump(2) + "\n");
      write_text(out / "result.json", summary.dump(2) + "\n");
      std::cout << json{{"count_ok", result.count_ok},
                        {"frame_count", result.frames.size()},
                        {"shot_count", plan.shots.size()},
                        {"out", out.string()}}
                       .dump()
                << "\n";
      return 0;
    }

    if (compose_cmd->parsed()) {
      const LayoutSpec layout = layout_of(g);
      std::vector<Image> frames;
      for (const auto& f : compose_frames) frames.push_back(read_png(f));
      const int width = compose_width > 0 ? compose_width : uniform_target_width(frames, layout);
      for (auto& f : frames) f = normalize_frame(f, layout, width);
      const Sheet sheet = compose_sheet(frames, layout);
      write_png(compose_out, sheet.image);
      std::cout << sheet.image.width() << "x" << sheet.image.height() << "\n";
      return 0;
    }

    if (split_cmd->parsed()) {
      const Sheet sheet{read_png(split_sheet_path), layout_of(g), std::nullopt};
      BoundaryReport report;
      if (split_method == "rowdiff") {
        if (split_expect < 1) throw Error(Errc::InvalidArgument, "--expect N is required with --method rowdiff");
        report = detect_borders_rowdiff(sheet, split_expect);
      } else {
        report = detect_borders_checker(sheet);
      }
      const auto frames = split_sheet(sheet, report);
      for (std::size_t k = 0; k < frames.size(); ++k) {
        write_png(fs::path(split_out) / (std::to_string(k + 1) + ".png"), frames[k]);
      }
      std::cout << frames.size() << "\n";
      return 0;
    }

    if (count_cmd->parsed()) {
      const Sheet sheet{read_png(count_sheet), layout_of(g), std::nullopt};
      std::optional<int> expected;
      if (count_expect > 0) expected = count_expect;
      std::cout << count_frames(sheet, expected) << "\n";
      return 0;
    }

    if (eval_cmd->parsed()) {
      if (align_cmd->parsed() || cons_cmd->parsed()) {
        const bool align = align_cmd->parsed();
        auto backend = make_embedding(g);
        json scenes = json::array();
        std::vector<AlignmentReport> reports;
        std::vector<std::optional<double>> consistency;
        for (const auto& dir : eval_scenes) {
          const auto s = load_scene_dir(dir);
          json entry{{"scene", dir}};
          const int chars = static_cast<int>(s.plan.characters.size());
          if (align) {
            std::vector<std::string> texts;
            for (const auto& shot : s.plan.shots) texts.push_back(shot.description);
            const auto r = clip_alignment(s.frames, texts, *backend, chars);
            entry["per_shot"] = r.per_shot;
            entry["mean"] = r.mean;
            entry["character_count_bucket"] = r.character_count_bucket;
            reports.push_back(r);
          } else {
            reports.push_back({{}, 0.0, character_bucket(chars)});
          }
          std::optional<double> c;
          if (s.frames.size() >= 2) c = consistency_score(s.frames, *backend);
          entry["consistency"] = c ? json(*c) : json(nullptr);
          consistency.push_back(c);
          scenes.push_back(entry);
        }
        auto summary = summarize_alignment(eval_method, reports, consistency);
        if (!align) summary.clip_by_bucket.clear();
        emit_tables({alignment_table({summary})}, {{"kind", align ? "align" : "consistency"}, {"scenes", scenes}},
                    eval_out);
        return 0;
      }
      if (bench_cmd->parsed()) {
        std::vector<std::pair<std::string, std::vector<BenchmarkRow>>> table_rows;
        json report{{"kind", "count_bench"}, {"runs", json::array()}};
        const std::vector<std::string> modes =
            bench_mode == "both" ? std::vector<std::string>{"checker", "rowdiff"} : std::vector<std::string>{bench_mode};
        for (const auto& mode : modes) {
          BenchmarkOptions bo;
          bo.generation = generation_options(g);
          bo.shot_counts = parse_int_list(bench_counts);
          bo.trials = bench_trials;
          bo.seed = g.seed;
          bo.jobs = g.jobs;
          bo.mode = mode == "checker" ? CountingMode::Checkerboard : CountingMode::RowDiff;
          FaultConfig faults;
          faults.missing_border_rate = bench_fault;
          faults.rng_seed = g.seed;
          MockRenderOptions render;
          render.bordered = bo.mode == CountingMode::Checkerboard;
          if (bench_heavy) render.texture_amplitude = kHeavyTextureAmplitude;
          auto backend = make_image(g, faults, render);
          const auto rows = frame_count_benchmark({}, *backend, bo);
          json run{{"mode", mode}, {"rows", json::array()}};
          for (const auto& r : rows) {
            run["rows"].push_back(
                {{"shot_count", r.shot_count}, {"trials", r.trials}, {"correct", r.correct}, {"accuracy", r.accuracy}});
          }
          report["runs"].push_back(run);
          table_rows.emplace_back(mode, rows);
        }
        emit_tables({count_accuracy_table(table_rows)}, report, eval_out);
        return 0;
      }
      if (judge_cmd->parsed()) {
        std::vector<ScenePair> pairs;
        for (const auto& spec : judge_pairs) {
          const auto colon = spec.find(':');
          if (colon == std::string::npos) throw Error(Errc::InvalidArgument, "pair must be ours_dir:baseline_dir");
          ScenePair p;
          p.scene_id = spec;
          p.ours = load_scene_dir(spec.substr(0, colon)).frame_paths;
          p.baseline = load_scene_dir(spec.substr(colon + 1)).frame_paths;
          pairs.push_back(std::move(p));
        }
        auto judge = make_judge(g);
        const auto outcome = run_pairwise_judging(std::move(pairs), *judge, g.seed, g.jobs);
        std::vector<std::string> raw_columns;
        for (JudgeAspect a : kAllJudgeAspects) raw_columns.emplace_back(to_string(a));
        emit_tables({preference_table({{eval_method, outcome.folded}},
                                      std::vector<std::string>(std::begin(kFoldedJudgeColumns), std::end(kFoldedJudgeColumns)),
                                      "Judge preference"),
                     preference_table({{eval_method, outcome.raw}}, raw_columns, "Judge preference by aspect")},
                    {{"kind", "judge"}, {"raw", outcome.raw}, {"folded", outcome.folded}}, eval_out);
        return 0;
      }
    }

    if (ds_cmd->parsed()) {
      const auto records = load_records(ds_in);
      if (ds_filter->parsed()) {
        save_records(ds_out, filter_multishot(records, ds_min, ds_max));
      } else if (ds_balance->parsed()) {
        const auto kept = balance_by_shot_count(records, ds_target, g.seed);
        save_records(ds_out, kept);
        json hist = json::object();
        for (const auto& [n, c] : shot_count_histogram(kept)) hist[std::to_string(n)] = c;
        std::cerr << hist.dump() << "\n";
      } else if (ds_enrich->parsed()) {
        std::unique_ptr<ChatBackend> refiner;
        if (settings_of(g, "planner").kind == "mock") {
          refiner = std::make_unique<EchoRefiner>();
        } else {
          refiner = make_planner(g);
        }
        std::vector<SceneRecord> out;
        json prompts = json::object();
        const fs::path base = fs::path(ds_in).parent_path();
        for (auto r : records) {
          if (r.plot && !r.plot->empty() && !r.scene_description.empty()) {
            r = apply_refinement(r, refiner->complete(build_coref_prompt(r.scene_description, *r.plot)));
          }
          if (!ds_prompts_out.empty()) {
            std::map<std::string, std::vector<std::string>> portraits;
            for (const auto& [name, refs] : select_portraits(r)) {
              for (const auto& ref : refs) {
                const Image frame = read_png(base / r.keyframes.at(static_cast<std::size_t>(ref.frame_index)));
                const fs::path crop = fs::path(ds_prompts_out) / "portraits" /
                                      (r.scene_id + "_" + name + "_" + std::to_string(ref.frame_index + 1) + ".png");
                write_png(crop, crop_portrait(frame, ref.bbox));
                portraits[name].push_back(crop.string());
              }
            }
            const auto ap = build_attribute_prompts(r, portraits);
            json chars = json::object();
            for (const auto& [name, msgs] : ap.character_prompts) chars[name] = msgs;
            prompts[r.scene_id] = {{"setting", ap.setting_prompt}, {"shots", ap.shot_prompts}, {"characters", chars}};
          }
          out.push_back(std::move(r));
        }
        if (!ds_prompts_out.empty()) write_text(fs::path(ds_prompts_out) / "prompts.json", prompts.dump(2) + "\n");
        save_records(ds_out, out);
      } else if (ds_export->parsed()) {
        ExportOptions eo;
        eo.records_dir = fs::path(ds_in).parent_path();
        eo.output_dir = ds_out.empty() ? fs::path("export") : fs::path(ds_out);
        eo.jobs = g.jobs;
        eo.separator_template = generation_options(g).separator_template;
        const auto manifest = export_training_pairs(records, layout_of(g), eo);
        json hist = json::object();
        for (const auto& [n, c] : manifest.histogram) hist[std::to_string(n)] = c;
        std::cout << json{{"entries", manifest.entries.size()}, {"histogram", hist}}.dump() << "\n";
      }
      return 0;
    }

    if (sv_cmd->parsed()) {
      if (sv_build->parsed()) {
        std::vector<std::string> scenes;
        const std::string text = read_file(sv_scenes);
        std::size_t start = 0;
        while (start < text.size()) {
          auto end = text.find('\n', start);
          if (end == std::string::npos) end = text.size();
          std::string line = text.substr(start, end - start);
          while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
          if (!line.empty()) scenes.push_back(line);
          start = end + 1;
        }
        const auto comma = sv_methods.find(',');
        if (comma == std::string::npos) throw Error(Errc::InvalidArgument, "--methods needs ours,baseline");
        std::vector<StudyAspect> aspects(std::begin(kAllStudyAspects), std::end(kAllStudyAspects));
        if (!sv_aspects.empty()) {
          aspects.clear();
          std::size_t s = 0;
          while (s <= sv_aspects.size()) {
            auto e = sv_aspects.find(',', s);
            if (e == std::string::npos) e = sv_aspects.size();
            aspects.push_back(study_aspect_from_string(sv_aspects.substr(s, e - s)));
            s = e + 1;
          }
        }
        const auto items = build_survey(scenes, {sv_methods.substr(0, comma), sv_methods.substr(comma + 1)}, aspects,
                                        g.seed, sv_limit);
        const std::string doc = json(items).dump(2) + "\n";
        if (sv_out.empty()) {
          std::cout << doc;
        } else {
          write_text(sv_out, doc);
        }
        return 0;
      }
      if (sv_tally->parsed()) {
        const auto items = json::parse(read_file(sv_items)).get<std::vector<SurveyItem>>();
        if (items.empty()) throw Error(Errc::EmptyInput, "no survey items");
        const auto responses = parse_responses_jsonl(read_file(sv_responses));
        const std::string ours = sv_ours.empty() ? items.front().left_method < items.front().right_method
                                                        ? items.front().left_method
                                                        : items.front().right_method
                                                 : sv_ours;
        const auto tally = tally_survey(items, responses, ours);
        std::vector<std::string> columns;
        for (const auto& a : tally.per_aspect) columns.push_back(a.aspect);
        emit_tables({preference_table({{ours, tally}}, columns, "User preference")}, json(tally), sv_out);
        return 0;
      }
    }

    if (serve_cmd->parsed()) {
      service::ServiceOptions so;
      so.root = serve_root.empty() ? g.config.get_string("service", "root", "store") : serve_root;
      so.workers = serve_workers > 0 ? serve_workers : static_cast<int>(g.config.get_int("service", "workers", 2));
      so.generation = generation_options(g);
      so.planning.max_repairs = static_cast<int>(g.config.get_int("planner", "max_repairs", so.planning.max_repairs));
      so.token = g.config.get_string("service", "token", "");
      so.survey_time_limit = g.config.get_double("survey", "time_limit", so.survey_time_limit);
      const std::string ui = serve_ui.empty() ? g.config.get_string("service", "ui_dir", "") : serve_ui;
      if (!ui.empty()) so.ui_dir = ui;

      service::Backends backends;
      if (g.mock && !g.config.raw("planner", "backend")) {
        backends = service::mock_backends(g.seed, so.generation.layout);
      } else {
        backends.planner = make_planner(g);
        backends.judge = make_judge(g);
        backends.embedding = make_embedding(g);
        backends.image = make_image(g);
        backends.image_is_mock = settings_of(g, "image").kind == "mock";
      }
      std::string addr = serve_addr.empty() ? g.config.get_string("service", "addr", "127.0.0.1:8080") : serve_addr;
      const auto colon = addr.rfind(':');
      if (colon == std::string::npos) throw Error(Errc::InvalidArgument, "--addr must be host:port");
      const std::string host = addr.substr(0, colon);
      const int port = std::stoi(addr.substr(colon + 1));

      service::Service svc(so, backends, &std::cerr);
      const auto stats = svc.start();
      std::cerr << json{{"event", "service_start"},
                        {"addr", addr},
                        {"root", so.root.string()},
                        {"requeued", stats.requeued},
                        {"failed_on_recovery", stats.failed}}
                       .dump()
                << "\n";
      g_running_service = &svc;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      if (!svc.listen(host, port)) throw Error(Errc::IoError, "cannot listen on " + addr);
      g_running_service = nullptr;
      return 0;
    }

    if (bench_codec->parsed()) {
      const LayoutSpec layout = layout_of(g);
      Rng rng(g.seed);
      const int width = 464;
      using clock = std::chrono::steady_clock;
      double compose_ms = 0, detect_ms = 0, split_ms = 0;
      int exact = 0;
      for (int it = 0; it < codec_iterations; ++it) {
        std::vector<Image> frames;
        for (int k = 0; k < codec_frames; ++k) {
          Image f(width, layout.frame_height);
          for (auto& b : f.pixels()) b = static_cast<std::uint8_t>(rng.below(256));
          frames.push_back(std::move(f));
        }
        auto t0 = clock::now();
        const Sheet sheet = compose_sheet(frames, layout);
        auto t1 = clock::now();
        const auto report = detect_borders_checker(sheet);
        auto t2 = clock::now();
        const auto back = split_sheet(sheet, report);
        auto t3 = clock::now();
        compose_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
        detect_ms += std::chrono::duration<double, std::milli>(t2 - t1).count();
        split_ms += std::chrono::duration<double, std::milli>(t3 - t2).count();
        exact += back == frames ? 1 : 0;
      }
      const double n = codec_iterations;
      std::cout << json{{"frames_per_sheet", codec_frames},
                        {"sheets", codec_iterations},
                        {"round_trip_exact", exact},
                        {"compose_ms_per_sheet", compose_ms / n},
                        {"detect_ms_per_sheet", detect_ms / n},
                        {"split_ms_per_sheet", split_ms / n},
                        {"detect_sheets_per_second", detect_ms > 0 ? 1000.0 * n / detect_ms : 0.0}}
                       .dump(2)
                << "\n";
      return 0;
    }
  } catch (const Error& e) {
    const auto cat = category(e.code());
    if (g.json_errors) {
      json err{{"error", to_string(e.code())}, {"category", category_name(cat)}, {"message", e.what()}};
      if (const auto* pe = dynamic_cast<const ScriptParseError*>(&e)) {
        err["issues"] = json::array();
        for (const auto& i : pe->issues()) err["issues"].push_back({{"line", i.line}, {"message", i.message}});
      }
      if (const auto* ve = dynamic_cast<const InvalidPlanError*>(&e)) err["violations"] = violations_json(ve->violations());
      std::cerr << err.dump() << "\n";
    } else {
      std::cerr << "error: " << e.what() << "\n";
    }
    return exit_code_for(cat);
  } catch (const json::exception& e) {
    if (g.json_errors) {
      std::cerr << json{{"error", "DecodeError"}, {"category", "io"}, {"message", e.what()}}.dump() << "\n";
    } else {
      std::cerr << "error: " << e.what() << "\n";
    }
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
