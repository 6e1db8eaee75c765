#include "storyframe/evaluation.hpp"

#include <cctype>
#include <cmath>

#include "storyframe/error.hpp"
#include "storyframe/parallel.hpp"
#include "storyframe/rng.hpp"

namespace storyframe {

namespace {

void check_unit(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (std::abs(norm - 1.0) > kUnitNormTolerance) {
    throw Error(Errc::BackendContract, "embedding norm " + std::to_string(norm) + " is not 1");
  }
}

std::vector<double> normalized(std::vector<double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm == 0.0) {
    v.assign(v.size(), 0.0);
    v[0] = 1.0;
    return v;
  }
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace

double unit_cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(Errc::BackendContract, "embedding dimensions differ or are empty");
  }
  check_unit(a);
  check_unit(b);
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot;
}

int character_bucket(int character_count) { return std::clamp(character_count, 1, 3); }

AlignmentReport clip_alignment(const std::vector<Image>& frames, const std::vector<std::string>& shot_texts,
                               EmbeddingBackend& backend, int character_count) {
  if (frames.size() != shot_texts.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(frames.size()) + " frames but " +
                                          std::to_string(shot_texts.size()) + " shot texts");
  }
  if (frames.empty()) throw Error(Errc::LengthMismatch, "alignment needs at least one frame");
  AlignmentReport report;
  report.character_count_bucket = character_bucket(character_count);
  double sum = 0.0;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto image_vec = backend.embed_image(frames[k]);
    const auto text_vec = backend.embed_text(shot_texts[k]);
    report.per_shot.push_back(unit_cosine(image_vec, text_vec));
    sum += report.per_shot.back();
  }
  report.mean = sum / static_cast<double>(report.per_shot.size());
  return report;
}

double consistency_score(const std::vector<Image>& frames, EmbeddingBackend& backend) {
  if (frames.size() < 2) throw Error(Errc::TooFewFrames, "consistency needs at least two frames");
  std::vector<std::vector<double>> vecs;
  vecs.reserve(frames.size());
  for (const auto& f : frames) vecs.push_back(backend.embed_image(f));
  double sum = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    for (std::size_t j = i + 1; j < vecs.size(); ++j) {
      // Equal embeddings are exactly zero apart; rounding in the dot product
      // would otherwise leave a residue of a few ulps.
      const double cos = unit_cosine(vecs[i], vecs[j]);
      sum += vecs[i] == vecs[j] ? 0.0 : 1.0 - cos;
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

std::vector<double> MockEmbeddingBackend::embed_text(const std::string& text) {
  std::vector<double> v(64, 0.0);
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    const std::uint64_t h = fnv1a64(word);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::uint64_t r = mix64(h + i);
      v[i] += static_cast<double>(r % 2001) / 1000.0 - 1.0;
    }
    word.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      flush();
    }
  }
  flush();
  return normalized(std::move(v));
}

std::vector<double> MockEmbeddingBackend::embed_image(const Image& image) {
  std::vector<double> hist(64, 0.0);
  const auto px = image.pixels();
  for (std::size_t i = 0; i < px.size(); i += 3) {
    const int bin = (px[i] >> 6) * 16 + (px[i + 1] >> 6) * 4 + (px[i + 2] >> 6);
    hist[static_cast<std::size_t>(bin)] += 1.0;
  }
  return normalized(std::move(hist));
}

std::string_view to_string(CountingMode mode) {
  return mode == CountingMode::Checkerboard ? "checkerboard" : "rowdiff";
}

std::vector<BenchmarkRow> frame_count_benchmark(const std::map<int, std::vector<ScenePlan>>& plans_by_count,
                                                ImageGenBackend& backend, const BenchmarkOptions& options) {
  if (options.trials < 1) throw Error(Errc::InvalidArgument, "trials must be >= 1");

  struct Task {
    int n;
    int trial;
  };
  std::vector<Task> tasks;
  for (int n : options.shot_counts) {
    if (n < 1) throw Error(Errc::InvalidArgument, "shot counts must be >= 1");
    for (int t = 0; t < options.trials; ++t) tasks.push_back({n, t});
  }

  const GenerationOptions& gen = options.generation;
  const int workers = std::min(options.jobs, backend.max_concurrency());
  const auto detected = parallel_map<int>(tasks.size(), workers, [&](std::size_t i) {
    const Task& task = tasks[i];
    const std::uint64_t seed = options.seed + static_cast<std::uint64_t>(task.n) * 100003ULL +
                               static_cast<std::uint64_t>(task.trial);
    ScenePlan plan;
    const auto found = plans_by_count.find(task.n);
    if (found != plans_by_count.end() && !found->second.empty()) {
      plan = found->second[static_cast<std::size_t>(task.trial) % found->second.size()];
    } else {
      plan = make_synthetic_plan(task.n, seed);
    }

    if (options.mode == CountingMode::Checkerboard) {
      const auto result = generate_keyframes(plan, backend, seed, gen);
      return 1 + static_cast<int>(result.boundary.cut_rows.size());
    }
    const auto prompt = build_generation_prompt(plan, gen.separator_template);
    const int n = static_cast<int>(plan.shots.size());
    const int height = n * gen.layout.frame_height;
    Image image = backend.generate(prompt.text, gen.base_width, height, seed);
    if (image.width() != gen.base_width || image.height() != height) {
      throw Error(Errc::DimensionViolation, "backend returned wrong dimensions for a borderless sheet");
    }
    return count_frames(Sheet{std::move(image), gen.layout, std::nullopt}, n, gen.detector);
  });

  std::vector<BenchmarkRow> rows;
  std::size_t i = 0;
  for (int n : options.shot_counts) {
    std::vector<std::pair<int, int>> pairs;
    for (int t = 0; t < options.trials; ++t, ++i) pairs.emplace_back(n, detected[i]);
    BenchmarkRow row{n, options.trials, 0, frame_count_accuracy(pairs)};
    for (const auto& [e, d] : pairs) row.correct += e == d ? 1 : 0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace storyframe
