#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "storyframe/generation.hpp"
#include "storyframe/image.hpp"

namespace storyframe {

// Seam to a joint text/image embedding model. Vectors must be unit length.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::vector<double> embed_text(const std::string& text) = 0;
  virtual std::vector<double> embed_image(const Image& image) = 0;
  virtual int dimension() const = 0;
  virtual int max_concurrency() const { return 1; }
};

inline constexpr double kUnitNormTolerance = 1e-6;

// Dot product of two unit vectors. Throws Error(BackendContract) when either
// norm is off by more than kUnitNormTolerance or the sizes differ.
double unit_cosine(std::span<const double> a, std::span<const double> b);

struct AlignmentReport {
  std::vector<double> per_shot;
  double mean = 0.0;
  int character_count_bucket = 1;  // 1, 2 or 3 (meaning 3+)
};

// Bucket for per-character-count grouping; 0 characters falls in bucket 1.
int character_bucket(int character_count);

AlignmentReport clip_alignment(const std::vector<Image>& frames, const std::vector<std::string>& shot_texts,
                               EmbeddingBackend& backend, int character_count = 1);

// Mean pairwise (1 - cosine) over all unordered frame pairs. Lower means the
// frames look more alike. Only comparable under one fixed backend.
double consistency_score(const std::vector<Image>& frames, EmbeddingBackend& backend);

// Offline embedding: hashed bag-of-words for text, a 4x4x4 color histogram
// for images, both L2-normalized into 64 dimensions.
class MockEmbeddingBackend : public EmbeddingBackend {
 public:
  std::vector<double> embed_text(const std::string& text) override;
  std::vector<double> embed_image(const Image& image) override;
  int dimension() const override { return 64; }
  int max_concurrency() const override { return 64; }
};

enum class CountingMode { Checkerboard, RowDiff };

std::string_view to_string(CountingMode mode);

struct BenchmarkRow {
  int shot_count = 0;
  int trials = 0;
  int correct = 0;
  double accuracy = 0.0;
};

struct BenchmarkOptions {
  std::vector<int> shot_counts{3, 4, 5, 6, 7, 8, 9, 10};
  int trials = 25;
  CountingMode mode = CountingMode::Checkerboard;
  GenerationOptions generation{};
  std::uint64_t seed = 0;
  int jobs = 1;
};

// For each shot count N, generates `trials` sheets and scores detected frame
// counts against N. Plans are drawn from plans_by_count[N] cyclically, or
// synthesized when that entry is missing. Checkerboard mode requests bordered
// sheets; RowDiff mode requests borderless N * frame_height sheets and counts
// with the adjacent-row difference detector.
std::vector<BenchmarkRow> frame_count_benchmark(const std::map<int, std::vector<ScenePlan>>& plans_by_count,
                                                ImageGenBackend& backend, const BenchmarkOptions& options);

}  // namespace storyframe
