#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <unistd.h>
#include <string>
#include <vector>

#include "storyframe/image.hpp"
#include "storyframe/rng.hpp"
#include "storyframe/sheet_codec.hpp"

namespace storyframe::testing {

inline Image noise_image(int w, int h, Rng& rng) {
  Image img(w, h);
  for (auto& b : img.pixels()) b = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

inline std::vector<Image> noise_frames(int n, int w, const LayoutSpec& layout, Rng& rng) {
  std::vector<Image> frames;
  for (int i = 0; i < n; ++i) frames.push_back(noise_image(w, layout.frame_height, rng));
  return frames;
}

// Pairwise-distinct solid colors.
inline std::vector<Rgb> distinct_colors(int n, Rng& rng) {
  std::vector<Rgb> out;
  while (static_cast<int>(out.size()) < n) {
    const Rgb c{static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                static_cast<std::uint8_t>(rng.below(256))};
    bool seen = false;
    for (const auto& o : out) seen = seen || o == c;
    if (!seen) out.push_back(c);
  }
  return out;
}

// Frames stacked with no borders.
inline Image stack_borderless(const std::vector<Image>& frames) {
  int h = 0;
  for (const auto& f : frames) h += f.height();
  Image out(frames.front().width(), h);
  int y = 0;
  for (const auto& f : frames) {
    out.paste(f, 0, y);
    y += f.height();
  }
  return out;
}

// Top rows of the border bands compose_sheet writes, computed without the library.
inline std::vector<int> composed_border_rows(int n, const LayoutSpec& layout) {
  std::vector<int> rows;
  for (int b = 1; b < n; ++b) rows.push_back(b * layout.frame_height + (b - 1) * layout.border_thickness);
  return rows;
}

inline void overwrite_with_noise(Image& img, int top, int rows, Rng& rng) {
  for (int y = top; y < top + rows; ++y) {
    for (auto& b : img.row(y)) b = static_cast<std::uint8_t>(rng.below(256));
  }
}

// Brute-force rowdiff reference: every adjacent-row difference computed
// directly, then the expected_n - 1 largest taken greedily (ties toward the
// smaller row) with no other cut closer than `window` rows.
inline std::vector<int> rowdiff_reference(const Image& img, int expected_n, int window) {
  const int h = img.height();
  const int w = img.width();
  std::vector<std::pair<double, int>> d;
  for (int r = 0; r + 1 < h; ++r) {
    long sum = 0;
    for (int x = 0; x < w; ++x) {
      const Rgb a = img.at(x, r);
      const Rgb b = img.at(x, r + 1);
      sum += std::abs(a.r - b.r) + std::abs(a.g - b.g) + std::abs(a.b - b.b);
    }
    d.emplace_back(static_cast<double>(sum) / (3.0 * w), r);
  }
  std::vector<int> chosen;
  while (static_cast<int>(chosen.size()) < expected_n - 1) {
    int best = -1;
    double best_v = -1;
    for (const auto& [v, r] : d) {
      bool blocked = false;
      for (int c : chosen) blocked = blocked || std::abs(c - r) < window;
      if (blocked) continue;
      if (v > best_v) {
        best_v = v;
        best = r;
      }
    }
    if (best < 0) break;
    chosen.push_back(best);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

inline std::filesystem::path fresh_temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("storyframe_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace storyframe::testing

namespace storyframe::testing {

// Fresh temp directory removed on scope exit; declare it before anything
// that writes into it.
struct TempDir {
  explicit TempDir(const std::string& name) : path(fresh_temp_dir(name)) {}
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path path;
};

}  // namespace storyframe::testing
