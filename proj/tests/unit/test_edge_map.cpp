#include <doctest.h>

#include <cmath>

#include "storyframe/edge_map.hpp"
#include "storyframe/rng.hpp"

using namespace storyframe;

TEST_CASE("gray conversion uses BT.601 weights") {
  Image img(2, 1);
  img.set(0, 0, {255, 0, 0});
  img.set(1, 0, {10, 20, 30});
  const auto g = to_gray(img);
  CHECK(g[0] == doctest::Approx(0.299 * 255).epsilon(1e-6));
  CHECK(g[1] == doctest::Approx(0.299 * 10 + 0.587 * 20 + 0.114 * 30).epsilon(1e-6));
}

TEST_CASE("gaussian kernel matches the closed form") {
  const auto k = gaussian_kernel(1.4, 2);
  REQUIRE(k.size() == 5);
  double raw[5];
  double sum = 0;
  for (int i = -2; i <= 2; ++i) sum += raw[i + 2] = std::exp(-(i * i) / (2 * 1.4 * 1.4));
  for (int i = 0; i < 5; ++i) CHECK(k[static_cast<std::size_t>(i)] == doctest::Approx(raw[i] / sum).epsilon(1e-6));
  CHECK(k[0] == k[4]);
  CHECK(k[1] == k[3]);
}

TEST_CASE("separable blur equals a direct 5x5 convolution") {
  const int w = 13, h = 9;
  Rng rng(3);
  std::vector<float> gray(static_cast<std::size_t>(w * h));
  for (auto& v : gray) v = static_cast<float>(rng.below(256));
  const auto blurred = gaussian_blur(gray, w, h, 1.4);
  const auto k = gaussian_kernel(1.4, 2);
  auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : v > hi ? hi : v; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
          acc += k[static_cast<std::size_t>(dy + 2)] * k[static_cast<std::size_t>(dx + 2)] *
                 gray[static_cast<std::size_t>(clampi(y + dy, 0, h - 1) * w + clampi(x + dx, 0, w - 1))];
        }
      }
      CHECK(blurred[static_cast<std::size_t>(y * w + x)] == doctest::Approx(acc).epsilon(1e-4));
    }
  }
}

TEST_CASE("flat image has no edges") {
  const auto e = canny_edges(Image(40, 30, Rgb{120, 40, 200}));
  for (auto v : e.edges) CHECK(v == 0);
}

TEST_CASE("vertical step gives a one-pixel-wide vertical edge line") {
  Image img(40, 30, kBlack);
  for (int y = 0; y < 30; ++y) {
    for (int x = 20; x < 40; ++x) img.set(x, y, kWhite);
  }
  const auto e = canny_edges(img);
  for (int y = 0; y < 30; ++y) {
    int count = 0;
    for (int x = 0; x < 40; ++x) {
      if (e.at(x, y)) {
        ++count;
        CHECK((x == 19 || x == 20));
      }
    }
    CHECK(count == 1);
  }
}

TEST_CASE("horizontal step gives a horizontal edge line") {
  Image img(30, 40, kBlack);
  for (int y = 25; y < 40; ++y) {
    for (int x = 0; x < 30; ++x) img.set(x, y, {200, 200, 200});
  }
  const auto e = canny_edges(img);
  for (int x = 0; x < 30; ++x) {
    int count = 0;
    for (int y = 0; y < 40; ++y) {
      if (e.at(x, y)) {
        ++count;
        CHECK((y == 24 || y == 25));
      }
    }
    CHECK(count == 1);
  }
}

TEST_CASE("weak edges survive only when connected to strong ones") {
  // Strong step at x=10; a weak step at x=30 that is isolated.
  Image img(40, 20, kBlack);
  for (int y = 0; y < 20; ++y) {
    for (int x = 10; x < 40; ++x) img.set(x, y, {250, 250, 250});
    for (int x = 30; x < 40; ++x) img.set(x, y, {230, 230, 230});
  }
  const auto e = canny_edges(img);
  bool strong = false, weak = false;
  for (int y = 0; y < 20; ++y) {
    strong = strong || e.at(9, y) || e.at(10, y);
    weak = weak || e.at(29, y) || e.at(30, y);
  }
  CHECK(strong);
  CHECK_FALSE(weak);
}
