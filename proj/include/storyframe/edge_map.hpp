#pragma once

#include <cstdint>
#include <vector>

#include "storyframe/image.hpp"

namespace storyframe {

struct CannyParams {
  double sigma = 1.4;  // 5x5 Gaussian
  double low_ratio = 0.1;   // of the maximum gradient magnitude
  double high_ratio = 0.3;
};

// Binary edge map, row-major, one byte per pixel (1 = edge).
struct EdgeMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> edges;

  bool at(int x, int y) const { return edges[static_cast<std::size_t>(y) * width + x] != 0; }
};

// Luma (BT.601) -> Gaussian blur -> Sobel gradient -> non-maximum
// suppression -> hysteresis. Borders are handled by edge replication.
EdgeMap canny_edges(const Image& image, const CannyParams& params = {});

// Intermediate stages, exposed for testing.
std::vector<float> to_gray(const Image& image);
std::vector<float> gaussian_kernel(double sigma, int radius);
std::vector<float> gaussian_blur(const std::vector<float>& gray, int width, int height, double sigma);

}  // namespace storyframe
