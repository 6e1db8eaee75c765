#include "storyframe/edge_map.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

namespace storyframe {

namespace {

constexpr int kRadius = 2;  // 5x5 kernel

inline int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

void gray_into(const Image& image, std::vector<float>& gray) {
  const auto px = image.pixels();
  gray.resize(static_cast<std::size_t>(image.width()) * image.height());
  for (std::size_t i = 0; i < gray.size(); ++i) {
    gray[i] = 0.299f * px[3 * i] + 0.587f * px[3 * i + 1] + 0.114f * px[3 * i + 2];
  }
}

void blur_into(const std::vector<float>& gray, int width, int height, double sigma, std::vector<float>& tmp,
               std::vector<float>& out) {
  const auto k = gaussian_kernel(sigma, kRadius);
  const float k0 = k[0], k1 = k[1], k2 = k[2], k3 = k[3], k4 = k[4];
  tmp.resize(gray.size());
  out.resize(gray.size());
  // Separable: horizontal then vertical.
  for (int y = 0; y < height; ++y) {
    const float* row = &gray[static_cast<std::size_t>(y) * width];
    float* dst = &tmp[static_cast<std::size_t>(y) * width];
    auto at = [&](int x) { return row[clampi(x, 0, width - 1)]; };
    auto replicated = [&](int x) {
      dst[x] = k0 * at(x - 2) + k1 * at(x - 1) + k2 * at(x) + k3 * at(x + 1) + k4 * at(x + 2);
    };
    const int inner_end = std::max(kRadius, width - kRadius);
    for (int x = 0; x < std::min(kRadius, width); ++x) replicated(x);
    for (int x = kRadius; x < inner_end; ++x) {
      dst[x] = k0 * row[x - 2] + k1 * row[x - 1] + k2 * row[x] + k3 * row[x + 1] + k4 * row[x + 2];
    }
    for (int x = inner_end; x < width; ++x) replicated(x);
  }
  for (int y = 0; y < height; ++y) {
    const float* r[5];
    for (int i = 0; i < 5; ++i) r[i] = &tmp[static_cast<std::size_t>(clampi(y + i - kRadius, 0, height - 1)) * width];
    float* dst = &out[static_cast<std::size_t>(y) * width];
    for (int x = 0; x < width; ++x) {
      dst[x] = k0 * r[0][x] + k1 * r[1][x] + k2 * r[2][x] + k3 * r[3][x] + k4 * r[4][x];
    }
  }
}

// Reused across calls on the same thread; fresh multi-megabyte buffers per
// sheet cost more in page faults than the filtering itself.
struct Scratch {
  std::vector<float> gray, tmp, blurred, magnitude, gx, gy;
  std::vector<std::uint8_t> direction, level;
  std::vector<std::size_t> stack;
};

}  // namespace

std::vector<float> to_gray(const Image& image) {
  std::vector<float> gray;
  gray_into(image, gray);
  return gray;
}

std::vector<float> gaussian_kernel(double sigma, int radius) {
  std::vector<float> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = static_cast<float>(v);
    sum += v;
  }
  for (auto& v : k) v = static_cast<float>(v / sum);
  return k;
}

std::vector<float> gaussian_blur(const std::vector<float>& gray, int width, int height, double sigma) {
  std::vector<float> tmp, out;
  blur_into(gray, width, height, sigma, tmp, out);
  return out;
}

EdgeMap canny_edges(const Image& image, const CannyParams& params) {
  thread_local Scratch s;
  const int w = image.width();
  const int h = image.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  gray_into(image, s.gray);
  blur_into(s.gray, w, h, params.sigma, s.tmp, s.blurred);
  const auto& blurred = s.blurred;

  // Magnitudes stay squared throughout; thresholds are squared to match.
  auto& magnitude = s.magnitude;
  auto& direction = s.direction;  // 0: horizontal gradient, 1: 45deg, 2: vertical, 3: 135deg
  magnitude.resize(n);
  direction.resize(n);
  s.gx.resize(static_cast<std::size_t>(w));
  s.gy.resize(static_cast<std::size_t>(w));
  // Sector edges at 22.5 and 67.5 degrees, compared on |gy|/|gx| so no atan2 is needed.
  const float tan_lo = static_cast<float>(std::tan(std::numbers::pi / 8));
  const float tan_hi = static_cast<float>(std::tan(3 * std::numbers::pi / 8));
  // Magnitudes are non-negative, so their bit patterns order like the values;
  // an integer max keeps the loop vectorizable.
  std::uint32_t max_bits = 0;
  for (int y = 0; y < h; ++y) {
    const float* __restrict up = &blurred[static_cast<std::size_t>(clampi(y - 1, 0, h - 1)) * w];
    const float* __restrict mid = &blurred[static_cast<std::size_t>(y) * w];
    const float* __restrict down = &blurred[static_cast<std::size_t>(clampi(y + 1, 0, h - 1)) * w];
    float* __restrict gx = s.gx.data();
    float* __restrict gy = s.gy.data();
    auto sobel = [&](int l, int x, int r) {
      gx[x] = (up[r] + 2 * mid[r] + down[r]) - (up[l] + 2 * mid[l] + down[l]);
      gy[x] = (down[l] + 2 * down[x] + down[r]) - (up[l] + 2 * up[x] + up[r]);
    };
    sobel(0, 0, std::min(1, w - 1));
    for (int x = 1; x + 1 < w; ++x) sobel(x - 1, x, x + 1);
    if (w > 1) sobel(w - 2, w - 1, w - 1);

    float* __restrict mag_out = &magnitude[static_cast<std::size_t>(y) * w];
    std::uint8_t* __restrict dir_out = &direction[static_cast<std::size_t>(y) * w];
    for (int x = 0; x < w; ++x) {
      const float m = gx[x] * gx[x] + gy[x] * gy[x];
      mag_out[x] = m;
      std::uint32_t bits;
      std::memcpy(&bits, &m, sizeof bits);
      max_bits = std::max(max_bits, bits);
      const float ax = std::abs(gx[x]);
      const float ay = std::abs(gy[x]);
      // Branch-free; noisy input defeats the branch predictor.
      const int past_lo = ay > ax * tan_lo;
      const int past_hi = past_lo & (ay >= ax * tan_hi);
      const int same_sign = gx[x] * gy[x] > 0;
      dir_out[x] = static_cast<std::uint8_t>(2 * past_hi + (past_lo - past_hi) * (3 - 2 * same_sign));
    }
  }
  float max_mag;
  std::memcpy(&max_mag, &max_bits, sizeof max_mag);

  if (max_mag <= 0.0f) return EdgeMap{w, h, std::vector<std::uint8_t>(n, 0)};

  // Non-maximum suppression along the gradient direction, folded together
  // with the double threshold: 0 suppressed or below low, 1 weak, 2 strong.
  const float high = static_cast<float>(params.high_ratio * params.high_ratio) * max_mag;
  const float low = static_cast<float>(params.low_ratio * params.low_ratio) * max_mag;
  static constexpr int kDx[] = {1, 1, 0, -1};
  static constexpr int kDy[] = {0, 1, 1, 1};
  auto mag = [&](int x, int y) -> float {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0f;
    return magnitude[static_cast<std::size_t>(y) * w + x];
  };
  auto classify = [&](float m, float ahead, float behind) {
    // Ties on the forward side keep plateaus one pixel wide.
    const int peak = (m >= ahead) & (m > behind);
    return static_cast<std::uint8_t>(peak * ((m >= low) + (m >= high)));
  };
  auto& cls = s.level;
  cls.resize(n);
  auto edge_pixel = [&](int x, int y) {
    const std::size_t i = static_cast<std::size_t>(y) * w + x;
    const int d = direction[i];
    cls[i] = classify(magnitude[i], mag(x + kDx[d], y + kDy[d]), mag(x - kDx[d], y - kDy[d]));
  };
  for (int y = 0; y < h; ++y) {
    if (y == 0 || y + 1 == h || w < 3) {
      for (int x = 0; x < w; ++x) edge_pixel(x, y);
      continue;
    }
    edge_pixel(0, y);
    edge_pixel(w - 1, y);
    const float* __restrict up = &magnitude[static_cast<std::size_t>(y - 1) * w];
    const float* __restrict mid = &magnitude[static_cast<std::size_t>(y) * w];
    const float* __restrict down = &magnitude[static_cast<std::size_t>(y + 1) * w];
    const std::uint8_t* __restrict dir = &direction[static_cast<std::size_t>(y) * w];
    std::uint8_t* __restrict out = &cls[static_cast<std::size_t>(y) * w];
    // All four neighbour pairs are read and the right one kept by a 0/1
    // weight, which vectorizes; a gather by direction does not.
    for (int x = 1; x + 1 < w; ++x) {
      const int d = dir[x];
      const float s0 = d == 0, s1 = d == 1, s2 = d == 2, s3 = d == 3;
      const float ahead = s0 * mid[x + 1] + s1 * down[x + 1] + s2 * down[x] + s3 * down[x - 1];
      const float behind = s0 * mid[x - 1] + s1 * up[x - 1] + s2 * up[x] + s3 * up[x + 1];
      out[x] = classify(mid[x], ahead, behind);
    }
  }

  EdgeMap map{w, h, std::vector<std::uint8_t>(n, 0)};
  auto& stack = s.stack;
  stack.clear();
  for (std::size_t i = 0; i < n; ++i) {
    if (cls[i] == 2) {
      map.edges[i] = 1;
      stack.push_back(i);
    }
  }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const int x = static_cast<int>(i % w);
    const int y = static_cast<int>(i / w);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx;
        const int ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
        if (!map.edges[j] && cls[j] != 0) {
          map.edges[j] = 1;
          stack.push_back(j);
        }
      }
    }
  }
  return map;
}

}  // namespace storyframe
