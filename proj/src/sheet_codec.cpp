#include "storyframe/sheet_codec.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include <nlohmann/json.hpp>

#include "storyframe/error.hpp"

namespace storyframe {

void LayoutSpec::check() const {
  if (frame_height <= 0 || border_thickness <= 0 || checker_cell <= 0 || width_multiple <= 0) {
    throw Error(Errc::InvalidLayout, "layout values must be positive");
  }
  if (frame_height % 8 != 0) throw Error(Errc::InvalidLayout, "frame_height must be divisible by 8");
  if (border_thickness % checker_cell != 0) {
    throw Error(Errc::InvalidLayout, "border_thickness must be a multiple of checker_cell");
  }
}

std::string_view to_string(BoundaryMethod method) {
  return method == BoundaryMethod::Checkerboard ? "checkerboard" : "rowdiff";
}

int scaled_width(const Image& img, const LayoutSpec& layout) {
  const double w = static_cast<double>(img.width()) * layout.frame_height / img.height();
  return std::max(1, static_cast<int>(std::lround(w)));
}

int uniform_target_width(const std::vector<Image>& frames, const LayoutSpec& layout) {
  if (frames.empty()) throw Error(Errc::EmptyFrameList, "no frames");
  int widest = 0;
  for (const auto& f : frames) widest = std::max(widest, scaled_width(f, layout));
  return (widest + layout.width_multiple - 1) / layout.width_multiple * layout.width_multiple;
}

namespace {

struct Tap {
  int i0;
  int i1;
  double w1;
};

// Pixel-center aligned bilinear taps for resampling src_len -> dst_len.
std::vector<Tap> bilinear_taps(int src_len, int dst_len) {
  std::vector<Tap> taps(static_cast<std::size_t>(dst_len));
  const double scale = static_cast<double>(src_len) / dst_len;
  for (int d = 0; d < dst_len; ++d) {
    double s = (d + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src_len - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, src_len - 1);
    taps[static_cast<std::size_t>(d)] = {i0, i1, s - i0};
  }
  return taps;
}

Image resize_bilinear(const Image& src, int width, int height) {
  if (src.width() == width && src.height() == height) return src;
  const auto xs = bilinear_taps(src.width(), width);
  const auto ys = bilinear_taps(src.height(), height);
  Image out(width, height);
  auto dst = out.pixels();
  const auto sp = src.pixels();
  const std::size_t stride = static_cast<std::size_t>(src.width()) * 3;
  for (int y = 0; y < height; ++y) {
    const Tap& ty = ys[static_cast<std::size_t>(y)];
    const std::uint8_t* r0 = &sp[static_cast<std::size_t>(ty.i0) * stride];
    const std::uint8_t* r1 = &sp[static_cast<std::size_t>(ty.i1) * stride];
    for (int x = 0; x < width; ++x) {
      const Tap& tx = xs[static_cast<std::size_t>(x)];
      for (int c = 0; c < 3; ++c) {
        const double top = r0[tx.i0 * 3 + c] * (1.0 - tx.w1) + r0[tx.i1 * 3 + c] * tx.w1;
        const double bottom = r1[tx.i0 * 3 + c] * (1.0 - tx.w1) + r1[tx.i1 * 3 + c] * tx.w1;
        const double v = top * (1.0 - ty.w1) + bottom * ty.w1;
        dst[(static_cast<std::size_t>(y) * width + x) * 3 + c] =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

}  // namespace

Image normalize_frame(const Image& img, const LayoutSpec& layout, int target_width) {
  layout.check();
  if (target_width <= 0 || target_width % layout.width_multiple != 0) {
    throw Error(Errc::InvalidWidth, "target width " + std::to_string(target_width) +
                                        " is not a positive multiple of " +
                                        std::to_string(layout.width_multiple));
  }
  const int new_w = scaled_width(img, layout);
  const Image scaled = resize_bilinear(img, new_w, layout.frame_height);
  if (new_w == target_width) return scaled;

  Image out(target_width, layout.frame_height, kBlack);
  if (new_w < target_width) {
    out.paste(scaled, (target_width - new_w) / 2, 0);
    return out;
  }
  const int offset = (new_w - target_width) / 2;
  for (int y = 0; y < layout.frame_height; ++y) {
    auto from = scaled.row(y).subspan(static_cast<std::size_t>(offset) * 3,
                                      static_cast<std::size_t>(target_width) * 3);
    std::copy(from.begin(), from.end(), out.row(y).begin());
  }
  return out;
}

Image render_border(int width, const LayoutSpec& layout) {
  layout.check();
  if (width <= 0) throw Error(Errc::InvalidArgument, "border width must be positive");
  Image band(width, layout.border_thickness);
  const auto [first, second] = layout.checker_colors;
  for (int r = 0; r < layout.border_thickness; ++r) {
    for (int c = 0; c < width; ++c) {
      const int parity = (r / layout.checker_cell + c / layout.checker_cell) % 2;
      band.set(c, r, parity == 0 ? first : second);
    }
  }
  return band;
}

int expected_sheet_height(int n, const LayoutSpec& layout) {
  if (n < 1) throw Error(Errc::InvalidArgument, "frame count must be >= 1");
  return n * layout.frame_height + (n - 1) * layout.border_thickness;
}

Sheet compose_sheet(const std::vector<Image>& frames, const LayoutSpec& layout) {
  layout.check();
  if (frames.empty()) throw Error(Errc::EmptyFrameList, "compose_sheet needs at least one frame");
  const int width = frames.front().width();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].height() != layout.frame_height) {
      throw Error(Errc::HeightMismatch, "frame " + std::to_string(i) + " has height " +
                                            std::to_string(frames[i].height()) + ", expected " +
                                            std::to_string(layout.frame_height));
    }
    if (frames[i].width() != width) {
      throw Error(Errc::WidthMismatch, "frame " + std::to_string(i) + " has width " +
                                           std::to_string(frames[i].width()) + ", expected " +
                                           std::to_string(width));
    }
  }
  const int n = static_cast<int>(frames.size());
  Image image(width, expected_sheet_height(n, layout));
  const Image border = render_border(width, layout);
  int y = 0;
  for (int i = 0; i < n; ++i) {
    if (i > 0) {
      image.paste(border, 0, y);
      y += layout.border_thickness;
    }
    image.paste(frames[static_cast<std::size_t>(i)], 0, y);
    y += layout.frame_height;
  }
  return {std::move(image), layout, n};
}

namespace {

bool near(std::uint8_t a, std::uint8_t b, int tol) { return std::abs(int(a) - int(b)) <= tol; }

// Stops early once the score can no longer reach `floor`.
double checker_score_bounded(const Image& image, int top, const LayoutSpec& layout, int tol,
                             double floor) {
  const int w = image.width();
  const int t = layout.border_thickness;
  const long total = static_cast<long>(w) * t;
  // Largest miss count whose score still compares >= floor, evaluated the same
  // way as the final ratio so an early exit always scores below floor.
  auto passes = [&](long m) { return static_cast<double>(total - m) / total >= floor; };
  long budget = static_cast<long>(std::floor((1.0 - floor) * total));
  while (budget + 1 <= total && passes(budget + 1)) ++budget;
  while (budget >= 0 && !passes(budget)) --budget;
  const auto [first, second] = layout.checker_colors;
  long misses = 0;
  for (int i = 0; i < t; ++i) {
    const auto row = image.row(top + i);
    const int row_parity = (i / layout.checker_cell) % 2;
    for (int c = 0; c < w; ++c) {
      const Rgb& e = ((row_parity + c / layout.checker_cell) % 2) == 0 ? first : second;
      const std::uint8_t* p = &row[static_cast<std::size_t>(c) * 3];
      if (!(near(p[0], e.r, tol) && near(p[1], e.g, tol) && near(p[2], e.b, tol))) {
        if (++misses > budget) return static_cast<double>(total - misses) / total;
      }
    }
  }
  return static_cast<double>(total - misses) / total;
}

// Per row, how many pixels match the pattern row of each parity. A band's
// score is then a sum over its rows instead of a rescan of its pixels.
std::vector<std::array<long, 2>> checker_row_matches(const Image& image, const LayoutSpec& layout, int tol) {
  const int w = image.width();
  const auto [first, second] = layout.checker_colors;
  std::vector<std::array<long, 2>> out(static_cast<std::size_t>(image.height()));
  // Per channel value: bit 0 set when within tolerance of `first`, bit 1 of `second`.
  std::array<std::array<std::uint8_t, 256>, 3> near_bits{};
  const std::array<std::uint8_t, 3> fc{first.r, first.g, first.b};
  const std::array<std::uint8_t, 3> sc{second.r, second.g, second.b};
  for (int ch = 0; ch < 3; ++ch) {
    for (int v = 0; v < 256; ++v) {
      near_bits[ch][v] = static_cast<std::uint8_t>((std::abs(v - fc[ch]) <= tol ? 1 : 0) |
                                                   (std::abs(v - sc[ch]) <= tol ? 2 : 0));
    }
  }
  const int cell = layout.checker_cell;
  for (int y = 0; y < image.height(); ++y) {
    const std::uint8_t* row = image.row(y).data();
    long even = 0, odd = 0;  // parity 0 expects `first` in even cells
    for (int start = 0; start < w; start += cell) {
      const int end = std::min(w, start + cell);
      int is_first = 0, is_second = 0;
      for (int c = start; c < end; ++c) {
        const std::uint8_t* p = row + static_cast<std::size_t>(c) * 3;
        const int bits = near_bits[0][p[0]] & near_bits[1][p[1]] & near_bits[2][p[2]];
        is_first += bits & 1;
        is_second += bits >> 1;
      }
      const bool odd_cell = (start / cell) & 1;
      even += odd_cell ? is_second : is_first;
      odd += odd_cell ? is_first : is_second;
    }
    out[static_cast<std::size_t>(y)] = {even, odd};
  }
  return out;
}

}  // namespace

double checker_match_score(const Image& image, int top, const LayoutSpec& layout, int tolerance) {
  if (top < 0 || top + layout.border_thickness > image.height()) return 0.0;
  return checker_score_bounded(image, top, layout, tolerance, 0.0);
}

BoundaryReport detect_borders_checker(const Sheet& sheet, const DetectorParams& params) {
  const LayoutSpec& layout = sheet.layout;
  layout.check();
  const Image& img = sheet.image;
  const int h = img.height();
  const int w = img.width();
  const int t = layout.border_thickness;
  BoundaryReport report;
  report.method = BoundaryMethod::Checkerboard;
  if (h < t) return report;

  // Localize candidate bands on the edge map before exact pattern scoring.
  const EdgeMap edges = canny_edges(img, params.canny);
  std::vector<long> prefix(static_cast<std::size_t>(h) + 1, 0);
  for (int y = 0; y < h; ++y) {
    long count = 0;
    const std::uint8_t* row = &edges.edges[static_cast<std::size_t>(y) * w];
    for (int x = 0; x < w; ++x) count += row[x];
    prefix[static_cast<std::size_t>(y) + 1] = prefix[static_cast<std::size_t>(y)] + count;
  }

  struct Candidate {
    int top;
    double score;
  };
  std::vector<Candidate> candidates;
  const auto row_matches = checker_row_matches(img, layout, params.pixel_tolerance);
  const double band_pixels = static_cast<double>(t) * w;
  for (int top = 0; top + t <= h; ++top) {
    const double density =
        static_cast<double>(prefix[static_cast<std::size_t>(top + t)] - prefix[static_cast<std::size_t>(top)]) /
        band_pixels;
    if (density < params.min_band_edge_density) continue;
    long matches = 0;
    for (int i = 0; i < t; ++i) {
      matches += row_matches[static_cast<std::size_t>(top + i)][static_cast<std::size_t>((i / layout.checker_cell) % 2)];
    }
    const double score = static_cast<double>(matches) / band_pixels;
    if (score >= params.accept_threshold) candidates.push_back({top, score});
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  std::vector<Candidate> accepted;
  for (const auto& c : candidates) {
    const bool overlaps = std::any_of(accepted.begin(), accepted.end(),
                                      [&](const Candidate& a) { return std::abs(a.top - c.top) < t; });
    if (!overlaps) accepted.push_back(c);
  }
  std::sort(accepted.begin(), accepted.end(), [](const Candidate& a, const Candidate& b) { return a.top < b.top; });
  for (const auto& a : accepted) {
    report.cut_rows.push_back(a.top);
    report.scores.push_back(a.score);
  }
  return report;
}

std::vector<double> row_difference_signal(const Image& image) {
  const int h = image.height();
  const double channels = static_cast<double>(image.width()) * 3;
  std::vector<double> d(static_cast<std::size_t>(std::max(0, h - 1)));
  for (int r = 0; r + 1 < h; ++r) {
    const auto a = image.row(r);
    const auto b = image.row(r + 1);
    long sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(int(a[i]) - int(b[i]));
    d[static_cast<std::size_t>(r)] = static_cast<double>(sum) / channels;
  }
  return d;
}

BoundaryReport detect_borders_rowdiff(const Sheet& sheet, int expected_n, const DetectorParams&) {
  if (expected_n < 1) throw Error(Errc::InvalidArgument, "expected frame count must be >= 1");
  const int h = sheet.image.height();
  if (h < expected_n) {
    throw Error(Errc::InsufficientHeight, "sheet height " + std::to_string(h) + " < expected frame count " +
                                              std::to_string(expected_n));
  }
  BoundaryReport report;
  report.method = BoundaryMethod::RowDiff;
  const auto d = row_difference_signal(sheet.image);
  const int window = std::max(1, sheet.layout.frame_height / 2);

  std::vector<int> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return d[a] > d[b]; });

  std::vector<int> chosen;
  for (int r : order) {
    if (static_cast<int>(chosen.size()) == expected_n - 1) break;
    const bool suppressed =
        std::any_of(chosen.begin(), chosen.end(), [&](int c) { return std::abs(c - r) < window; });
    if (!suppressed) chosen.push_back(r);
  }
  std::sort(chosen.begin(), chosen.end());

  // Prominence: how far the peak stands above the median of its neighborhood.
  for (int r : chosen) {
    std::vector<double> around;
    const int lo = std::max(0, r - window);
    const int hi = std::min(static_cast<int>(d.size()) - 1, r + window);
    for (int i = lo; i <= hi; ++i) {
      if (i != r) around.push_back(d[static_cast<std::size_t>(i)]);
    }
    double background = 0.0;
    if (!around.empty()) {
      auto mid = around.begin() + static_cast<std::ptrdiff_t>(around.size() / 2);
      std::nth_element(around.begin(), mid, around.end());
      background = *mid;
    }
    const double peak = d[static_cast<std::size_t>(r)];
    const double score = peak <= 0.0 ? 0.0 : std::clamp(1.0 - background / peak, 0.0, 1.0);
    report.cut_rows.push_back(r);
    report.scores.push_back(score);
  }
  return report;
}

std::vector<Image> split_sheet(const Sheet& sheet, const BoundaryReport& report) {
  const Image& img = sheet.image;
  const int h = img.height();
  const int t = sheet.layout.border_thickness;
  const auto& cuts = report.cut_rows;

  for (std::size_t i = 0; i < cuts.size(); ++i) {
    if (i > 0 && cuts[i] <= cuts[i - 1]) {
      throw Error(Errc::InconsistentReport, "cut rows are not strictly increasing");
    }
    const bool in_range = report.method == BoundaryMethod::Checkerboard
                              ? (cuts[i] >= 0 && cuts[i] + t <= h)
                              : (cuts[i] >= 0 && cuts[i] + 1 < h);
    if (!in_range) {
      throw Error(Errc::InconsistentReport, "cut row " + std::to_string(cuts[i]) +
                                                " does not fit in a sheet of height " + std::to_string(h));
    }
    if (report.method == BoundaryMethod::Checkerboard && i > 0 && cuts[i] < cuts[i - 1] + t) {
      throw Error(Errc::InconsistentReport, "border bands overlap");
    }
  }

  std::vector<Image> out;
  int start = 0;
  for (int cut : cuts) {
    const int end = report.method == BoundaryMethod::Checkerboard ? cut : cut + 1;
    if (end > start) out.push_back(img.rows(start, end - start));
    start = report.method == BoundaryMethod::Checkerboard ? cut + t : cut + 1;
  }
  if (start < h) out.push_back(img.rows(start, h - start));
  return out;
}

int count_frames(const Sheet& sheet, std::optional<int> borderless_expected, const DetectorParams& params) {
  if (borderless_expected) {
    const auto report = detect_borders_rowdiff(sheet, *borderless_expected, params);
    const auto strong = std::count_if(report.scores.begin(), report.scores.end(),
                                      [&](double s) { return s >= params.rowdiff_min_score; });
    return 1 + static_cast<int>(strong);
  }
  return 1 + static_cast<int>(detect_borders_checker(sheet, params).cut_rows.size());
}

double frame_count_accuracy(const std::vector<std::pair<int, int>>& expected_detected) {
  if (expected_detected.empty()) throw Error(Errc::EmptyInput, "frame_count_accuracy needs at least one pair");
  const auto correct = std::count_if(expected_detected.begin(), expected_detected.end(),
                                     [](const auto& p) { return p.first == p.second; });
  return static_cast<double>(correct) / static_cast<double>(expected_detected.size());
}

void to_json(nlohmann::json& j, const LayoutSpec& layout) {
  auto rgb = [](Rgb c) { return nlohmann::json::array({c.r, c.g, c.b}); };
  j = {{"frame_height", layout.frame_height},
       {"border_thickness", layout.border_thickness},
       {"checker_cell", layout.checker_cell},
       {"checker_colors", {rgb(layout.checker_colors.first), rgb(layout.checker_colors.second)}},
       {"width_multiple", layout.width_multiple}};
}

void from_json(const nlohmann::json& j, LayoutSpec& layout) {
  layout = {};
  layout.frame_height = j.value("frame_height", layout.frame_height);
  layout.border_thickness = j.value("border_thickness", layout.border_thickness);
  layout.checker_cell = j.value("checker_cell", layout.checker_cell);
  layout.width_multiple = j.value("width_multiple", layout.width_multiple);
  if (j.contains("checker_colors")) {
    auto rgb = [](const nlohmann::json& a) {
      return Rgb{a.at(0).get<std::uint8_t>(), a.at(1).get<std::uint8_t>(), a.at(2).get<std::uint8_t>()};
    };
    layout.checker_colors = {rgb(j["checker_colors"].at(0)), rgb(j["checker_colors"].at(1))};
  }
  layout.check();
}

void to_json(nlohmann::json& j, const BoundaryReport& report) {
  j = {{"method", std::string(to_string(report.method))},
       {"cut_rows", report.cut_rows},
       {"scores", report.scores}};
}

nlohmann::json sheet_sidecar(const Sheet& sheet, const BoundaryReport& report,
                             const std::string& source_plan_id) {
  return {{"layout", sheet.layout},
          {"frame_count", static_cast<int>(report.cut_rows.size()) + 1},
          {"cut_rows", report.cut_rows},
          {"method", std::string(to_string(report.method))},
          {"source_plan_id", source_plan_id}};
}

}  // namespace storyframe
