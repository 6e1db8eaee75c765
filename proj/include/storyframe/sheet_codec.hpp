#pragma once

// Composition of keyframes into vertically stacked sheets separated by
// checkerboard border bands, and recovery of the frames from a sheet.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "storyframe/edge_map.hpp"
#include "storyframe/image.hpp"

namespace storyframe {

struct LayoutSpec {
  int frame_height = 272;
  int border_thickness = 16;
  int checker_cell = 8;
  std::pair<Rgb, Rgb> checker_colors{kBlack, kWhite};
  int width_multiple = 16;

  // Throws Error(InvalidLayout) if an invariant does not hold.
  void check() const;

  friend bool operator==(const LayoutSpec&, const LayoutSpec&) = default;
};

struct Sheet {
  Image image;
  LayoutSpec layout;
  std::optional<int> frame_count_hint;
};

enum class BoundaryMethod { Checkerboard, RowDiff };

std::string_view to_string(BoundaryMethod method);

// Checkerboard cuts are the top row of a border band. RowDiff cuts are the
// last row of the upper segment: the boundary lies between cut and cut + 1.
struct BoundaryReport {
  std::vector<int> cut_rows;
  BoundaryMethod method = BoundaryMethod::Checkerboard;
  std::vector<double> scores;  // one per cut, in [0, 1]
};

struct DetectorParams {
  CannyParams canny{};
  // A band position is scored only if the edge map has at least this
  // fraction of edge pixels inside it.
  double min_band_edge_density = 0.05;
  int pixel_tolerance = 24;        // per channel
  double accept_threshold = 0.80;  // fraction of band pixels matching
  // RowDiff cuts count as frame boundaries in count_frames only when their
  // prominence score reaches this value.
  double rowdiff_min_score = 0.5;
};

// Scales to layout.frame_height (bilinear, aspect preserved), then centers on
// black padding or center-crops horizontally to target_width. Never crops
// vertically.
Image normalize_frame(const Image& img, const LayoutSpec& layout, int target_width);

// Width of img after scaling to frame_height.
int scaled_width(const Image& img, const LayoutSpec& layout);

// Smallest multiple of width_multiple that fits every frame after scaling.
int uniform_target_width(const std::vector<Image>& frames, const LayoutSpec& layout);

Image render_border(int width, const LayoutSpec& layout);

int expected_sheet_height(int n, const LayoutSpec& layout);

Sheet compose_sheet(const std::vector<Image>& frames, const LayoutSpec& layout);

// Fraction of pixels in rows [top, top + border_thickness) within tolerance
// of the origin-anchored checkerboard.
double checker_match_score(const Image& image, int top, const LayoutSpec& layout, int tolerance);

BoundaryReport detect_borders_checker(const Sheet& sheet, const DetectorParams& params = {});

// Mean absolute channel difference between rows r and r + 1.
std::vector<double> row_difference_signal(const Image& image);

BoundaryReport detect_borders_rowdiff(const Sheet& sheet, int expected_n,
                                      const DetectorParams& params = {});

std::vector<Image> split_sheet(const Sheet& sheet, const BoundaryReport& report);

// 1 + checkerboard cuts. With borderless_expected set, RowDiff is used
// instead and only cuts scoring >= rowdiff_min_score are counted.
int count_frames(const Sheet& sheet, std::optional<int> borderless_expected = std::nullopt,
                 const DetectorParams& params = {});

double frame_count_accuracy(const std::vector<std::pair<int, int>>& expected_detected);

void to_json(nlohmann::json& j, const LayoutSpec& layout);
void from_json(const nlohmann::json& j, LayoutSpec& layout);
void to_json(nlohmann::json& j, const BoundaryReport& report);

// Sidecar written next to a sheet PNG.
nlohmann::json sheet_sidecar(const Sheet& sheet, const BoundaryReport& report,
                             const std::string& source_plan_id);

}  // namespace storyframe
