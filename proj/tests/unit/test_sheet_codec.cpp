#include <doctest.h>

#include <algorithm>
#include <map>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "storyframe/error.hpp"
#include "storyframe/sheet_codec.hpp"

using namespace storyframe;
using storyframe::testing::composed_border_rows;
using storyframe::testing::noise_frames;

namespace {

Errc error_code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::InvalidArgument;
}

const LayoutSpec kLayout{};

}  // namespace

TEST_CASE("layout invariants") {
  CHECK_NOTHROW(kLayout.check());
  LayoutSpec odd = kLayout;
  odd.frame_height = 270;
  CHECK(error_code_of([&] { odd.check(); }) == Errc::InvalidLayout);
  LayoutSpec cell = kLayout;
  cell.checker_cell = 5;
  CHECK(error_code_of([&] { cell.check(); }) == Errc::InvalidLayout);
  LayoutSpec zero = kLayout;
  zero.width_multiple = 0;
  CHECK(error_code_of([&] { zero.check(); }) == Errc::InvalidLayout);
}

TEST_CASE("normalize_frame") {
  SUBCASE("uniform half scale") {
    Rng rng(1);
    const Image in = testing::noise_image(544, 544, rng);
    const Image out = normalize_frame(in, kLayout, 272);
    CHECK(out.width() == 272);
    CHECK(out.height() == 272);
  }
  SUBCASE("already at height is centered on black") {
    const Image in(100, 272, Rgb{10, 200, 30});
    const Image out = normalize_frame(in, kLayout, 272);
    REQUIRE(out.width() == 272);
    REQUIRE(out.height() == 272);
    for (int y = 0; y < 272; y += 17) {
      for (int x = 0; x < 272; ++x) {
        const bool content = x >= 86 && x < 186;
        CHECK(out.at(x, y) == (content ? Rgb{10, 200, 30} : kBlack));
      }
    }
  }
  SUBCASE("wider than target is center-cropped, never cropped vertically") {
    Image in(400, 272);
    for (int x = 0; x < 400; ++x) {
      for (int y = 0; y < 272; ++y) in.set(x, y, Rgb{static_cast<std::uint8_t>(x % 256), 0, 0});
    }
    const Image out = normalize_frame(in, kLayout, 272);
    CHECK(out.width() == 272);
    CHECK(out.height() == 272);
    CHECK(out.at(0, 0) == in.at(64, 0));
    CHECK(out.at(271, 271) == in.at(335, 271));
  }
  SUBCASE("solid red of any size stays red or black pad") {
    for (auto [w, h] : {std::pair{37, 91}, {640, 360}, {1000, 200}, {3, 900}, {272, 272}}) {
      const Image in(w, h, Rgb{255, 0, 0});
      const int target = uniform_target_width({in}, kLayout);
      const Image out = normalize_frame(in, kLayout, target);
      CHECK(out.height() == 272);
      CHECK(out.width() % 16 == 0);
      std::map<std::uint32_t, int> histogram;
      for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
          const Rgb c = out.at(x, y);
          ++histogram[(c.r << 16) | (c.g << 8) | c.b];
        }
      }
      for (const auto& [color, count] : histogram) CHECK((color == 0xFF0000u || color == 0u));
      CHECK(histogram[0xFF0000u] > 0);
    }
  }
  SUBCASE("degenerate and bad widths") {
    CHECK(error_code_of([] { normalize_frame(Image(1, 1), kLayout, 100); }) == Errc::InvalidWidth);
  }
}

TEST_CASE("render_border pattern") {
  const Image b = render_border(16, kLayout);
  CHECK(b.width() == 16);
  CHECK(b.height() == 16);
  CHECK(b.at(0, 0) == kBlack);
  // at(x, y): column 8 of row 0 is white, (8, 8) is black.
  CHECK(b.at(8, 0) == kWhite);
  CHECK(b.at(8, 8) == kBlack);
  CHECK(b.at(0, 8) == kWhite);
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) {
      const bool white = ((r / 8) + (c / 8)) % 2 == 1;
      CHECK(b.at(c, r) == (white ? kWhite : kBlack));
    }
  }
  CHECK(render_border(100, kLayout) == render_border(100, kLayout));
}

TEST_CASE("height law") {
  CHECK(expected_sheet_height(1, kLayout) == 272);
  CHECK(expected_sheet_height(4, kLayout) == 1136);
  CHECK(expected_sheet_height(10, kLayout) == 2864);
  for (int n = 1; n <= 32; ++n) CHECK(expected_sheet_height(n, kLayout) == n * 272 + (n - 1) * 16);
  CHECK_THROWS_AS(expected_sheet_height(0, kLayout), Error);
}

TEST_CASE("compose_sheet layout") {
  Rng rng(2);
  const auto frames = noise_frames(3, 400, kLayout, rng);
  const Sheet s = compose_sheet(frames, kLayout);
  CHECK(s.image.height() == 848);
  CHECK(s.image.width() == 400);
  CHECK(s.frame_count_hint == 3);
  const Image band = render_border(400, kLayout);
  CHECK(s.image.rows(272, 16) == band);
  CHECK(s.image.rows(560, 16) == band);
  CHECK(s.image.rows(0, 272) == frames[0]);
  CHECK(s.image.rows(288, 272) == frames[1]);
  CHECK(s.image.rows(576, 272) == frames[2]);

  const Sheet one = compose_sheet({frames[0]}, kLayout);
  CHECK(one.image == frames[0]);

  CHECK(error_code_of([&] { compose_sheet({}, kLayout); }) == Errc::EmptyFrameList);
  CHECK(error_code_of([&] { compose_sheet({frames[0], Image(400, 271)}, kLayout); }) == Errc::HeightMismatch);
  CHECK(error_code_of([&] { compose_sheet({frames[0], Image(416, 272)}, kLayout); }) == Errc::WidthMismatch);
}

TEST_CASE("compose and split round trip for any N") {
  Rng rng(3);
  for (int n = 1; n <= 16; ++n) {
    const int width = 16 * (1 + static_cast<int>(rng.below(40)));
    const auto frames = noise_frames(n, width, kLayout, rng);
    const Sheet s = compose_sheet(frames, kLayout);
    CHECK(s.image.height() == expected_sheet_height(n, kLayout));
    const auto report = detect_borders_checker(s);
    CHECK(report.cut_rows == composed_border_rows(n, kLayout));
    CHECK(report.scores.size() == report.cut_rows.size());
    for (double sc : report.scores) CHECK((sc >= 0.8 && sc <= 1.0));
    CHECK(split_sheet(s, report) == frames);
  }
}

TEST_CASE("checker detection on five noise frames") {
  Rng rng(4);
  const Sheet s = compose_sheet(noise_frames(5, 464, kLayout, rng), kLayout);
  CHECK(detect_borders_checker(s).cut_rows == std::vector<int>{272, 560, 848, 1136});
  CHECK(count_frames(s) == 5);
}

TEST_CASE("single frame has no cuts") {
  Rng rng(5);
  const Sheet s{testing::noise_image(464, 272, rng), kLayout, 1};
  CHECK(detect_borders_checker(s).cut_rows.empty());
  CHECK(count_frames(s) == 1);
  const Sheet flat{Image(464, 272, Rgb{90, 90, 90}), kLayout, 1};
  CHECK(count_frames(flat) == 1);
}

TEST_CASE("destroyed borders reduce the count exactly") {
  Rng rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(8));
    const auto frames = noise_frames(n, 464, kLayout, rng);
    Sheet s = compose_sheet(frames, kLayout);
    auto rows = composed_border_rows(n, kLayout);
    rng.shuffle(rows);
    const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    std::vector<int> kept(rows.begin() + k, rows.end());
    std::sort(kept.begin(), kept.end());
    for (int i = 0; i < k; ++i) testing::overwrite_with_noise(s.image, rows[static_cast<std::size_t>(i)], 16, rng);
    const auto report = detect_borders_checker(s);
    CHECK(report.cut_rows == kept);
    CHECK(count_frames(s) == n - k);
  }
}

TEST_CASE("textured frames never produce false cuts") {
  Rng rng(7);
  // Frames containing stripes and fine checker-like texture that is not the border pattern.
  std::vector<Image> frames;
  for (int f = 0; f < 4; ++f) {
    Image img(464, 272);
    for (int y = 0; y < 272; ++y) {
      for (int x = 0; x < 464; ++x) {
        const bool stripe = ((y / 4) + (x / 4) + f) % 2 == 0;
        img.set(x, y, stripe ? Rgb{20, 20, 20} : Rgb{230, 230, 230});
      }
    }
    frames.push_back(img);
  }
  frames.push_back(testing::noise_image(464, 272, rng));
  const Sheet s = compose_sheet(frames, kLayout);
  CHECK(detect_borders_checker(s).cut_rows == composed_border_rows(5, kLayout));
}

TEST_CASE("rowdiff on two solid frames") {
  const Image red(464, 272, Rgb{255, 0, 0});
  const Image blue(464, 272, Rgb{0, 0, 255});
  const Sheet s{testing::stack_borderless({red, blue}), kLayout, std::nullopt};
  const auto d = row_difference_signal(s.image);
  const auto peak = std::max_element(d.begin(), d.end()) - d.begin();
  CHECK(peak == 271);
  const auto report = detect_borders_rowdiff(s, 2);
  CHECK(report.method == BoundaryMethod::RowDiff);
  CHECK(report.cut_rows == std::vector<int>{271});
  const auto parts = split_sheet(s, report);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0] == red);
  CHECK(parts[1] == blue);
}

TEST_CASE("rowdiff degenerate flat sheet ties toward row 0") {
  const Sheet s{Image(64, 544, Rgb{7, 7, 7}), kLayout, std::nullopt};
  const auto report = detect_borders_rowdiff(s, 2);
  CHECK(report.cut_rows == std::vector<int>{0});
  CHECK(report.scores == std::vector<double>{0.0});
  CHECK(count_frames(s, 2) == 1);
}

TEST_CASE("rowdiff on distinct solid frames matches the brute-force reference") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(9));
    std::vector<Image> frames;
    for (const auto& c : testing::distinct_colors(n, rng)) frames.emplace_back(128, 272, c);
    const Sheet s{testing::stack_borderless(frames), kLayout, std::nullopt};
    const auto report = detect_borders_rowdiff(s, n);
    CHECK(report.cut_rows == testing::rowdiff_reference(s.image, n, 136));
    std::vector<int> truth;
    for (int k = 1; k < n; ++k) truth.push_back(k * 272 - 1);
    CHECK(report.cut_rows == truth);
    CHECK(split_sheet(s, report) == frames);
    CHECK(count_frames(s, n) == n);
  }
}

TEST_CASE("rowdiff errors") {
  const Sheet s{Image(8, 3), kLayout, std::nullopt};
  CHECK(error_code_of([&] { detect_borders_rowdiff(s, 4); }) == Errc::InsufficientHeight);
}

TEST_CASE("split_sheet reports") {
  Rng rng(9);
  const Sheet s = compose_sheet(noise_frames(3, 64, kLayout, rng), kLayout);
  CHECK(split_sheet(s, BoundaryReport{}) == std::vector<Image>{s.image});
  BoundaryReport beyond{{900}, BoundaryMethod::Checkerboard, {1.0}};
  CHECK(error_code_of([&] { split_sheet(s, beyond); }) == Errc::InconsistentReport);
  BoundaryReport unordered{{560, 272}, BoundaryMethod::Checkerboard, {1.0, 1.0}};
  CHECK(error_code_of([&] { split_sheet(s, unordered); }) == Errc::InconsistentReport);
  BoundaryReport overlap{{272, 280}, BoundaryMethod::Checkerboard, {1.0, 1.0}};
  CHECK(error_code_of([&] { split_sheet(s, overlap); }) == Errc::InconsistentReport);

  // Checkerboard: frames plus discarded bands reconstruct the sheet.
  const auto report = detect_borders_checker(s);
  const auto parts = split_sheet(s, report);
  std::vector<Image> with_bands;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) with_bands.push_back(render_border(64, kLayout));
    with_bands.push_back(parts[i]);
  }
  CHECK(testing::stack_borderless(with_bands) == s.image);
}

TEST_CASE("frame_count_accuracy") {
  CHECK(frame_count_accuracy({{3, 3}, {3, 3}, {3, 2}, {3, 3}}) == 0.75);
  CHECK(frame_count_accuracy({{5, 5}, {9, 9}}) == 1.0);
  CHECK(error_code_of([] { frame_count_accuracy({}); }) == Errc::EmptyInput);
  std::vector<std::pair<int, int>> pairs{{3, 3}, {4, 2}, {5, 5}, {6, 1}, {7, 7}};
  const double base = frame_count_accuracy(pairs);
  std::sort(pairs.begin(), pairs.end());
  do {
    CHECK(frame_count_accuracy(pairs) == base);
  } while (std::next_permutation(pairs.begin(), pairs.end()));
}

TEST_CASE("png round trip is lossless") {
  Rng rng(10);
  const Image img = testing::noise_image(33, 17, rng);
  CHECK(decode_png(encode_png(img)) == img);
  CHECK_THROWS_AS(decode_png(std::vector<std::uint8_t>{1, 2, 3}), Error);
}

TEST_CASE("sidecar and layout json") {
  Rng rng(11);
  const Sheet s = compose_sheet(noise_frames(2, 32, kLayout, rng), kLayout);
  const auto side = sheet_sidecar(s, detect_borders_checker(s), "plan-1");
  CHECK(side["frame_count"] == 2);
  CHECK(side["cut_rows"] == nlohmann::json::array({272}));
  CHECK(side["source_plan_id"] == "plan-1");
  CHECK(side["layout"].get<LayoutSpec>() == kLayout);
}
