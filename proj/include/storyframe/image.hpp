#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace storyframe {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kBlack{0, 0, 0};
inline constexpr Rgb kWhite{255, 255, 255};

// Row-major RGB8 raster. Dimensions are always positive and the buffer is
// exactly width * height * 3 bytes.
class Image {
 public:
  Image(int width, int height, Rgb fill = kBlack);
  Image(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  Rgb at(int x, int y) const noexcept {
    const std::uint8_t* p = &pixels_[offset(x, y)];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) noexcept {
    std::uint8_t* p = &pixels_[offset(x, y)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  std::span<const std::uint8_t> row(int y) const noexcept {
    return std::span(pixels_).subspan(offset(0, y), static_cast<std::size_t>(width_) * 3);
  }
  std::span<std::uint8_t> row(int y) noexcept {
    return std::span(pixels_).subspan(offset(0, y), static_cast<std::size_t>(width_) * 3);
  }

  // Rows [top, top + count) as a new image.
  Image rows(int top, int count) const;
  // Pastes src with its top-left corner at (x, y); src must fit.
  void paste(const Image& src, int x, int y);

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * 3;
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> pixels_;
};

// 8-bit RGB PNG, no alpha, no interlace. Readers accept any PNG and convert.
std::vector<std::uint8_t> encode_png(const Image& image);
Image decode_png(std::span<const std::uint8_t> bytes);
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace storyframe
