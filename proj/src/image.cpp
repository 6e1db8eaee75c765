#include "storyframe/image.hpp"

#include <png.h>

#include <algorithm>
#include <cstring>
#include <string>

#include "storyframe/error.hpp"
#include "storyframe/fs_util.hpp"

namespace storyframe {

namespace {

void check_dims(int width, int height) {
  if (width <= 0 || height <= 0) {
    throw Error(Errc::DegenerateImage,
                "image dimensions must be positive, got " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
}

}  // namespace

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  check_dims(width, height);
  pixels_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = fill.r;
    pixels_[i + 1] = fill.g;
    pixels_[i + 2] = fill.b;
  }
}

Image::Image(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  check_dims(width, height);
  if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
    throw Error(Errc::DegenerateImage, "pixel buffer length does not match width*height*3");
  }
}

Image Image::rows(int top, int count) const {
  if (top < 0 || count <= 0 || top + count > height_) {
    throw Error(Errc::OutOfBounds, "row range outside image");
  }
  const auto begin = pixels_.begin() + static_cast<std::ptrdiff_t>(offset(0, top));
  const auto end = begin + static_cast<std::ptrdiff_t>(offset(0, count));
  return Image(width_, count, std::vector<std::uint8_t>(begin, end));
}

void Image::paste(const Image& src, int x, int y) {
  if (x < 0 || y < 0 || x + src.width() > width_ || y + src.height() > height_) {
    throw Error(Errc::OutOfBounds, "paste target outside image");
  }
  for (int r = 0; r < src.height(); ++r) {
    auto from = src.row(r);
    std::copy(from.begin(), from.end(), pixels_.begin() + static_cast<std::ptrdiff_t>(offset(x, y + r)));
  }
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  const auto* buffer = image.pixels().data();
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, buffer, 0, nullptr)) {
    throw Error(Errc::IoError, std::string("png encode: ") + png.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, buffer, 0, nullptr)) {
    throw Error(Errc::IoError, std::string("png encode: ") + png.message);
  }
  out.resize(size);
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw Error(Errc::DecodeError, std::string("png decode: ") + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(png));
  // Alpha is composited onto black.
  png_color background{0, 0, 0};
  if (!png_image_finish_read(&png, &background, pixels.data(), 0, nullptr)) {
    png_image_free(&png);
    throw Error(Errc::DecodeError, std::string("png decode: ") + png.message);
  }
  return Image(static_cast<int>(png.width), static_cast<int>(png.height), std::move(pixels));
}

Image read_png(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  return decode_png(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

void write_png(const std::filesystem::path& path, const Image& image) {
  const auto bytes = encode_png(image);
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace storyframe
