#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace forcecast {

/// 8-bit RGB image, row-major, interleaved (HWC).
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool operator==(const Image&) const = default;
};

/// Planar float image (CHW). Values are in [0, 1] until normalize_imagenet runs.
struct ImageF {
  int channels = 3;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  ImageF() = default;
  ImageF(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, 0.0f) {}

  float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  bool operator==(const ImageF&) const = default;
};

inline constexpr int kCropSize = 300;
inline constexpr int kModelImageSize = 256;
inline constexpr std::array<float, 3> kImagenetMean = {0.485f, 0.456f, 0.406f};
inline constexpr std::array<float, 3> kImagenetStd = {0.229f, 0.224f, 0.225f};

void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

/// Bilinear sample with half-pixel centers; coordinates are clamped to the image.
float sample_bilinear(const ImageF& image, int channel, double x, double y);

/// Center-crops to 300x300, zooms toward the center by `zoom` (>= 1) and
/// resizes to 256x256 with bilinear interpolation. Output in [0, 1].
/// Throws DataError for images smaller than 300x300.
ImageF crop_zoom_resize(const Image& image, double zoom);

/// Per-channel (x - mean) / std with the ImageNet constants.
ImageF normalize_imagenet(ImageF image);

/// crop_zoom_resize followed by normalize_imagenet: the model-ready 3x256x256 tensor.
ImageF preprocess_image(const Image& image, double zoom);

/// Square center crop of side size/zoom resampled back to the original size.
ImageF center_zoom(const ImageF& image, double zoom);

ImageF flip_horizontal(const ImageF& image);
ImageF flip_vertical(const ImageF& image);
/// Rotates content by `radians` about the image center (pixel-coordinate
/// convention, y down). Bilinear; regions with no source are black (0).
ImageF rotate_image(const ImageF& image, double radians);

/// Average-pools by an integer factor that must divide both sides.
ImageF average_pool(const ImageF& image, int factor);

ImageF to_float(const Image& image);
Image to_uint8(const ImageF& image);

}  // namespace forcecast
