#include "forcecast/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "forcecast/errors.hpp"

namespace forcecast {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Resamples `src` over a square window of side `side` centered at (cx, cy) into an out x out image.
ImageF resample_square(const ImageF& src, double cx, double cy, double side, int out) {
  ImageF dst(src.channels, out, out);
  const double scale = side / out;
  const double x0 = cx - side / 2.0;
  const double y0 = cy - side / 2.0;
  for (int c = 0; c < src.channels; ++c) {
    for (int y = 0; y < out; ++y) {
      const double sy = y0 + (y + 0.5) * scale - 0.5;
      for (int x = 0; x < out; ++x) {
        const double sx = x0 + (x + 0.5) * scale - 0.5;
        dst.at(c, y, x) = sample_bilinear(src, c, sx, sy);
      }
    }
  }
  return dst;
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& image) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 1);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    auto* row = const_cast<png_bytep>(image.rgb.data() + static_cast<std::size_t>(y) * image.width * 3);
    png_write_row(png, row);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open image " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("failed decoding " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  Image image(static_cast<int>(png_get_image_width(png, info)), static_cast<int>(png_get_image_height(png, info)));
  for (int y = 0; y < image.height; ++y) {
    png_read_row(png, image.rgb.data() + static_cast<std::size_t>(y) * image.width * 3, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

float sample_bilinear(const ImageF& image, int channel, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(image.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(image.height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, image.width - 1);
  const int y1 = std::min(y0 + 1, image.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * image.at(channel, y0, x0) + fx * image.at(channel, y0, x1);
  const double bottom = (1.0 - fx) * image.at(channel, y1, x0) + fx * image.at(channel, y1, x1);
  return static_cast<float>((1.0 - fy) * top + fy * bottom);
}

ImageF to_float(const Image& image) {
  ImageF out(3, image.height, image.width);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) out.at(c, y, x) = image.at(x, y, c) / 255.0f;
    }
  }
  return out;
}

Image to_uint8(const ImageF& image) {
  Image out(image.width, image.height);
  for (int c = 0; c < 3 && c < image.channels; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  return out;
}

ImageF crop_zoom_resize(const Image& image, double zoom) {
  if (image.width < kCropSize || image.height < kCropSize) {
    throw DataError("image is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                    ", preprocessing needs at least 300x300");
  }
  if (!(zoom >= 1.0) || !std::isfinite(zoom)) throw ConfigError("image zoom must be >= 1");
  // Integer center crop first so that the 300x300 region is taken verbatim.
  const int ox = (image.width - kCropSize) / 2;
  const int oy = (image.height - kCropSize) / 2;
  ImageF crop(3, kCropSize, kCropSize);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < kCropSize; ++y) {
      for (int x = 0; x < kCropSize; ++x) crop.at(c, y, x) = image.at(x + ox, y + oy, c) / 255.0f;
    }
  }
  const double center = kCropSize / 2.0;
  return resample_square(crop, center, center, kCropSize / zoom, kModelImageSize);
}

ImageF normalize_imagenet(ImageF image) {
  for (int c = 0; c < image.channels && c < 3; ++c) {
    const std::size_t plane = static_cast<std::size_t>(image.height) * image.width;
    float* p = image.data.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - kImagenetMean[c]) / kImagenetStd[c];
  }
  return image;
}

ImageF preprocess_image(const Image& image, double zoom) {
  return normalize_imagenet(crop_zoom_resize(image, zoom));
}

ImageF center_zoom(const ImageF& image, double zoom) {
  if (zoom == 1.0) return image;
  if (image.width != image.height) throw ShapeError("center_zoom expects a square image");
  const double center = image.width / 2.0;
  return resample_square(image, center, center, image.width / zoom, image.width);
}

ImageF flip_horizontal(const ImageF& image) {
  ImageF out(image.channels, image.height, image.width);
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) out.at(c, y, x) = image.at(c, y, image.width - 1 - x);
    }
  }
  return out;
}

ImageF flip_vertical(const ImageF& image) {
  ImageF out(image.channels, image.height, image.width);
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) out.at(c, y, x) = image.at(c, image.height - 1 - y, x);
    }
  }
  return out;
}

ImageF rotate_image(const ImageF& image, double radians) {
  if (radians == 0.0) return image;
  ImageF out(image.channels, image.height, image.width);
  const double cx = (image.width - 1) / 2.0;
  const double cy = (image.height - 1) / 2.0;
  const double c = std::cos(radians), s = std::sin(radians);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      // Inverse map: destination offset rotated by -theta gives the source.
      const double dx = x - cx, dy = y - cy;
      const double sx = cx + c * dx + s * dy;
      const double sy = cy - s * dx + c * dy;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      for (int ch = 0; ch < image.channels; ++ch) {
        auto px = [&](int xx, int yy) -> double {
          if (xx < 0 || yy < 0 || xx >= image.width || yy >= image.height) return 0.0;
          return image.at(ch, yy, xx);
        };
        const double v = (1 - fy) * ((1 - fx) * px(x0, y0) + fx * px(x0 + 1, y0)) +
                         fy * ((1 - fx) * px(x0, y0 + 1) + fx * px(x0 + 1, y0 + 1));
        out.at(ch, y, x) = static_cast<float>(v);
      }
    }
  }
  return out;
}

ImageF average_pool(const ImageF& image, int factor) {
  if (factor <= 1) return image;
  if (image.width % factor != 0 || image.height % factor != 0) {
    throw ShapeError("pool factor " + std::to_string(factor) + " does not divide the image size");
  }
  ImageF out(image.channels, image.height / factor, image.width / factor);
  const float inv = 1.0f / static_cast<float>(factor * factor);
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        float acc = 0.0f;
        for (int dy = 0; dy < factor; ++dy) {
          for (int dx = 0; dx < factor; ++dx) acc += image.at(c, y * factor + dy, x * factor + dx);
        }
        out.at(c, y, x) = acc * inv;
      }
    }
  }
  return out;
}

}  // namespace forcecast
