#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pnrf/geometry.hpp"
#include "pnrf/util.hpp"

namespace pnrf {

// Row-major, top-down raster with float values; color data lives in [0,1].
struct Image {
  int width = 0, height = 0, channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.f)
      : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {}

  float& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  bool same_dims(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

inline float quantize8(float v) {
  const float c = std::min(1.f, std::max(0.f, v));
  return std::round(c * 255.f) / 255.f;
}

// ---- PNG (8-bit) ----

inline void write_png(const std::string& path, const Image& img) {
  check_arg(img.channels == 3, cat("write_png: expected 3 channels, got ", img.channels));
  std::vector<uint8_t> bytes(img.data.size());
  for (size_t i = 0; i < bytes.size(); ++i) {
    const float c = std::min(1.f, std::max(0.f, img.data[i]));
    bytes[i] = static_cast<uint8_t>(std::lround(c * 255.f));
  }
  png_image pi{};
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.width);
  pi.height = static_cast<png_uint_32>(img.height);
  pi.format = PNG_FORMAT_RGB;
  const int ok = png_image_write_to_file(&pi, path.c_str(), 0, bytes.data(), 0, nullptr);
  check(ok != 0, cat("write_png: ", path, ": ", pi.message));
}

// Always decodes to RGBA; files without an alpha channel come back opaque.
inline Image read_png(const std::string& path) {
  png_image pi{};
  pi.version = PNG_IMAGE_VERSION;
  check(png_image_begin_read_from_file(&pi, path.c_str()) != 0,
        cat("read_png: ", path, ": ", pi.message));
  pi.format = PNG_FORMAT_RGBA;
  std::vector<uint8_t> bytes(PNG_IMAGE_SIZE(pi));
  if (png_image_finish_read(&pi, nullptr, bytes.data(), 0, nullptr) == 0) {
    const std::string msg = pi.message;
    png_image_free(&pi);
    throw std::runtime_error(cat("read_png: ", path, ": ", msg));
  }
  Image img(static_cast<int>(pi.width), static_cast<int>(pi.height), 4);
  for (size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.f;
  return img;
}

// RGBA over a constant background -> RGB.
inline Image composite_over(const Image& rgba, const Vec3& background) {
  check_arg(rgba.channels == 4, "composite_over: expected RGBA input");
  Image out(rgba.width, rgba.height, 3);
  const float bg[3] = {static_cast<float>(background.x), static_cast<float>(background.y),
                       static_cast<float>(background.z)};
  for (int y = 0; y < rgba.height; ++y)
    for (int x = 0; x < rgba.width; ++x) {
      const float a = rgba.at(x, y, 3);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = a * rgba.at(x, y, c) + (1.f - a) * bg[c];
    }
  return out;
}

// ---- PFM (grayscale float raster; negative scale marks little-endian) ----

inline void write_pfm(const std::string& path, const Image& img) {
  check_arg(img.channels == 1, cat("write_pfm: expected 1 channel, got ", img.channels));
  std::ofstream f(path, std::ios::binary);
  check(f.good(), cat("write_pfm: cannot open ", path));
  f << "Pf\n" << img.width << " " << img.height << "\n-1.0\n";
  // PFM stores rows bottom-up.
  for (int y = img.height - 1; y >= 0; --y)
    f.write(reinterpret_cast<const char*>(&img.data[static_cast<size_t>(y) * img.width]),
            static_cast<std::streamsize>(img.width) * 4);
  check(f.good(), cat("write_pfm: write failed: ", path));
}

inline Image read_pfm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), cat("read_pfm: cannot open ", path));
  std::string tag;
  f >> tag;
  check(tag == "Pf", cat("read_pfm: ", path, ": expected grayscale \"Pf\" header, got \"", tag, "\""));
  int w = 0, h = 0;
  double scale = 0;
  f >> w >> h >> scale;
  check(f.good() && w > 0 && h > 0, cat("read_pfm: ", path, ": bad dimensions"));
  check(scale < 0, cat("read_pfm: ", path, ": big-endian data not supported"));
  f.get();  // single whitespace after the scale line
  Image img(w, h, 1);
  for (int y = h - 1; y >= 0; --y)
    f.read(reinterpret_cast<char*>(&img.data[static_cast<size_t>(y) * w]),
           static_cast<std::streamsize>(w) * 4);
  check(f.good(), cat("read_pfm: ", path, ": truncated raster"));
  return img;
}

// ---- metrics ----

inline constexpr double kPsnrCap = 99.0;  // zero-MSE sentinel

inline double mse(const Image& a, const Image& b) {
  check_arg(a.same_dims(b), cat("mse: image dims differ (", a.width, "x", a.height, "x",
                                a.channels, " vs ", b.width, "x", b.height, "x", b.channels, ")"));
  double acc = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

inline double psnr_from_mse(double m) {
  if (m <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

inline double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

}  // namespace pnrf
