#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rmae {

// Interleaved (HWC, row-major) float image with values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> pixels;

  Image() = default;
  Image(int w, int h, int c = 3, float fill = 0.0f)
      : width(w), height(h), channels(c),
        pixels(static_cast<std::size_t>(w) * h * c, fill) {}

  bool empty() const { return width <= 0 || height <= 0; }
  float& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// Binary P6/P5 readers and writers (8-bit). Grayscale files load as 3-channel.
Image read_pnm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& img);

// 8-bit grayscale PGM of arbitrary bytes (heatmaps).
void write_pgm8(const std::filesystem::path& path, int width, int height,
                const std::vector<std::uint8_t>& gray);

// RGB PNG encoding (zlib deflate, no filtering).
std::string encode_png(const Image& img);

// Splits an image into non-overlapping p x p patches in row-major patch order.
// Each patch is flattened as (row, col, channel). Result is N x (p*p*C).
std::vector<float> patchify(const Image& img, int p);

}  // namespace rmae
