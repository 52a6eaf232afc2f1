#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gocard/tensor.hpp"

namespace gocard {

// 8-bit RGB raster, row-major, interleaved channels.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // height*width*3

  bool empty() const { return pixels.empty(); }
  std::uint8_t* at(int y, int x) {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  const std::uint8_t* at(int y, int x) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  static Image filled(int height, int width, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  bool operator==(const Image&) const = default;
};

Image load_png(const std::string& path);
void save_png(const std::string& path, const Image& image);

// (H, W, 3) tensor scaled to [0, 1].
Tensor image_to_tensor(const Image& image);

}  // namespace gocard
