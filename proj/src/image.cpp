#include "gocard/image.hpp"

#include <png.h>

#include "gocard/errors.hpp"

namespace gocard {

Image Image::filled(int height, int width, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (height <= 0 || width <= 0) throw GeometryError("image dimensions must be positive");
  Image img;
  img.height = height;
  img.width = width;
  img.pixels.resize(static_cast<std::size_t>(height) * width * 3);
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    img.pixels[i] = r;
    img.pixels[i + 1] = g;
    img.pixels[i + 2] = b;
  }
  return img;
}

Image load_png(const std::string& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw DataError("cannot read PNG '" + path + "': " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  Image img;
  img.height = static_cast<int>(png.height);
  img.width = static_cast<int>(png.width);
  img.pixels.resize(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&png);
    throw DataError("cannot decode PNG '" + path + "': " + png.message);
  }
  return img;
}

void save_png(const std::string& path, const Image& image) {
  if (image.empty()) throw DataError("refusing to write an empty image to '" + path + "'");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw DataError("cannot write PNG '" + path + "': " + png.message);
  }
}

Tensor image_to_tensor(const Image& image) {
  if (image.empty()) throw DataError("cannot convert an empty image to a tensor");
  std::vector<double> data(image.pixels.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = image.pixels[i] / 255.0;
  return Tensor::from_data({image.height, image.width, 3}, std::move(data));
}

}  // namespace gocard
