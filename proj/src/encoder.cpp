#include "sldml/encoder.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>
#include <vector>

#include <png.h>

namespace sldml {

void export_png(const SignalImage& img, const std::filesystem::path& path) {
  if (img.height < 1 || img.width < 1) throw Error(ErrorCode::InvalidArgument, "empty image");

  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw Error(ErrorCode::IoError, "cannot open " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "libpng initialisation failed");
  }

  std::vector<png_byte> buffer(static_cast<std::size_t>(img.height * img.width * 3));
  for (Eigen::Index h = 0; h < img.height; ++h) {
    for (Eigen::Index w = 0; w < img.width; ++w) {
      for (Eigen::Index c = 0; c < 3; ++c) {
        const double v = std::clamp(img.at(h, w, c), 0.0, 1.0);
        buffer[std::size_t((h * img.width + w) * 3 + c)] = static_cast<png_byte>(std::lround(v * 255.0));
      }
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (Eigen::Index h = 0; h < img.height; ++h) rows[std::size_t(h)] = buffer.data() + h * img.width * 3;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace sldml
