#include "monotta/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>

namespace monotta {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return f;
}

Image from_interleaved(const std::vector<unsigned char>& pixels, Index height, Index width, int components) {
  Image img(height, width);
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      const unsigned char* px = &pixels[static_cast<std::size_t>((y * width + x) * components)];
      for (int c = 0; c < 3; ++c) {
        const int src = components >= 3 ? c : 0;
        img.rgb[c](y, x) = static_cast<float>(px[src]) / 255.0f;
      }
    }
  }
  return img;
}

Image read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw std::runtime_error("png read failed for " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw std::runtime_error("png decode failed for " + path.string() + ": " + image.message);
  }
  return from_interleaved(buffer, image.height, image.width, 3);
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  char message[JMSG_LENGTH_MAX];
};

[[noreturn]] void jpeg_throw(j_common_ptr info) {
  auto* err = reinterpret_cast<JpegErrorManager*>(info->err);
  (*info->err->format_message)(info, err->message);
  throw std::runtime_error(std::string("jpeg decode failed: ") + err->message);
}

Image read_jpeg(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  jpeg_decompress_struct info{};
  JpegErrorManager err{};
  info.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_throw;
  jpeg_create_decompress(&info);
  try {
    jpeg_stdio_src(&info, file.get());
    jpeg_read_header(&info, TRUE);
    info.out_color_space = JCS_RGB;
    jpeg_start_decompress(&info);
    const Index width = info.output_width, height = info.output_height;
    const int components = info.output_components;
    std::vector<unsigned char> buffer(static_cast<std::size_t>(width * height * components));
    while (info.output_scanline < info.output_height) {
      JSAMPROW row = &buffer[static_cast<std::size_t>(info.output_scanline * width * components)];
      jpeg_read_scanlines(&info, &row, 1);
    }
    jpeg_finish_decompress(&info);
    jpeg_destroy_decompress(&info);
    return from_interleaved(buffer, height, width, components);
  } catch (...) {
    jpeg_destroy_decompress(&info);
    throw;
  }
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw std::invalid_argument("psnr: size mismatch");
  double sq = 0;
  for (int c = 0; c < 3; ++c) sq += (a.rgb[c].cast<double>() - b.rgb[c].cast<double>()).square().sum();
  const double mse = sq / static_cast<double>(3 * a.height() * a.width());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

Image read_image(const std::filesystem::path& path) {
  unsigned char magic[4] = {0, 0, 0, 0};
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    in.read(reinterpret_cast<char*>(magic), 4);
  }
  if (magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G') return read_png(path);
  if (magic[0] == 0xFF && magic[1] == 0xD8) return read_jpeg(path);
  throw std::runtime_error("unsupported image format: " + path.string());
}

void write_png(const Image& image, const std::filesystem::path& path) {
  const Index h = image.height(), w = image.width();
  std::vector<unsigned char> buffer(static_cast<std::size_t>(h * w * 3));
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image.rgb[c](y, x), 0.0f, 1.0f);
        buffer[static_cast<std::size_t>((y * w + x) * 3 + c)] = static_cast<unsigned char>(std::lround(v * 255.0f));
      }
    }
  }
  png_image out{};
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(w);
  out.height = static_cast<png_uint_32>(h);
  out.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&out, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw std::runtime_error("png write failed for " + path.string() + ": " + out.message);
  }
}

}  // namespace monotta
