#pragma once

#include "monotta/tensor.hpp"

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace monotta {

using Plane = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// H x W x 3 image with channel planes in [0, 1].
struct Image {
  std::array<Plane, 3> rgb;

  Image() = default;
  Image(Index height, Index width) {
    for (auto& p : rgb) p = Plane::Zero(height, width);
  }
  static Image constant(Index height, Index width, float value) {
    Image img(height, width);
    for (auto& p : img.rgb) p.setConstant(value);
    return img;
  }

  Index height() const { return rgb[0].rows(); }
  Index width() const { return rgb[0].cols(); }
  bool all_finite() const { return rgb[0].allFinite() && rgb[1].allFinite() && rgb[2].allFinite(); }
  void clip() {
    for (auto& p : rgb) p = p.cwiseMax(0.0f).cwiseMin(1.0f);
  }
  bool operator==(const Image& o) const {
    for (int c = 0; c < 3; ++c) {
      if (rgb[c].rows() != o.rgb[c].rows() || rgb[c].cols() != o.rgb[c].cols() || !(rgb[c] == o.rgb[c]).all()) {
        return false;
      }
    }
    return true;
  }
};

/// Stacks equally sized images into a B x 3 x H x W tensor.
template <typename Scalar>
Tensor4<Scalar> to_tensor(std::span<const Image> images) {
  if (images.empty()) return {};
  const Index h = images.front().height(), w = images.front().width();
  Tensor4<Scalar> out(static_cast<Index>(images.size()), 3, h, w);
  for (Index n = 0; n < out.batch(); ++n) {
    const auto& img = images[static_cast<std::size_t>(n)];
    if (img.height() != h || img.width() != w) throw std::invalid_argument("to_tensor: mixed image sizes");
    for (int c = 0; c < 3; ++c) out.plane(n, c) = img.rgb[c].matrix().template cast<Scalar>();
  }
  return out;
}

/// Peak signal-to-noise ratio in dB for [0, 1] images (infinite when identical).
double psnr(const Image& a, const Image& b);

/// Reads an 8-bit PNG or JPEG (grey, RGB or RGBA) into [0, 1] RGB.
Image read_image(const std::filesystem::path& path);
/// Writes an 8-bit RGB PNG, rounding to the nearest level.
void write_png(const Image& image, const std::filesystem::path& path);

}  // namespace monotta

namespace monotta {

/// Consecutive stream images with their stream positions (gaps mark skipped inputs).
struct ImageBatch {
  std::vector<Image> images;
  std::vector<std::string> names;
  std::vector<int> indices;
};

}  // namespace monotta
