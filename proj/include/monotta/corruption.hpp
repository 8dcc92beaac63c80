#pragma once

#include "monotta/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace monotta {

enum class CorruptionKind {
  kGaussianNoise,
  kShotNoise,
  kImpulseNoise,
  kDefocusBlur,
  kGlassBlur,
  kMotionBlur,
  kSnow,
  kFrost,
  kFog,
  kBrightness,
  kContrast,
  kPixelate,
  kSaturate,
};

inline constexpr std::array<CorruptionKind, 13> kAllCorruptions{
    CorruptionKind::kGaussianNoise, CorruptionKind::kShotNoise,  CorruptionKind::kImpulseNoise,
    CorruptionKind::kDefocusBlur,   CorruptionKind::kGlassBlur,  CorruptionKind::kMotionBlur,
    CorruptionKind::kSnow,          CorruptionKind::kFrost,      CorruptionKind::kFog,
    CorruptionKind::kBrightness,    CorruptionKind::kContrast,   CorruptionKind::kPixelate,
    CorruptionKind::kSaturate,
};

std::string_view corruption_name(CorruptionKind kind);
std::optional<CorruptionKind> parse_corruption(std::string_view text);

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::kGaussianNoise;
  int severity = 1;  // 1..5
  std::uint64_t seed = 0;
};

/// Deterministic corruption of an RGB image in [0, 1]; output is clipped to [0, 1].
/// Throws std::invalid_argument on severity outside 1..5 or non-finite pixels.
Image apply_corruption(const Image& image, const CorruptionSpec& spec);

/// Per-image seed used by streams: a function of (stream seed, stream index).
std::uint64_t image_seed(std::uint64_t stream_seed, int index);

struct ManifestRow {
  int index = 0;
  std::string filename;
  CorruptionKind kind = CorruptionKind::kGaussianNoise;
  int severity = 1;
  std::uint64_t seed = 0;
  bool skipped = false;
};

void write_manifest(const std::vector<ManifestRow>& rows, std::ostream& out);

/// Ordered, batched stream of corrupted images.
///
/// Images come either from files (decoded lazily; unreadable files are
/// marked skipped in the manifest and left out) or from memory.
class CorruptedStream {
 public:
  /// Every PNG/JPEG file in dir, in filename order.
  static CorruptedStream from_directory(const std::filesystem::path& dir, CorruptionSpec spec, int batch_size);
  static CorruptedStream from_images(std::vector<Image> images, std::vector<std::string> names, CorruptionSpec spec,
                                     int batch_size);

  std::optional<ImageBatch> next();

  /// Rows for every input visited so far (all inputs once the stream is drained).
  const std::vector<ManifestRow>& manifest() const { return manifest_; }
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::string name;
    std::filesystem::path path;
    std::optional<Image> image;
  };
  CorruptedStream(std::vector<Entry> entries, CorruptionSpec spec, int batch_size);

  std::vector<Entry> entries_;
  CorruptionSpec spec_;
  int batch_size_;
  std::size_t cursor_ = 0;
  std::vector<ManifestRow> manifest_;
};

/// Helpers shared by the recipes; exposed for tests.
namespace imaging {

/// Separable Gaussian blur with reflected borders.
Plane gaussian_blur(const Plane& p, double sigma);
/// Dense 2D correlation with reflected borders; kernel must have odd extents.
Plane filter2d(const Plane& p, const Plane& kernel);
void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v);
void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b);
/// Square diamond-square fractal in [0, 1] of side `size` (a power of two).
Plane plasma_fractal(Index size, double roughness_decay, std::uint64_t seed);

}  // namespace imaging

}  // namespace monotta
