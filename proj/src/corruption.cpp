#include "monotta/corruption.hpp"

#include "monotta/random.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace monotta {

namespace {

constexpr std::array<std::string_view, 13> kNames{
    "gaussian_noise", "shot_noise", "impulse_noise", "defocus_blur", "glass_blur", "motion_blur", "snow",
    "frost",          "fog",        "brightness",    "contrast",     "pixelate",   "saturate",
};

// Severity tables, indexed by severity - 1. Sizes are in pixels of the 64 px toy canvas.
constexpr std::array<double, 5> kGaussianSigma{0.08, 0.12, 0.18, 0.26, 0.38};
constexpr std::array<double, 5> kShotRate{60, 25, 12, 5, 3};
constexpr std::array<double, 5> kImpulseAmount{0.03, 0.06, 0.09, 0.17, 0.27};
constexpr std::array<double, 5> kDefocusRadius{1.0, 1.5, 2.0, 2.5, 3.0};
constexpr std::array<int, 5> kMotionLength{3, 5, 7, 9, 11};
constexpr std::array<double, 5> kBrightness{0.1, 0.2, 0.3, 0.4, 0.5};
constexpr std::array<double, 5> kContrast{0.4, 0.3, 0.2, 0.1, 0.05};
constexpr std::array<double, 5> kPixelate{0.5, 0.4, 0.3, 0.2, 0.15};

struct GlassParams {
  double sigma;
  int delta;
  int iterations;
};
constexpr std::array<GlassParams, 5> kGlass{{{0.6, 1, 1}, {0.65, 1, 2}, {0.7, 1, 3}, {0.75, 2, 2}, {0.8, 2, 3}}};

struct SaturateParams {
  double scale;
  double shift;
};
constexpr std::array<SaturateParams, 5> kSaturate{{{1.5, 0.0}, {2.0, 0.0}, {3.0, 0.0}, {5.0, 0.1}, {20.0, 0.2}}};

struct FogParams {
  double strength;
  double decay;
};
constexpr std::array<FogParams, 5> kFog{{{1.5, 2.0}, {2.0, 2.0}, {2.5, 1.7}, {3.0, 1.5}, {3.5, 1.4}}};

struct FrostParams {
  double keep;
  double overlay;
};
constexpr std::array<FrostParams, 5> kFrost{{{1.0, 0.4}, {0.8, 0.6}, {0.7, 0.7}, {0.65, 0.8}, {0.6, 0.9}}};

struct SnowParams {
  double loc, scale, zoom, threshold;
  int streak;
  double blend;
};
constexpr std::array<SnowParams, 5> kSnow{{{0.10, 0.3, 3.0, 0.50, 3, 0.80},
                                           {0.20, 0.3, 2.0, 0.50, 4, 0.70},
                                           {0.55, 0.3, 4.0, 0.90, 4, 0.70},
                                           {0.55, 0.3, 4.5, 0.85, 5, 0.65},
                                           {0.55, 0.3, 2.5, 0.85, 6, 0.55}}};

Index reflect(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

Plane gaussian_kernel_1d(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  Plane k(1, 2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) k(0, i + radius) = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
  k /= k.sum();
  return k;
}

Plane disk_kernel(double radius) {
  const int r = static_cast<int>(std::ceil(radius));
  Plane k = Plane::Zero(2 * r + 1, 2 * r + 1);
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x)
      if (x * x + y * y <= radius * radius) k(y + r, x + r) = 1.0f;
  k /= k.sum();
  return k;
}

// Centred line of `length` pixels at `angle`, splatted bilinearly at 4x sampling density.
Plane line_kernel(int length, double angle) {
  const int r = length / 2;
  Plane k = Plane::Zero(2 * r + 1, 2 * r + 1);
  const double c = std::cos(angle), s = std::sin(angle);
  const int samples = 4 * length;
  for (int i = 0; i <= samples; ++i) {
    const double t = -r + 2.0 * r * i / samples;
    const double x = r + t * c, y = r + t * s;
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    for (int dy = 0; dy <= 1; ++dy) {
      for (int dx = 0; dx <= 1; ++dx) {
        const int xx = x0 + dx, yy = y0 + dy;
        if (xx < 0 || yy < 0 || xx > 2 * r || yy > 2 * r) continue;
        k(yy, xx) += static_cast<float>((dx ? fx : 1 - fx) * (dy ? fy : 1 - fy));
      }
    }
  }
  k /= k.sum();
  return k;
}

Image map_planes(const Image& in, const auto& fn) {
  Image out;
  for (int c = 0; c < 3; ++c) out.rgb[c] = fn(in.rgb[c]);
  return out;
}

Plane bilinear_resize(const Plane& p, Index height, Index width) {
  Plane out(height, width);
  const double sy = static_cast<double>(p.rows()) / height, sx = static_cast<double>(p.cols()) / width;
  for (Index y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(p.rows() - 1));
    const Index y0 = static_cast<Index>(fy), y1 = std::min(y0 + 1, p.rows() - 1);
    const double wy = fy - y0;
    for (Index x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(p.cols() - 1));
      const Index x0 = static_cast<Index>(fx), x1 = std::min(x0 + 1, p.cols() - 1);
      const double wx = fx - x0;
      out(y, x) = static_cast<float>((1 - wy) * ((1 - wx) * p(y0, x0) + wx * p(y0, x1)) +
                                     wy * ((1 - wx) * p(y1, x0) + wx * p(y1, x1)));
    }
  }
  return out;
}

// Box-filter downsample to (h, w): each output cell averages the source area it covers.
Plane area_resize(const Plane& p, Index height, Index width) {
  Plane out = Plane::Zero(height, width);
  const double sy = static_cast<double>(p.rows()) / height, sx = static_cast<double>(p.cols()) / width;
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      const double y0 = y * sy, y1 = (y + 1) * sy, x0 = x * sx, x1 = (x + 1) * sx;
      double acc = 0.0, area = 0.0;
      for (Index v = static_cast<Index>(y0); v < std::min<Index>(p.rows(), static_cast<Index>(std::ceil(y1))); ++v) {
        const double wy = std::min<double>(v + 1, y1) - std::max<double>(v, y0);
        for (Index u = static_cast<Index>(x0); u < std::min<Index>(p.cols(), static_cast<Index>(std::ceil(x1)));
             ++u) {
          const double w = wy * (std::min<double>(u + 1, x1) - std::max<double>(u, x0));
          acc += w * p(v, u);
          area += w;
        }
      }
      out(y, x) = static_cast<float>(acc / area);
    }
  }
  return out;
}

Plane nearest_resize(const Plane& p, Index height, Index width) {
  Plane out(height, width);
  for (Index y = 0; y < height; ++y) {
    const Index v = std::min(p.rows() - 1, y * p.rows() / height);
    for (Index x = 0; x < width; ++x) out(y, x) = p(v, std::min(p.cols() - 1, x * p.cols() / width));
  }
  return out;
}

Image gaussian_noise(const Image& in, int s, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, kGaussianSigma[s]);
  return map_planes(in, [&](const Plane& p) {
    Plane out = p;
    for (Index i = 0; i < out.size(); ++i) out(i) = static_cast<float>(out(i) + noise(rng));
    return out;
  });
}

Image shot_noise(const Image& in, int s, std::mt19937_64& rng) {
  const double rate = kShotRate[s];
  return map_planes(in, [&](const Plane& p) {
    Plane out = p;
    for (Index i = 0; i < out.size(); ++i) {
      const double mean = std::max(0.0, static_cast<double>(p(i))) * rate;
      out(i) = mean > 0 ? static_cast<float>(std::poisson_distribution<int>(mean)(rng) / rate) : 0.0f;
    }
    return out;
  });
}

Image impulse_noise(const Image& in, int s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double amount = kImpulseAmount[s];
  return map_planes(in, [&](const Plane& p) {
    Plane out = p;
    for (Index i = 0; i < out.size(); ++i) {
      const double r = u(rng);
      if (r < amount) out(i) = r < amount / 2 ? 0.0f : 1.0f;
    }
    return out;
  });
}

Image defocus_blur(const Image& in, int s) {
  const Plane k = disk_kernel(kDefocusRadius[s]);
  return map_planes(in, [&](const Plane& p) { return imaging::gaussian_blur(imaging::filter2d(p, k), 0.5); });
}

Image glass_blur(const Image& in, int s, std::mt19937_64& rng) {
  const auto [sigma, delta, iterations] = kGlass[s];
  Image out = map_planes(in, [&](const Plane& p) { return imaging::gaussian_blur(p, sigma); });
  const Index h = in.height(), w = in.width();
  std::uniform_int_distribution<int> shift(-delta, delta);
  // Each pass moves every pixel to a random neighbour within delta (gather form, so no pixel travels further).
  for (int it = 0; it < iterations; ++it) {
    Image moved = out;
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        const Index yy = reflect(y + shift(rng), h), xx = reflect(x + shift(rng), w);
        for (int c = 0; c < 3; ++c) moved.rgb[c](y, x) = out.rgb[c](yy, xx);
      }
    }
    out = std::move(moved);
  }
  return map_planes(out, [&](const Plane& p) { return imaging::gaussian_blur(p, sigma); });
}

Image motion_blur(const Image& in, int s, std::mt19937_64& rng) {
  const double angle = std::uniform_real_distribution<double>(-std::numbers::pi / 4, std::numbers::pi / 4)(rng);
  const Plane k = line_kernel(kMotionLength[s], angle);
  return map_planes(in, [&](const Plane& p) { return imaging::filter2d(p, k); });
}

Image snow(const Image& in, int s, std::mt19937_64& rng) {
  const auto& c = kSnow[s];
  const Index h = in.height(), w = in.width();
  const Index sh = std::max<Index>(2, static_cast<Index>(std::ceil(h / c.zoom)));
  const Index sw = std::max<Index>(2, static_cast<Index>(std::ceil(w / c.zoom)));
  std::normal_distribution<double> flake(c.loc, c.scale);
  Plane layer(sh, sw);
  for (Index i = 0; i < layer.size(); ++i) layer(i) = static_cast<float>(flake(rng));
  layer = bilinear_resize(layer, h, w);
  layer = (layer < static_cast<float>(c.threshold)).select(0.0f, layer);
  const double angle = std::uniform_real_distribution<double>(-135.0, -45.0)(rng) * std::numbers::pi / 180.0;
  layer = imaging::filter2d(layer, line_kernel(2 * c.streak + 1, angle)).cwiseMax(0.0f).cwiseMin(1.0f);
  const Plane flipped = layer.reverse();

  Plane grey = (0.299f * in.rgb[0] + 0.587f * in.rgb[1] + 0.114f * in.rgb[2]) * 1.5f + 0.5f;
  Image out;
  for (int ch = 0; ch < 3; ++ch) {
    const Plane base = static_cast<float>(c.blend) * in.rgb[ch] +
                       static_cast<float>(1.0 - c.blend) * in.rgb[ch].cwiseMax(grey);
    out.rgb[ch] = base + layer + flipped;
  }
  return out;
}

Image frost(const Image& in, int s, std::uint64_t seed) {
  const auto& c = kFrost[s];
  const Index h = in.height(), w = in.width();
  Index size = 1;
  while (size < std::max(h, w)) size *= 2;
  // Sharpened ridges of a rough fractal read as ice crystals.
  Plane tex = imaging::plasma_fractal(size, 1.6, seed).topLeftCorner(h, w);
  tex = (1.0f - (2.0f * tex - 1.0f).abs()).pow(3.0f);
  constexpr std::array<float, 3> kTint{0.85f, 0.92f, 1.0f};
  Image out;
  for (int ch = 0; ch < 3; ++ch) {
    out.rgb[ch] = static_cast<float>(c.keep) * in.rgb[ch] + static_cast<float>(c.overlay) * kTint[ch] * tex;
  }
  return out;
}

Image fog(const Image& in, int s, std::uint64_t seed) {
  const auto& c = kFog[s];
  const Index h = in.height(), w = in.width();
  Index size = 1;
  while (size < std::max(h, w)) size *= 2;
  const Plane haze = imaging::plasma_fractal(size, c.decay, seed).topLeftCorner(h, w);
  float max_val = 0.0f;
  for (const auto& p : in.rgb) max_val = std::max(max_val, p.maxCoeff());
  const float scale = max_val / (max_val + static_cast<float>(c.strength));
  return map_planes(in, [&](const Plane& p) -> Plane { return (p + static_cast<float>(c.strength) * haze) * scale; });
}

// Applies fn(h, s, v) in place on every pixel.
Image hsv_map(const Image& in, const auto& fn) {
  Image out(in.height(), in.width());
  for (Index i = 0; i < in.rgb[0].size(); ++i) {
    float h, s, v;
    imaging::rgb_to_hsv(in.rgb[0](i), in.rgb[1](i), in.rgb[2](i), h, s, v);
    fn(h, s, v);
    imaging::hsv_to_rgb(h, std::clamp(s, 0.0f, 1.0f), std::clamp(v, 0.0f, 1.0f), out.rgb[0](i), out.rgb[1](i),
                        out.rgb[2](i));
  }
  return out;
}

Image brightness(const Image& in, int s) {
  const float gain = 1.0f + 2.0f * static_cast<float>(kBrightness[s]);
  return hsv_map(in, [&](float&, float&, float& v) { v *= gain; });
}

Image saturate(const Image& in, int s) {
  const auto [scale, shift] = kSaturate[s];
  return hsv_map(in, [&](float&, float& sat, float&) { sat = static_cast<float>(sat * scale + shift); });
}

Image contrast(const Image& in, int s) {
  const float c = static_cast<float>(kContrast[s]);
  return map_planes(in, [&](const Plane& p) -> Plane {
    const float mean = p.mean();
    return (p - mean) * c + mean;
  });
}

Image pixelate(const Image& in, int s) {
  const Index h = in.height(), w = in.width();
  const Index sh = std::max<Index>(1, static_cast<Index>(h * kPixelate[s]));
  const Index sw = std::max<Index>(1, static_cast<Index>(w * kPixelate[s]));
  return map_planes(in, [&](const Plane& p) { return nearest_resize(area_resize(p, sh, sw), h, w); });
}

void validate(const Image& image, const CorruptionSpec& spec) {
  if (spec.severity < 1 || spec.severity > 5) {
    throw std::invalid_argument("corruption severity must be in 1..5, got " + std::to_string(spec.severity));
  }
  if (image.height() == 0 || image.width() == 0) throw std::invalid_argument("corruption input is empty");
  for (const auto& p : image.rgb) {
    if (p.rows() != image.height() || p.cols() != image.width()) {
      throw std::invalid_argument("corruption input has mismatched channel planes");
    }
  }
  if (!image.all_finite()) throw std::invalid_argument("corruption input contains non-finite pixels");
}

std::string lower(std::string_view text) {
  std::string out(text);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

bool is_image_file(const std::filesystem::path& path) {
  const std::string ext = lower(path.extension().string());
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

std::string_view corruption_name(CorruptionKind kind) { return kNames.at(static_cast<std::size_t>(kind)); }

std::optional<CorruptionKind> parse_corruption(std::string_view text) {
  for (CorruptionKind kind : kAllCorruptions) {
    if (corruption_name(kind) == text) return kind;
  }
  return std::nullopt;
}

Image apply_corruption(const Image& image, const CorruptionSpec& spec) {
  validate(image, spec);
  const int s = spec.severity - 1;
  std::mt19937_64 rng(spec.seed);
  Image out;
  switch (spec.kind) {
    case CorruptionKind::kGaussianNoise: out = gaussian_noise(image, s, rng); break;
    case CorruptionKind::kShotNoise: out = shot_noise(image, s, rng); break;
    case CorruptionKind::kImpulseNoise: out = impulse_noise(image, s, rng); break;
    case CorruptionKind::kDefocusBlur: out = defocus_blur(image, s); break;
    case CorruptionKind::kGlassBlur: out = glass_blur(image, s, rng); break;
    case CorruptionKind::kMotionBlur: out = motion_blur(image, s, rng); break;
    case CorruptionKind::kSnow: out = snow(image, s, rng); break;
    case CorruptionKind::kFrost: out = frost(image, s, spec.seed); break;
    case CorruptionKind::kFog: out = fog(image, s, spec.seed); break;
    case CorruptionKind::kBrightness: out = brightness(image, s); break;
    case CorruptionKind::kContrast: out = contrast(image, s); break;
    case CorruptionKind::kPixelate: out = pixelate(image, s); break;
    case CorruptionKind::kSaturate: out = saturate(image, s); break;
  }
  out.clip();
  return out;
}

std::uint64_t image_seed(std::uint64_t stream_seed, int index) {
  return derive_seed(stream_seed, static_cast<std::uint64_t>(index));
}

void write_manifest(const std::vector<ManifestRow>& rows, std::ostream& out) {
  out << "index,filename,kind,severity,seed,status\n";
  for (const auto& r : rows) {
    out << r.index << ',' << r.filename << ',' << corruption_name(r.kind) << ',' << r.severity << ',' << r.seed << ','
        << (r.skipped ? "skipped" : "ok") << '\n';
  }
}

CorruptedStream::CorruptedStream(std::vector<Entry> entries, CorruptionSpec spec, int batch_size)
    : entries_(std::move(entries)), spec_(spec), batch_size_(batch_size) {
  if (batch_size < 1) throw std::invalid_argument("stream batch size must be >= 1");
  if (spec.severity < 1 || spec.severity > 5) throw std::invalid_argument("corruption severity must be in 1..5");
}

CorruptedStream CorruptedStream::from_directory(const std::filesystem::path& dir, CorruptionSpec spec,
                                                int batch_size) {
  if (!std::filesystem::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir.string());
  std::vector<Entry> entries;
  for (const auto& item : std::filesystem::directory_iterator(dir)) {
    if (item.is_regular_file() && is_image_file(item.path())) {
      entries.push_back({item.path().filename().string(), item.path(), std::nullopt});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.name < b.name; });
  return CorruptedStream(std::move(entries), spec, batch_size);
}

CorruptedStream CorruptedStream::from_images(std::vector<Image> images, std::vector<std::string> names,
                                             CorruptionSpec spec, int batch_size) {
  if (images.size() != names.size()) throw std::invalid_argument("from_images: names/images size mismatch");
  std::vector<Entry> entries;
  entries.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) entries.push_back({names[i], {}, std::move(images[i])});
  return CorruptedStream(std::move(entries), spec, batch_size);
}

std::optional<ImageBatch> CorruptedStream::next() {
  ImageBatch batch;
  while (cursor_ < entries_.size() && static_cast<int>(batch.images.size()) < batch_size_) {
    const int index = static_cast<int>(cursor_);
    Entry& entry = entries_[cursor_++];
    ManifestRow row{index, entry.name, spec_.kind, spec_.severity, image_seed(spec_.seed, index), false};
    try {
      const Image clean = entry.image ? *entry.image : read_image(entry.path);
      batch.images.push_back(apply_corruption(clean, {spec_.kind, spec_.severity, row.seed}));
      batch.names.push_back(entry.name);
      batch.indices.push_back(index);
    } catch (const std::exception&) {
      row.skipped = true;
    }
    entry.image.reset();
    manifest_.push_back(std::move(row));
  }
  if (batch.images.empty()) return std::nullopt;
  return batch;
}

namespace imaging {

Plane filter2d(const Plane& p, const Plane& kernel) {
  if (kernel.rows() % 2 == 0 || kernel.cols() % 2 == 0) throw std::invalid_argument("filter2d: kernel must be odd");
  const Index ry = kernel.rows() / 2, rx = kernel.cols() / 2;
  Plane out(p.rows(), p.cols());
  for (Index y = 0; y < p.rows(); ++y) {
    for (Index x = 0; x < p.cols(); ++x) {
      double acc = 0.0;
      for (Index ky = 0; ky < kernel.rows(); ++ky) {
        const Index yy = reflect(y + ky - ry, p.rows());
        for (Index kx = 0; kx < kernel.cols(); ++kx) {
          const float k = kernel(ky, kx);
          if (k != 0.0f) acc += k * p(yy, reflect(x + kx - rx, p.cols()));
        }
      }
      out(y, x) = static_cast<float>(acc);
    }
  }
  return out;
}

Plane gaussian_blur(const Plane& p, double sigma) {
  if (sigma <= 0) return p;
  const Plane row = gaussian_kernel_1d(sigma);
  const Plane col = row.transpose();
  return filter2d(filter2d(p, row), col);
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
  const float mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const float d = mx - mn;
  v = mx;
  s = mx > 0 ? d / mx : 0.0f;
  if (d <= 0) {
    h = 0;
    return;
  }
  if (mx == r) {
    h = (g - b) / d;
  } else if (mx == g) {
    h = 2.0f + (b - r) / d;
  } else {
    h = 4.0f + (r - g) / d;
  }
  h /= 6.0f;
  if (h < 0) h += 1.0f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  const float h6 = (h - std::floor(h)) * 6.0f;
  const int sector = std::min(5, static_cast<int>(h6));
  const float f = h6 - sector;
  const float p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

Plane plasma_fractal(Index size, double roughness_decay, std::uint64_t seed) {
  if (size < 2 || (size & (size - 1)) != 0) throw std::invalid_argument("plasma_fractal: size must be a power of two");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Plane map = Plane::Zero(size, size);
  double wibble = 100.0;
  auto at = [&](Index y, Index x) -> float& { return map((y + size) % size, (x + size) % size); };
  for (Index step = size; step >= 2; step /= 2) {
    const Index half = step / 2;
    wibble /= roughness_decay;
    // Square step: cell centres from the four corners.
    for (Index y = 0; y < size; y += step) {
      for (Index x = 0; x < size; x += step) {
        const double mean = (at(y, x) + at(y + step, x) + at(y, x + step) + at(y + step, x + step)) / 4.0;
        at(y + half, x + half) = static_cast<float>(mean + wibble * u(rng));
      }
    }
    // Diamond step: edge midpoints from their four neighbours.
    for (Index y = 0; y < size; y += half) {
      for (Index x = (y / half) % 2 == 0 ? half : 0; x < size; x += step) {
        const double mean = (at(y - half, x) + at(y + half, x) + at(y, x - half) + at(y, x + half)) / 4.0;
        at(y, x) = static_cast<float>(mean + wibble * u(rng));
      }
    }
  }
  map -= map.minCoeff();
  const float mx = map.maxCoeff();
  if (mx > 0) map /= mx;
  return map;
}

}  // namespace imaging

}  // namespace monotta
