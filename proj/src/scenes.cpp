#include "monotta/scenes.hpp"

#include "monotta/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace monotta {

namespace {

// Base fill colour of each class family; objects jitter around it.
constexpr std::array<std::array<float, 3>, kShapeClasses> kFamilyColor{{
    {0.85f, 0.25f, 0.20f},
    {0.20f, 0.75f, 0.30f},
    {0.25f, 0.35f, 0.90f},
}};
// Family colours are pulled halfway towards mid grey.
constexpr float kFamilyContrast = 0.5f;
constexpr float kColorJitter = 0.12f;
constexpr float kBackgroundGrain = 0.12f;
constexpr int kSupersample = 4;

bool covers(const SceneSpec::Object& o, double px, double py) {
  const double r = 0.5 * o.size;
  const double dx = px - o.cx, dy = py - o.cy;
  switch (o.shape) {
    case ShapeClass::kDisk:
      return dx * dx + dy * dy <= r * r;
    case ShapeClass::kSquare:
      return std::abs(dx) <= r && std::abs(dy) <= r;
    case ShapeClass::kTriangle: {
      // Apex at the top centre, base along the bottom edge of the box.
      if (dy < -r || dy > r) return false;
      const double half_width = 0.5 * (dy + r);
      return std::abs(dx) <= half_width;
    }
  }
  return false;
}

double box_iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
  const double ih = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
  if (iw <= 0 || ih <= 0) return 0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

Box object_box(const SceneSpec::Object& o) { return {o.cx, o.cy, o.size, o.size}; }

}  // namespace

const char* shape_name(ShapeClass c) {
  switch (c) {
    case ShapeClass::kDisk:
      return "disk";
    case ShapeClass::kSquare:
      return "square";
    case ShapeClass::kTriangle:
      return "triangle";
  }
  return "unknown";
}

ShapeClass ClassDeck::draw() {
  if (cards_.empty()) {
    for (int k = kShapeClasses - 1; k >= 0; --k) cards_.push_back(k);
    std::shuffle(cards_.begin(), cards_.end(), rng_);
  }
  const int card = cards_.back();
  cards_.pop_back();
  return static_cast<ShapeClass>(card);
}

SceneSpec sample_scene(std::uint64_t seed, ClassDeck& deck) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count_dist(SceneSpec::kMinObjects, SceneSpec::kMaxObjects);
  std::uniform_real_distribution<double> size_dist(SceneSpec::kMinSize, SceneSpec::kMaxSize);
  std::uniform_real_distribution<float> jitter(-kColorJitter, kColorJitter);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SceneSpec spec;
  spec.seed = seed;
  const int wanted = count_dist(rng);
  const double canvas = static_cast<double>(SceneSpec::kCanvas);
  for (int i = 0; i < wanted; ++i) {
    SceneSpec::Object o;
    o.shape = deck.draw();
    bool placed = false;
    for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
      o.size = size_dist(rng);
      const double half = 0.5 * o.size;
      o.cx = half + unit(rng) * (canvas - o.size);
      o.cy = half + unit(rng) * (canvas - o.size);
      placed = std::none_of(spec.objects.begin(), spec.objects.end(), [&](const SceneSpec::Object& other) {
        return box_iou(object_box(o), object_box(other)) > 0.0;
      });
    }
    if (!placed) continue;
    const auto& base = kFamilyColor[static_cast<std::size_t>(o.shape)];
    for (int c = 0; c < 3; ++c) {
      const float muted = 0.5f + kFamilyContrast * (base[static_cast<std::size_t>(c)] - 0.5f);
      o.color[static_cast<std::size_t>(c)] = std::clamp(muted + jitter(rng), 0.0f, 1.0f);
    }
    spec.objects.push_back(o);
  }
  if (spec.objects.empty()) {
    // Only reachable when every attempt failed for the first object, which cannot happen on an empty canvas.
    throw std::logic_error("sample_scene: no object placed");
  }
  return spec;
}

LabeledImage render_scene(const SceneSpec& spec) {
  const Index n = SceneSpec::kCanvas;
  std::mt19937_64 rng(derive_seed(spec.seed, 0xB6));
  std::uniform_real_distribution<float> tone(0.30f, 0.60f);
  std::uniform_real_distribution<float> tint(-0.05f, 0.05f);

  // Low-frequency background: a 5 x 5 control grid, bilinearly interpolated.
  constexpr int kGrid = 5;
  std::array<std::array<std::array<float, 3>, kGrid>, kGrid> control{};
  for (auto& row : control) {
    for (auto& cell : row) {
      const float base = tone(rng);
      for (auto& v : cell) v = base + tint(rng);
    }
  }
  LabeledImage out;
  out.image = Image(n, n);
  const float scale = static_cast<float>(kGrid - 1) / static_cast<float>(n - 1);
  for (Index y = 0; y < n; ++y) {
    for (Index x = 0; x < n; ++x) {
      const float gy = static_cast<float>(y) * scale, gx = static_cast<float>(x) * scale;
      const int y0 = std::min(static_cast<int>(gy), kGrid - 2), x0 = std::min(static_cast<int>(gx), kGrid - 2);
      const float fy = gy - static_cast<float>(y0), fx = gx - static_cast<float>(x0);
      for (int c = 0; c < 3; ++c) {
        const float top = control[y0][x0][c] * (1 - fx) + control[y0][x0 + 1][c] * fx;
        const float bottom = control[y0 + 1][x0][c] * (1 - fx) + control[y0 + 1][x0 + 1][c] * fx;
        out.image.rgb[c](y, x) = top * (1 - fy) + bottom * fy;
      }
    }
  }

  // Fine grain on the background only; objects are flat fills drawn on top.
  std::normal_distribution<float> grain(0.0f, kBackgroundGrain);
  for (auto& p : out.image.rgb) p = p.unaryExpr([&](float v) { return v + grain(rng); });
  out.image.clip();

  for (const auto& o : spec.objects) {
    const Index x_lo = std::max<Index>(0, static_cast<Index>(std::floor(o.cx - 0.5 * o.size)));
    const Index x_hi = std::min<Index>(n - 1, static_cast<Index>(std::ceil(o.cx + 0.5 * o.size)));
    const Index y_lo = std::max<Index>(0, static_cast<Index>(std::floor(o.cy - 0.5 * o.size)));
    const Index y_hi = std::min<Index>(n - 1, static_cast<Index>(std::ceil(o.cy + 0.5 * o.size)));
    for (Index y = y_lo; y <= y_hi; ++y) {
      for (Index x = x_lo; x <= x_hi; ++x) {
        int hits = 0;
        for (int sy = 0; sy < kSupersample; ++sy) {
          for (int sx = 0; sx < kSupersample; ++sx) {
            const double px = static_cast<double>(x) + (sx + 0.5) / kSupersample;
            const double py = static_cast<double>(y) + (sy + 0.5) / kSupersample;
            hits += covers(o, px, py) ? 1 : 0;
          }
        }
        if (hits == 0) continue;
        const float cover = static_cast<float>(hits) / (kSupersample * kSupersample);
        for (int c = 0; c < 3; ++c) {
          float& v = out.image.rgb[c](y, x);
          v = v * (1 - cover) + o.color[static_cast<std::size_t>(c)] * cover;
        }
      }
    }
    out.objects.push_back({static_cast<int>(o.shape), object_box(o)});
  }
  return out;
}

Dataset generate_scenes(int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_scenes: n must be >= 1");
  Dataset data;
  data.reserve(static_cast<std::size_t>(n));
  ClassDeck deck(derive_seed(seed, 0xDEC));
  for (int i = 0; i < n; ++i) {
    LabeledImage item = render_scene(sample_scene(derive_seed(seed, static_cast<std::uint64_t>(i)), deck));
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%05d", i);
    item.name = name;
    data.push_back(std::move(item));
  }
  return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  std::ofstream csv(dir / "annotations.csv");
  if (!csv) throw std::runtime_error("cannot write " + (dir / "annotations.csv").string());
  csv << "name,class_id,cx,cy,w,h\n";
  csv.precision(17);
  for (const auto& item : data) {
    write_png(item.image, dir / "images" / (item.name + ".png"));
    for (const auto& o : item.objects) {
      csv << item.name << ',' << o.class_id << ',' << o.box.cx << ',' << o.box.cy << ',' << o.box.w << ','
          << o.box.h << '\n';
    }
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::map<std::string, std::vector<GroundTruthObject>> labels;
  std::ifstream csv(dir / "annotations.csv");
  if (!csv) throw std::runtime_error("cannot read " + (dir / "annotations.csv").string());
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string name, field;
    std::getline(row, name, ',');
    GroundTruthObject o;
    std::vector<double> values;
    while (std::getline(row, field, ',')) values.push_back(std::stod(field));
    if (values.size() != 5) throw std::runtime_error("malformed annotation row: " + line);
    o.class_id = static_cast<int>(values[0]);
    o.box = {values[1], values[2], values[3], values[4]};
    labels[name].push_back(o);
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir / "images")) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  Dataset data;
  for (const auto& f : files) {
    LabeledImage item;
    item.name = f.stem().string();
    item.image = read_image(f);
    if (auto it = labels.find(item.name); it != labels.end()) item.objects = it->second;
    data.push_back(std::move(item));
  }
  return data;
}

}  // namespace monotta
