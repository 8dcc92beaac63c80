#pragma once

#include "monotta/detection.hpp"
#include "monotta/image.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace monotta {

enum class ShapeClass : int { kDisk = 0, kSquare = 1, kTriangle = 2 };
inline constexpr int kShapeClasses = 3;

const char* shape_name(ShapeClass c);

struct GroundTruthObject {
  int class_id = 0;
  Box box;
};

struct LabeledImage {
  std::string name;
  Image image;
  std::vector<GroundTruthObject> objects;
};

using Dataset = std::vector<LabeledImage>;

/// Parameters of one synthetic scene before rendering.
struct SceneSpec {
  static constexpr Index kCanvas = 64;
  static constexpr int kMinObjects = 1;
  static constexpr int kMaxObjects = 6;
  static constexpr double kMinSize = 6;
  static constexpr double kMaxSize = 16;

  struct Object {
    ShapeClass shape = ShapeClass::kDisk;
    double cx = 0, cy = 0, size = 0;
    std::array<float, 3> color{};
  };
  std::vector<Object> objects;
  std::uint64_t seed = 0;
};

/// Deals classes from shuffled decks of one card per class, keeping datasets balanced.
class ClassDeck {
 public:
  explicit ClassDeck(std::uint64_t seed) : rng_(seed) {}
  ShapeClass draw();

 private:
  std::mt19937_64 rng_;
  std::vector<int> cards_;
};

/// Draws a scene layout; object classes come from the deck.
SceneSpec sample_scene(std::uint64_t seed, ClassDeck& deck);

/// Rasterizes a scene over a smooth random background (4x supersampled).
LabeledImage render_scene(const SceneSpec& spec);

/// n labelled scenes; a pure function of (n, seed).
Dataset generate_scenes(int n, std::uint64_t seed);

/// Writes images/<name>.png plus annotations.csv (name,class_id,cx,cy,w,h).
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
/// Reads a directory written by save_dataset.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace monotta
