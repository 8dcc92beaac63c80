#include "monotta/checkpoint.hpp"

#include "monotta/tta.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace monotta {

namespace {

constexpr std::array<char, 8> kMagic{'M', 'O', 'N', 'O', 'T', 'T', 'A', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T value) {
  const auto* bytes = reinterpret_cast<const char*>(&value);
  out.append(bytes, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos, const std::filesystem::path& path) {
  if (pos + sizeof(T) > in.size()) throw std::runtime_error("checkpoint truncated: " + path.string());
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

// Tensors in serialization order: parameters, then running-statistics buffers.
template <typename Model>
auto tensor_views(Model& model) {
  std::vector<std::pair<std::string, decltype(&model.parameters()[0]->value)>> out;
  for (auto* p : model.parameters()) out.emplace_back(p->name, &p->value);
  for (auto* b : model.buffers()) out.emplace_back(b->name, &b->value);
  return out;
}

std::string digest(const std::string& bytes) {
  return sha256_hex({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()});
}

}  // namespace

nlohmann::json to_json(const Architecture& arch) {
  return {{"input_size", arch.input_size}, {"classes", arch.classes},          {"width", arch.width},
          {"stride", arch.stride},         {"block_strides", arch.block_strides}, {"descriptor", arch.descriptor()}};
}

Architecture architecture_from_json(const nlohmann::json& j) {
  Architecture arch;
  arch.input_size = j.at("input_size").get<Index>();
  arch.classes = j.at("classes").get<Index>();
  arch.width = j.at("width").get<Index>();
  arch.stride = j.at("stride").get<Index>();
  arch.block_strides = j.at("block_strides").get<std::array<Index, 4>>();
  if (j.contains("descriptor") && j.at("descriptor").get<std::string>() != arch.descriptor()) {
    throw std::runtime_error("architecture descriptor does not match its fields");
  }
  return arch;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"n_train", c.n_train},
          {"n_val", c.n_val},
          {"seed", c.seed},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"base_learning_rate", c.base_learning_rate},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"decay_at", c.decay_at},
          {"target_map", c.target_map},
          {"n_max", c.n_max},
          {"score_floor", c.score_floor},
          {"iou_threshold", c.iou_threshold}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  read("n_train", c.n_train);
  read("n_val", c.n_val);
  read("seed", c.seed);
  read("epochs", c.epochs);
  read("batch_size", c.batch_size);
  read("base_learning_rate", c.base_learning_rate);
  read("momentum", c.momentum);
  read("weight_decay", c.weight_decay);
  read("decay_at", c.decay_at);
  read("target_map", c.target_map);
  read("n_max", c.n_max);
  read("score_floor", c.score_floor);
  read("iou_threshold", c.iou_threshold);
  for (const auto& [key, _] : j.items()) {
    if (!to_json(TrainConfig{}).contains(key)) throw std::invalid_argument("unknown training config key: " + key);
  }
  return c;
}

void save_checkpoint(const DetectorCheckpoint& checkpoint, const std::filesystem::path& path) {
  auto& model = const_cast<ToyDetector<float>&>(checkpoint.model);
  std::string payload;
  nlohmann::json table = nlohmann::json::array();
  for (auto* p : model.parameters()) {
    table.push_back({{"name", p->name}, {"kind", "parameter"}, {"shape", p->shape}, {"dtype", "float32"},
                     {"norm_affine", p->norm_affine}, {"offset", payload.size()}, {"count", p->value.size()}});
    payload.append(reinterpret_cast<const char*>(p->value.data()), sizeof(float) * p->value.size());
  }
  for (auto* b : model.buffers()) {
    table.push_back({{"name", b->name}, {"kind", "buffer"}, {"shape", {b->value.size()}}, {"dtype", "float32"},
                     {"offset", payload.size()}, {"count", b->value.size()}});
    payload.append(reinterpret_cast<const char*>(b->value.data()), sizeof(float) * b->value.size());
  }
  const nlohmann::json header{{"format", "monotta-checkpoint"},
                              {"version", kCheckpointVersion},
                              {"architecture", to_json(model.architecture())},
                              {"train_config", to_json(checkpoint.train_config)},
                              {"clean_map", checkpoint.clean_map},
                              {"tensors", table},
                              {"payload_bytes", payload.size()},
                              {"payload_sha256", digest(payload)}};
  const std::string header_text = header.dump();

  std::string out(kMagic.begin(), kMagic.end());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, header_text.size());
  out += header_text;
  out += payload;

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot write checkpoint " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw std::runtime_error("failed writing checkpoint " + path.string());
}

DetectorCheckpoint load_checkpoint(const std::filesystem::path& path, const Architecture* expected) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

  if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw std::runtime_error("not a checkpoint (bad magic): " + path.string());
  }
  std::size_t pos = kMagic.size();
  const auto version = take<std::uint32_t>(bytes, pos, path);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                             std::to_string(kCheckpointVersion) + "): " + path.string());
  }
  const auto header_len = take<std::uint64_t>(bytes, pos, path);
  if (header_len > bytes.size() - pos) throw std::runtime_error("checkpoint truncated in header: " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint header unreadable: " + std::string(e.what()));
  }
  pos += header_len;
  const std::string payload = bytes.substr(pos);
  if (payload.size() != header.at("payload_bytes").get<std::size_t>()) {
    throw std::runtime_error("checkpoint truncated: payload has " + std::to_string(payload.size()) + " of " +
                             std::to_string(header.at("payload_bytes").get<std::size_t>()) + " bytes");
  }
  if (digest(payload) != header.at("payload_sha256").get<std::string>()) {
    throw std::runtime_error("checkpoint payload digest mismatch: " + path.string());
  }

  const Architecture arch = architecture_from_json(header.at("architecture"));
  if (expected && !(*expected == arch)) {
    throw std::runtime_error("checkpoint architecture mismatch: file has '" + arch.descriptor() + "', expected '" +
                             expected->descriptor() + "'");
  }
  DetectorCheckpoint out{ToyDetector<float>(arch), train_config_from_json(header.at("train_config")),
                         header.at("clean_map").get<double>()};
  const auto views = tensor_views(out.model);
  const auto& table = header.at("tensors");
  if (table.size() != views.size()) throw std::runtime_error("checkpoint tensor count does not match architecture");
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& entry = table[i];
    auto* dst = views[i].second;
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto count = entry.at("count").get<Index>();
    if (entry.at("name").get<std::string>() != views[i].first || count != dst->size() ||
        entry.at("dtype").get<std::string>() != "float32") {
      throw std::runtime_error("checkpoint tensor '" + entry.at("name").get<std::string>() +
                               "' does not match the model layout");
    }
    if (offset + sizeof(float) * static_cast<std::size_t>(count) > payload.size()) {
      throw std::runtime_error("checkpoint tensor out of bounds: " + views[i].first);
    }
    std::memcpy(dst->data(), payload.data() + offset, sizeof(float) * static_cast<std::size_t>(count));
  }
  return out;
}

}  // namespace monotta
